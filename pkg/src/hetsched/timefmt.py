"""Time parsing and formatting helpers.

All times are integer milliseconds internally.  Two renderings are used
throughout the toolkit: clock style ("9:00:20") for table columns and unit
style ("9h 0m 20s") for report rows.  `parse_duration` accepts both plus the
looser spellings that turn up in free-text model answers.
"""

from __future__ import annotations

import re
from fractions import Fraction

MS_PER_SECOND = 1_000
MS_PER_MINUTE = 60_000
MS_PER_HOUR = 3_600_000

_UNIT_MS = {
    "h": MS_PER_HOUR,
    "m": MS_PER_MINUTE,
    "s": MS_PER_SECOND,
}

_ALIASES = {
    "hour": "h", "hours": "h", "hr": "h", "hrs": "h",
    "minute": "m", "minutes": "m", "min": "m", "mins": "m",
    "second": "s", "seconds": "s", "sec": "s", "secs": "s",
}

_UNIT_TOKEN = re.compile(
    r"(\d+(?:\.\d+)?)\s*(hours?|hrs?|h|minutes?|mins?|m|seconds?|secs?|s)\b",
    re.IGNORECASE,
)
_CLOCK = re.compile(r"^(\d+):([0-5]?\d):([0-5]?\d(?:\.\d{1,3})?)$")
_SEPARATOR = re.compile(r"[\s,]*")


def _canon_unit(unit: str) -> str:
    unit = unit.lower()
    return _ALIASES.get(unit, unit)


def parse_duration(text: str) -> int:
    """Parse a human time expression into integer milliseconds.

    Accepts clock strings ("5:01:20"), unit strings with any subset of
    h/m/s parts ("9h 20s", "12h 32m", "9.005h", "2 hours 5 seconds"), and
    overflowing values ("9h 60s").  The whole string must be a time
    expression; bare numbers are rejected as ambiguous.  Raises ValueError
    on anything else.
    """
    if not isinstance(text, str):
        raise ValueError(f"not a time expression: {text!r}")
    stripped = text.strip()
    clock = _CLOCK.match(stripped)
    if clock:
        hours, minutes, seconds = clock.groups()
        total = (
            int(hours) * MS_PER_HOUR
            + int(minutes) * MS_PER_MINUTE
            + Fraction(seconds) * MS_PER_SECOND
        )
        return int(total)
    if stripped == "0":
        # zero is the one unit-free value that is unambiguous
        return 0
    total = Fraction(0)
    seen: set[str] = set()
    pos = 0
    matched = False
    while pos < len(stripped):
        pos = _SEPARATOR.match(stripped, pos).end()
        if pos >= len(stripped):
            break
        token = _UNIT_TOKEN.match(stripped, pos)
        if token is None:
            raise ValueError(f"not a time expression: {text!r}")
        value, unit = token.group(1), _canon_unit(token.group(2))
        if unit in seen:
            raise ValueError(f"duplicate {unit!r} part in time expression: {text!r}")
        seen.add(unit)
        total += Fraction(value) * _UNIT_MS[unit]
        matched = True
        pos = token.end()
    if not matched:
        raise ValueError(f"not a time expression: {text!r}")
    # round half up to the nearest millisecond
    return int(total + Fraction(1, 2)) if total.denominator != 1 else int(total)


def clock_str(ms: int) -> str:
    """Render milliseconds as H:MM:SS, appending .mmm only when non-integral."""
    if ms < 0:
        raise ValueError("negative time")
    hours, rem = divmod(ms, MS_PER_HOUR)
    minutes, rem = divmod(rem, MS_PER_MINUTE)
    seconds, frac = divmod(rem, MS_PER_SECOND)
    if frac:
        return f"{hours}:{minutes:02d}:{seconds:02d}.{frac:03d}"
    return f"{hours}:{minutes:02d}:{seconds:02d}"


def units_str(ms: int) -> str:
    """Render milliseconds as "Hh Mm Ss"; exact inverse of parse_duration."""
    if ms < 0:
        raise ValueError("negative time")
    hours, rem = divmod(ms, MS_PER_HOUR)
    minutes, rem = divmod(rem, MS_PER_MINUTE)
    seconds, frac = divmod(rem, MS_PER_SECOND)
    if frac:
        sec = f"{seconds}.{frac:03d}".rstrip("0")
    else:
        sec = str(seconds)
    return f"{hours}h {minutes}m {sec}s"


def seconds_str(ms: int) -> str:
    """Render milliseconds as a plain seconds count ("20", "0.5")."""
    seconds, frac = divmod(ms, MS_PER_SECOND)
    if frac:
        return f"{seconds}.{frac:03d}".rstrip("0")
    return str(seconds)


def find_duration(text: str) -> int | None:
    """Find the first time expression embedded in a line of prose.

    Returns milliseconds, or None when the line holds no recognizable
    clock string or run of unit tokens.
    """
    clock = re.search(r"\d+:[0-5]?\d:[0-5]?\d(?:\.\d{1,3})?", text)
    token = _UNIT_TOKEN.search(text)
    if clock and (token is None or clock.start() < token.start()):
        return parse_duration(clock.group(0))
    if token is None:
        return None
    # extend across consecutive tokens: "9h 1m 20s"
    end = token.end()
    while True:
        sep = _SEPARATOR.match(text, end).end()
        nxt = _UNIT_TOKEN.match(text, sep)
        if nxt is None:
            break
        end = nxt.end()
    try:
        return parse_duration(text[token.start():end])
    except ValueError:
        return None
