"""Small shared helpers: clock, ids, overlapping substring scan."""

from __future__ import annotations

import secrets
from datetime import datetime, timezone


def now_iso() -> str:
    """Current UTC time as an ISO-8601 string with second precision."""
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def today_yyyymmdd() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%d")


def new_token() -> str:
    # 32 bytes = 256 bits of entropy, comfortably above the 128-bit floor.
    return secrets.token_urlsafe(32)


def find_occurrences(text: str, surface: str) -> list[int]:
    """Start offsets of every occurrence of ``surface`` in ``text``.

    Case-sensitive, code-point exact, and overlapping: "aa" occurs three
    times in "aaaa".
    """
    if not surface:
        return []
    out = []
    i = text.find(surface)
    while i != -1:
        out.append(i)
        i = text.find(surface, i + 1)
    return out
