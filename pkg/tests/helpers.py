"""Shared fixtures: bit-string packing, the 16x16 worked example, set-based oracles."""

from dk2tree.schedule import KSchedule

# Levelwise bitmaps of the 16x16 example matrix (k=2, four levels).
FIG1_T = "1110 1101 1010 0100 0110 1001 0101 0010 1010 1100".replace(" ", "")
FIG1_L = "1000" * 10 + "1010"
FIG1_SCHEDULE = KSchedule((2, 2, 2, 2))


def pack(bitstring: str) -> bytes:
    """Character ``i`` of the string becomes bit ``i`` (LSB-first)."""
    value = sum(1 << i for i, ch in enumerate(bitstring) if ch == "1")
    return value.to_bytes((len(bitstring) + 7) // 8, "little")


def unpack(data: bytes, nbits: int) -> str:
    value = int.from_bytes(data, "little")
    return "".join("1" if (value >> i) & 1 else "0" for i in range(nbits))


def expand_cells(t: str, l: str, ks):
    """Decode levelwise bitmaps into cells by plain recursive descent (no rank structure)."""
    bits = t + l
    sides = [1] * len(ks)
    for i in range(len(ks) - 2, -1, -1):
        sides[i] = sides[i + 1] * ks[i + 1]
    # children of each level are consumed left to right, so walk level by level
    frontier = [(0, 0)]
    pos = 0
    cells = []
    for level, k in enumerate(ks):
        nxt = []
        for r0, c0 in frontier:
            for off in range(k * k):
                if bits[pos + off] == "1":
                    r, c = r0 + (off // k) * sides[level], c0 + (off % k) * sides[level]
                    if level == len(ks) - 1:
                        cells.append((r, c))
                    else:
                        nxt.append((r, c))
            pos += k * k
        frontier = nxt
    return sorted(cells)


def rows_of(cells, r):
    return sorted(c for rr, c in cells if rr == r)


def cols_of(cells, c):
    return sorted(r for r, cc in cells if cc == c)


def in_rect(cells, r1, r2, c1, c2):
    return sorted((r, c) for r, c in cells if r1 <= r <= r2 and c1 <= c <= c2)


# ---- acceptance reporting

import time
from contextlib import contextmanager

ACCEPTANCE_LINES: list[str] = []


@contextmanager
def criterion(number: int, title: str, limit_seconds: float | None = None):
    """Run one acceptance criterion and record a single pass/fail line for it.

    The body may fill the yielded dict with details for the report line.
    """
    info: dict = {}
    start = time.perf_counter()
    ok = False
    try:
        yield info
        elapsed = time.perf_counter() - start
        info["seconds"] = round(elapsed, 1)
        if limit_seconds is not None and elapsed > limit_seconds:
            info["over_limit"] = f">{limit_seconds}s"
            raise AssertionError(f"criterion {number} took {elapsed:.1f}s, limit {limit_seconds}s")
        ok = True
    finally:
        info.setdefault("seconds", round(time.perf_counter() - start, 1))
        detail = ", ".join(f"{k}={v}" for k, v in info.items())
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
