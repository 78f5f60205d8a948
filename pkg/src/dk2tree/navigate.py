"""Query traversal common to static and dynamic k2-trees.

Levels are laid out one after another: levels ``0 .. n-2`` form ``T`` and the
last level forms ``L``. The children of the 1 at global position ``pos`` of
level ``l`` start at::

    start[l+1] + (rank1(T, pos) - ones_before[l] - 1) * k[l+1]**2

where ``ones_before[l]`` counts the 1s of the levels above ``l``. With a
single arity this collapses to ``rank1(T, pos) * k**2``.

Traversals go level by level, so within a level positions are visited in
increasing order; the dynamic tree exploits this through its path memos.
Large rectangles skip rank entirely: the children of the i-th 1 of a level
form the i-th group of the next level, so one linear decode of the bitmaps
yields every cell.
"""

from __future__ import annotations

import numpy as np

from .schedule import compute_child

# rectangles covering at least this fraction of the matrix are answered by a full decode
FULL_DECODE_FRACTION = 0.25


def layout(level_bits, groups) -> tuple[list[int], list[int]]:
    """Start offset of each level and the number of T ones above each level."""
    starts = [0]
    for size in level_bits[:-1]:
        starts.append(starts[-1] + size)
    ones_before = [0]
    for l in range(1, len(level_bits)):
        ones_before.append(ones_before[-1] + level_bits[l] // groups[l])
    return starts, ones_before


class K2Navigator:
    """Mixin supplying cell, row, column and range queries.

    Subclasses provide ``schedule``, ``n_ids``, ``level_bits``, ``is_empty()``,
    ``t_length()``, ``_layout()``, ``_bitmaps()`` and ``_bit_ops()``. The last
    returns ``(t_bit_rank, l_access)`` where ``t_bit_rank(pos)`` is 0 for a 0
    bit and the inclusive rank otherwise; ``_bitmaps()`` returns T and L
    packed little-endian.
    """

    def _check_cell(self, r: int, c: int) -> None:
        if not (0 <= r < self.n_ids and 0 <= c < self.n_ids):
            raise IndexError(f"cell ({r}, {c}) outside {self.n_ids}x{self.n_ids} matrix")

    def child_base(self, level: int, rank: int, starts, ones_before) -> int:
        return starts[level + 1] + (rank - ones_before[level] - 1) * self.schedule.groups[level + 1]

    def get_cell(self, r: int, c: int) -> int:
        self._check_cell(r, c)
        return self._get_cell(r, c)

    def _get_cell(self, r: int, c: int) -> int:
        if self.is_empty():
            return 0
        sched = self.schedule
        t_bit_rank, l_access = self._bit_ops()
        starts, ones_before = self._layout()
        last = sched.nlevels - 1
        groups = sched.groups
        base = 0
        for l in range(last):
            pos = base + compute_child(sched, r, c, l)
            rank = t_bit_rank(pos)
            if not rank:
                return 0
            base = starts[l + 1] + (rank - ones_before[l] - 1) * groups[l + 1]
        return l_access(base + compute_child(sched, r, c, last) - self.t_length())

    def row_successors(self, r: int) -> list[int]:
        self._check_cell(r, 0)
        return [c for _, c in self._band(r, r, 0, self.n_ids - 1)]

    def col_predecessors(self, c: int) -> list[int]:
        self._check_cell(0, c)
        return [r for r, _ in self._band(0, self.n_ids - 1, c, c)]

    def range(self, r1: int, r2: int, c1: int, c2: int) -> list[tuple[int, int]]:
        """All 1-cells in the rectangle ``[r1, r2] x [c1, c2]``, row-major."""
        if not (0 <= r1 <= r2 < self.n_ids and 0 <= c1 <= c2 < self.n_ids):
            raise IndexError(f"range [{r1},{r2}]x[{c1},{c2}] outside {self.n_ids}x{self.n_ids} matrix")
        area = (r2 - r1 + 1) * (c2 - c1 + 1)
        if area >= FULL_DECODE_FRACTION * self.n_ids * self.n_ids:
            rows, cols = self._decode_all()
            keep = (rows >= r1) & (rows <= r2) & (cols >= c1) & (cols <= c2)
            return list(zip(rows[keep].tolist(), cols[keep].tolist()))
        cells = self._band(r1, r2, c1, c2)
        cells.sort()
        return cells

    def _decode_all(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows and columns of every 1 cell, in row-major order."""
        if self.is_empty():
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        sched = self.schedule
        t_bytes, l_bytes = self._bitmaps()
        t_bits = self.t_length()
        bits = np.concatenate([
            np.unpackbits(np.frombuffer(t_bytes, dtype=np.uint8), bitorder="little")[:t_bits],
            np.unpackbits(np.frombuffer(l_bytes, dtype=np.uint8), bitorder="little")[: self.level_bits[-1]],
        ])
        rows = np.zeros(1, dtype=np.int64)
        cols = np.zeros(1, dtype=np.int64)
        pos = 0
        for l, size in enumerate(self.level_bits):
            k, g, s = sched.ks[l], sched.groups[l], sched.child_side[l]
            idx = np.flatnonzero(bits[pos : pos + size])
            pos += size
            node, off = np.divmod(idx, g)
            rows = rows[node] + (off // k) * s
            cols = cols[node] + (off % k) * s
        order = np.lexsort((cols, rows))
        return rows[order], cols[order]

    def cells(self) -> list[tuple[int, int]]:
        if self.n_ids == 0:
            return []
        return self.range(0, self.n_ids - 1, 0, self.n_ids - 1)

    def _band(self, r1: int, r2: int, c1: int, c2: int) -> list[tuple[int, int]]:
        if self.is_empty():
            return []
        sched = self.schedule
        t_bit_rank, l_access = self._bit_ops()
        starts, ones_before = self._layout()
        last = sched.nlevels - 1
        tlen = self.t_length()
        frontier = [(0, 0, 0)]
        out: list[tuple[int, int]] = []
        for l in range(sched.nlevels):
            k = sched.ks[l]
            s = sched.child_side[l]
            nxt = []
            if l < last:
                g_next = sched.groups[l + 1]
                first = starts[l + 1] - (ones_before[l] + 1) * g_next
            for base, r0, c0 in frontier:
                i_lo = max(0, (r1 - r0) // s)
                i_hi = min(k - 1, (r2 - r0) // s)
                j_lo = max(0, (c1 - c0) // s)
                j_hi = min(k - 1, (c2 - c0) // s)
                for i in range(i_lo, i_hi + 1):
                    row_base = base + i * k
                    rr = r0 + i * s
                    for j in range(j_lo, j_hi + 1):
                        if l == last:
                            if l_access(row_base + j - tlen):
                                out.append((rr, c0 + j * s))
                        else:
                            rank = t_bit_rank(row_base + j)
                            if rank:
                                nxt.append((first + rank * g_next, rr, c0 + j * s))
            frontier = nxt
            if not frontier:
                break
        return out
