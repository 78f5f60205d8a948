"""Static k2-tree over plain T/L bitmaps, and the dense boolean-matrix oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocktree import _slice_bits
from .navigate import K2Navigator, layout
from .schedule import KSchedule

WORD_BITS = 32
RANK_SAMPLE_WORDS = 20
RANK_SAMPLE_BITS = RANK_SAMPLE_WORDS * WORD_BITS

_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be (row, column) pairs")
    return arr


def _rank_directory(buf: bytes, sample_bits: int) -> np.ndarray:
    """``dir[j]`` = number of 1s in bits ``[0, j * sample_bits)``."""
    per = sample_bits // 8
    raw = np.frombuffer(buf, dtype=np.uint8)
    nblocks = len(raw) // per + 1
    padded = np.zeros(nblocks * per, dtype=np.uint8)
    padded[: len(raw)] = raw
    counts = _POPCOUNT8[padded].reshape(nblocks, per).sum(axis=1)
    out = np.zeros(nblocks + 1, dtype=np.int64)
    np.cumsum(counts, out=out[1:])
    return out


class StaticK2Tree(K2Navigator):
    """Immutable k2-tree. Build with :func:`build` or :meth:`from_bitmaps`."""

    def __init__(self, schedule: KSchedule, n: int, t_bytes: bytes, t_bits: int, l_bytes: bytes, l_bits: int, level_bits):
        self.schedule = schedule
        self.n_ids = n
        self.t_bytes = bytes(t_bytes)
        self.t_bits = t_bits
        self.l_bytes = bytes(l_bytes)
        self.l_bits = l_bits
        self.level_bits = list(level_bits)
        self._dir = _rank_directory(self.t_bytes, RANK_SAMPLE_BITS)
        self._starts, self._ones_before = layout(self.level_bits, schedule.groups)

    @classmethod
    def from_bitmaps(cls, schedule: KSchedule, n: int, t_bytes: bytes, t_bits: int, l_bytes: bytes, l_bits: int) -> "StaticK2Tree":
        """Rebuild from raw bitmaps, recovering per-level sizes by navigation."""
        level_bits = [0] * schedule.nlevels
        if t_bits or l_bits:
            tmp = cls(schedule, n, t_bytes, t_bits, l_bytes, l_bits, [t_bits] + [0] * (schedule.nlevels - 1))
            level_bits[0] = schedule.groups[0]
            start = 0
            for l in range(schedule.nlevels - 1):
                size = level_bits[l]
                ones = tmp._rank_range(start, start + size)
                level_bits[l + 1] = ones * schedule.groups[l + 1]
                start += size
            if start != t_bits or level_bits[-1] != l_bits:
                raise ValueError("bitmaps are inconsistent with the schedule")
        return cls(schedule, n, t_bytes, t_bits, l_bytes, l_bits, level_bits)

    # ---- bit primitives

    def is_empty(self) -> bool:
        return self.t_bits == 0 and self.l_bits == 0

    def t_length(self) -> int:
        return self.t_bits

    def _layout(self):
        return self._starts, self._ones_before

    def _bitmaps(self) -> tuple[bytes, bytes]:
        return self.t_bytes, self.l_bytes

    def t_access(self, p: int) -> int:
        if not 0 <= p < self.t_bits:
            raise IndexError(f"T position {p} outside [0, {self.t_bits})")
        return (self.t_bytes[p >> 3] >> (p & 7)) & 1

    def l_access(self, p: int) -> int:
        if not 0 <= p < self.l_bits:
            raise IndexError(f"L position {p} outside [0, {self.l_bits})")
        return (self.l_bytes[p >> 3] >> (p & 7)) & 1

    def rank1(self, p: int) -> int:
        """1s in ``T[0, p]`` via the sampled directory plus one partial scan."""
        if not 0 <= p < self.t_bits:
            raise IndexError(f"T position {p} outside [0, {self.t_bits})")
        stop = p + 1
        j = stop // RANK_SAMPLE_BITS
        start = j * RANK_SAMPLE_BITS
        return int(self._dir[j]) + _slice_bits(self.t_bytes, start, stop).bit_count()

    def _rank_range(self, a: int, b: int) -> int:
        return _slice_bits(self.t_bytes, a, b).bit_count()

    def _bit_ops(self):
        tb = self.t_bytes
        rank1 = self.rank1

        def t_bit_rank(p):
            if (tb[p >> 3] >> (p & 7)) & 1:
                return rank1(p)
            return 0

        return t_bit_rank, self.l_access

    # ---- reporting

    def ones_t(self) -> int:
        return int(self._dir[-1])

    def measure(self) -> dict:
        directory_bytes = 4 * len(self._dir)
        return {
            "t_bits": self.t_bits,
            "l_bits": self.l_bits,
            "directory_bytes": directory_bytes,
            "total_bytes": (self.t_bits + 7) // 8 + (self.l_bits + 7) // 8 + directory_bytes,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, StaticK2Tree):
            return NotImplemented
        return (
            self.schedule == other.schedule
            and self.n_ids == other.n_ids
            and self.t_bits == other.t_bits
            and self.l_bits == other.l_bits
            and self.t_bytes == other.t_bytes
            and self.l_bytes == other.l_bytes
        )

    __hash__ = None


def measure(tree: StaticK2Tree) -> dict:
    return tree.measure()


def build(points, schedule: KSchedule, n: int | None = None) -> StaticK2Tree:
    """Levelwise construction from ``(row, column)`` pairs.

    Each point gets a mixed-radix key made of its child offsets, root first;
    sorting the keys puts the nodes of every level in levelwise order. Per
    level, the distinct key prefixes are the nodes and the next digit picks
    the 1 inside each node's group.
    """
    side = schedule.side
    n = side if n is None else n
    if n > side:
        raise ValueError(f"logical side {n} exceeds schedule side {side}")
    pts = _as_points(points)
    if len(pts) and (pts.min() < 0 or pts.max() >= n):
        raise IndexError(f"point outside the {n}x{n} matrix")
    nlev = schedule.nlevels
    if not len(pts):
        return StaticK2Tree(schedule, n, b"", 0, b"", 0, [0] * nlev)
    if 2 * side.bit_length() > 62:
        raise ValueError("matrix side too large for 64-bit path keys")
    rows, cols = pts[:, 0], pts[:, 1]
    key = np.zeros(len(pts), dtype=np.int64)
    for l in range(nlev):
        s = schedule.child_side[l]
        k = schedule.ks[l]
        off = ((rows // s) % k) * k + (cols // s) % k
        key = key * schedule.groups[l] + off
    key = np.unique(key)
    # weight[l] = product of the group sizes below level l
    weight = [1] * nlev
    for l in range(nlev - 2, -1, -1):
        weight[l] = weight[l + 1] * schedule.groups[l + 1]
    level_arrays = []
    for l in range(nlev):
        g = schedule.groups[l]
        prefix = key // (weight[l] * g)
        digit = (key // weight[l]) % g
        _, node = np.unique(prefix, return_inverse=True)
        nnodes = int(node.max()) + 1
        bits = np.zeros(nnodes * g, dtype=np.uint8)
        bits[node.reshape(-1) * g + digit] = 1
        level_arrays.append(bits)
    level_bits = [len(a) for a in level_arrays]
    t_arr = np.concatenate(level_arrays[:-1]) if nlev > 1 else np.zeros(0, dtype=np.uint8)
    l_arr = level_arrays[-1]
    t_bytes = np.packbits(t_arr, bitorder="little").tobytes()
    l_bytes = np.packbits(l_arr, bitorder="little").tobytes()
    return StaticK2Tree(schedule, n, t_bytes, len(t_arr), l_bytes, len(l_arr), level_bits)


@dataclass
class MatrixOracle:
    """Dense boolean matrix with the same id bookkeeping as the dynamic tree."""

    n_ids: int = 0
    capacity: int = 0

    def __post_init__(self):
        self.capacity = max(self.capacity, self.n_ids, 1)
        self.m = np.zeros((self.capacity, self.capacity), dtype=bool)
        self.free_ids: list[int] = []

    def _grow(self, need: int) -> None:
        cap = self.capacity
        while cap < need:
            cap *= 2
        if cap != self.capacity:
            m = np.zeros((cap, cap), dtype=bool)
            m[: self.capacity, : self.capacity] = self.m
            self.m = m
            self.capacity = cap

    def _check(self, r: int, c: int) -> None:
        if not (0 <= r < self.n_ids and 0 <= c < self.n_ids):
            raise IndexError(f"cell ({r}, {c}) outside {self.n_ids}x{self.n_ids} matrix")

    def get_cell(self, r: int, c: int) -> int:
        self._check(r, c)
        return int(self.m[r, c])

    def set_cell(self, r: int, c: int) -> bool:
        self._check(r, c)
        changed = not self.m[r, c]
        self.m[r, c] = True
        return bool(changed)

    def clear_cell(self, r: int, c: int) -> bool:
        self._check(r, c)
        changed = bool(self.m[r, c])
        self.m[r, c] = False
        return changed

    def row_successors(self, r: int) -> list[int]:
        self._check(r, 0)
        return np.flatnonzero(self.m[r, : self.n_ids]).tolist()

    def col_predecessors(self, c: int) -> list[int]:
        self._check(0, c)
        return np.flatnonzero(self.m[: self.n_ids, c]).tolist()

    def range(self, r1: int, r2: int, c1: int, c2: int) -> list[tuple[int, int]]:
        sub = self.m[r1 : r2 + 1, c1 : c2 + 1]
        rs, cs = np.nonzero(sub)
        return [(int(r) + r1, int(c) + c1) for r, c in zip(rs, cs)]

    def cells(self) -> list[tuple[int, int]]:
        if self.n_ids == 0:
            return []
        return self.range(0, self.n_ids - 1, 0, self.n_ids - 1)

    def ones(self) -> int:
        return int(self.m.sum())

    def add_node(self) -> int:
        if self.free_ids:
            return self.free_ids.pop()
        self._grow(self.n_ids + 1)
        self.n_ids += 1
        return self.n_ids - 1

    def remove_node(self, node: int) -> None:
        if not 0 <= node < self.n_ids or node in self.free_ids:
            raise ValueError(f"node {node} is not in use")
        self.m[node, :] = False
        self.m[:, node] = False
        self.free_ids.append(node)

    def points(self) -> np.ndarray:
        rs, cs = np.nonzero(self.m)
        return np.stack([rs, cs], axis=1).astype(np.int64)
