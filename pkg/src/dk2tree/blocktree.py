"""Balanced block trees: dynamic bit vectors with access, rank and group splices.

Internal nodes carry one entry per child: the number of bits below it (``b``)
and, when the tree tracks ones, the number of 1s below it (``o``). Leaves hold
a chunk of the bit sequence as a Python int plus per-slice rank samples.
Leaves come in ``e + 1`` size classes; an overflowing leaf is moved to the next
class, and a full class-``e`` leaf is split in two class-0 leaves.

Splits never cut a sibling group. Where groups start is answered by an
*aligner*, an object with ``is_boundary(p)`` for a global bit position ``p``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

from .codec import RankSamples, block_rank1, rebuild_samples, refresh_samples

SNAPSHOT_VERSION = 1

_MASKS: dict[int, int] = {}


def _mask(n: int) -> int:
    m = _MASKS.get(n)
    if m is None:
        m = _MASKS[n] = (1 << n) - 1
    return m


class UnitAligner:
    """Group boundaries every ``unit`` bits from position 0."""

    def __init__(self, unit: int):
        self.unit = unit

    def is_boundary(self, p: int) -> bool:
        return p % self.unit == 0


@dataclass(slots=True)
class OpStats:
    """Work counters; tests and the bench harness read these, nothing else does."""

    visits: int = 0
    counter_updates: int = 0
    words_written: int = 0
    splices: int = 0
    flips: int = 0

    def reset(self) -> None:
        self.visits = self.counter_updates = self.words_written = 0
        self.splices = self.flips = 0

    def mutation_work(self) -> int:
        return self.counter_updates + self.words_written


class Node:
    __slots__ = ("b", "o", "kids")

    def __init__(self, b=None, o=None, kids=None):
        self.b = b if b is not None else []
        self.o = o if o is not None else []
        self.kids = kids if kids is not None else []


class Leaf:
    __slots__ = ("bits", "n", "cls", "samples")

    def __init__(self, bits: int = 0, n: int = 0, cls: int = 0, samples: RankSamples | None = None):
        self.bits = bits
        self.n = n
        self.cls = cls
        self.samples = samples


class PathMemo:
    """Last root-to-leaf path of one tree, used by :meth:`BlockTree.find_leaf_star`.

    ``levels[d]`` is ``[node, entry index, bits before node, ones before node,
    bits covered by node]``. The memo is only trusted while the tree version
    it was recorded against is current.
    """

    __slots__ = ("levels", "leaf", "leaf_b", "leaf_o", "version", "ascended", "descended")

    def __init__(self):
        self.levels: list[list] = []
        self.leaf = None
        self.leaf_b = 0
        self.leaf_o = 0
        self.version = -1
        self.ascended = 0
        self.descended = 0

    @property
    def valid(self) -> bool:
        return self.leaf is not None

    def invalidate(self) -> None:
        self.leaf = None
        self.levels = []


class BlockTree:
    """A dynamic bit sequence held in a balanced tree of bounded blocks.

    ``track_ones`` selects T-tree mode (entries carry ones counters and leaves
    carry rank samples); without it the tree is an L-tree supporting access only.
    """

    ENTRY_BYTES_T = 16  # 4-byte b, 4-byte o, 8-byte child reference
    ENTRY_BYTES_L = 12
    NODE_HEADER_BYTES = 8
    LEAF_HEADER_BYTES = 8

    def __init__(
        self,
        block_bytes: int = 512,
        expansions: int = 3,
        sample_period: int = 128,
        track_ones: bool = True,
        aligner=None,
        max_entries: int | None = None,
    ):
        if block_bytes < 8:
            raise ValueError("block size must be at least 8 bytes")
        if expansions < 0:
            raise ValueError("expansion count must be non-negative")
        self.block_bytes = block_bytes
        self.expansions = expansions
        self.sample_period = sample_period
        self.track_ones = track_ones
        self.aligner = aligner if aligner is not None else UnitAligner(1)
        entry = self.ENTRY_BYTES_T if track_ones else self.ENTRY_BYTES_L
        self.max_entries = max_entries or max(4, block_bytes // entry)
        self.min_entries = (self.max_entries + 1) // 2
        self.capacities = [
            block_bytes + c * block_bytes // (expansions + 1) for c in range(expansions + 1)
        ]
        self.min_leaf_bytes = block_bytes // 4
        self.root = self._empty_leaf()
        self.depth = 0  # internal levels above the leaves
        self.total_bits = 0
        self.total_ones = 0
        self.version = 0
        self.stats = OpStats()

    # ------------------------------------------------------------------ leaves
    # Everything below that touches a leaf's payload goes through these hooks,
    # so a subclass can store a different payload (see vocab.VocabLTree).

    def _empty_leaf(self):
        return Leaf(0, 0, 0, RankSamples(self.sample_period, []) if self.track_ones else None)

    def _make_leaf(self, bits: int, n: int):
        leaf = Leaf(bits, n, self._class_for(self._bytes_for_bits(n)))
        if self.track_ones:
            leaf.samples = rebuild_samples(bits, n, self.sample_period)
        return leaf

    @staticmethod
    def _bytes_for_bits(n: int) -> int:
        return (n + 7) >> 3

    def _leaf_bytes(self, leaf) -> int:
        return (leaf.n + 7) >> 3

    def _leaf_ones(self, leaf) -> int:
        return leaf.bits.bit_count() if self.track_ones else 0

    def _cut(self, leaf, q: int):
        """Split a leaf at logical offset ``q`` into two fresh leaves."""
        left = self._make_leaf(leaf.bits & _mask(q), q)
        right = self._make_leaf(leaf.bits >> q, leaf.n - q)
        return left, right

    def _concat(self, a, b):
        return self._make_leaf(a.bits | (b.bits << a.n), a.n + b.n)

    def _split_point(self, leaf, b_start: int) -> int:
        return self._nearest_boundary(leaf, b_start, leaf.n // 2)

    def _first_group_end(self, leaf, b_start: int) -> int:
        q = 1
        is_b = self.aligner.is_boundary
        while q < leaf.n and not is_b(b_start + q):
            q += 1
        return q

    def _last_group_start(self, leaf, b_start: int) -> int:
        q = leaf.n - 1
        is_b = self.aligner.is_boundary
        while q > 0 and not is_b(b_start + q):
            q -= 1
        return q

    def _nearest_boundary(self, leaf, b_start: int, target: int) -> int:
        is_b = self.aligner.is_boundary
        n = leaf.n
        for delta in range(n):
            for q in (target - delta, target + delta):
                if 0 < q < n and is_b(b_start + q):
                    return q
        raise RuntimeError("leaf holds a single group and cannot be split")

    def _class_for(self, nbytes: int) -> int:
        for c, cap in enumerate(self.capacities):
            if nbytes <= cap:
                return c
        return self.expansions

    # ------------------------------------------------------------------ queries

    def __len__(self) -> int:
        return self.total_bits

    def _check(self, p: int) -> None:
        if p < 0 or p >= self.total_bits:
            raise IndexError(f"position {p} outside bit sequence of length {self.total_bits}")

    def _descend(self, p: int):
        """Root-to-leaf walk; returns ``(path, leaf, b_before, o_before)``.

        A position equal to a child boundary goes right; ``p == total`` lands
        in the last leaf, which is what insertion at the end needs.
        """
        node = self.root
        path = []
        bb = ob = 0
        for _ in range(self.depth):
            b = node.b
            last = len(b) - 1
            i = 0
            while i < last and p >= bb + b[i]:
                bb += b[i]
                ob += node.o[i]
                i += 1
            path.append((node, i))
            node = node.kids[i]
        self.stats.visits += self.depth + 1
        return path, node, bb, ob

    def find_leaf(self, p: int):
        """Return ``(leaf, bits before leaf, ones before leaf)`` for position ``p``."""
        self._check(p)
        node = self.root
        bb = ob = 0
        for _ in range(self.depth):
            b = node.b
            last = len(b) - 1
            i = 0
            while i < last and p >= bb + b[i]:
                bb += b[i]
                ob += node.o[i]
                i += 1
            node = node.kids[i]
        self.stats.visits += self.depth + 1
        return node, bb, ob

    def find_leaf_star(self, p: int, memo: PathMemo):
        """Same result as :meth:`find_leaf`, restarting from the memoized leaf.

        Climbs the recorded path until a node covering ``p`` is found, then
        descends as usual; the memo is left describing the new path.
        """
        self._check(p)
        levels = memo.levels
        if memo.leaf is not None and memo.version == self.version:
            lb = memo.leaf_b
            if lb <= p < lb + memo.leaf.n:
                memo.ascended = memo.descended = 0
                return memo.leaf, lb, memo.leaf_o
            d = len(levels) - 1
            while d > 0:
                lv = levels[d]
                if lv[2] <= p < lv[2] + lv[4]:
                    break
                d -= 1
            memo.ascended = len(levels) - d
            if levels:
                node, _, bb, ob, covered = levels[d]
                del levels[d:]
            else:
                node, bb, ob, covered = self.root, 0, 0, self.total_bits
        else:
            levels.clear()
            memo.ascended = 0
            d = 0
            node, bb, ob, covered = self.root, 0, 0, self.total_bits
        for _ in range(d, self.depth):
            b = node.b
            last = len(b) - 1
            i = 0
            nb, no = bb, ob
            while i < last and p >= bb + b[i]:
                bb += b[i]
                ob += node.o[i]
                i += 1
            levels.append([node, i, nb, no, covered])
            covered = b[i]
            node = node.kids[i]
        memo.descended = self.depth - d
        self.stats.visits += self.depth - d + 1
        memo.leaf = node
        memo.leaf_b = bb
        memo.leaf_o = ob
        memo.version = self.version
        return node, bb, ob

    def access(self, p: int) -> int:
        leaf, bb, _ = self.find_leaf(p)
        return (leaf.bits >> (p - bb)) & 1

    def rank1(self, p: int) -> int:
        """Number of 1s in positions ``[0, p]`` (inclusive)."""
        if not self.track_ones:
            raise TypeError("rank is only available on trees that track ones")
        leaf, bb, ob = self.find_leaf(p)
        return ob + block_rank1(leaf.bits, leaf.n, leaf.samples, p - bb + 1)

    def bit_rank(self, p: int, memo: PathMemo | None = None) -> int:
        """0 if bit ``p`` is 0, else ``rank1(p)``; one descent for both."""
        if memo is None:
            leaf, bb, ob = self.find_leaf(p)
        else:
            leaf, bb, ob = self.find_leaf_star(p, memo)
        q = p - bb
        if not (leaf.bits >> q) & 1:
            return 0
        return ob + block_rank1(leaf.bits, leaf.n, leaf.samples, q + 1)

    def access_star(self, p: int, memo: PathMemo) -> int:
        leaf, bb, _ = self.find_leaf_star(p, memo)
        return (leaf.bits >> (p - bb)) & 1

    def rank1_star(self, p: int, memo: PathMemo) -> int:
        leaf, bb, ob = self.find_leaf_star(p, memo)
        return ob + block_rank1(leaf.bits, leaf.n, leaf.samples, p - bb + 1)

    def get_bits(self, p: int, g: int) -> int:
        """Read ``g`` bits starting at ``p``; the range must sit inside one leaf."""
        leaf, bb, _ = self.find_leaf(p)
        q = p - bb
        if q + g > leaf.n:
            raise ValueError(f"bits [{p}, {p + g}) span two leaves")
        return (leaf.bits >> q) & _mask(g)

    def iter_leaves(self):
        """Yield leaves left to right."""
        stack = [(self.root, self.depth)]
        while stack:
            node, d = stack.pop()
            if d == 0:
                yield node
            else:
                for kid in reversed(node.kids):
                    stack.append((kid, d - 1))

    def to_bits(self) -> int:
        parts = [(leaf.bits, leaf.n) for leaf in self.iter_leaves()]
        return _concat_parts(parts)[0]

    # ---------------------------------------------------------------- updates

    def _touch(self) -> None:
        self.version += 1

    def flip(self, p: int) -> int:
        """Invert bit ``p``; returns its new value."""
        self._check(p)
        path, leaf, bb, _ = self._descend(p)
        q = p - bb
        old = (leaf.bits >> q) & 1
        leaf.bits ^= 1 << q
        d = -1 if old else 1
        if self.track_ones:
            counts = leaf.samples.counts
            j = q // self.sample_period
            if j < len(counts):
                counts[j] += d
            for node, i in path:
                node.o[i] += d
            self.total_ones += d
            self.stats.counter_updates += len(path)
        self.stats.flips += 1
        self.stats.words_written += 1
        self._touch()
        return old ^ 1

    def insert_bits(self, p: int, bits: int, g: int) -> int:
        """Splice the ``g``-bit group ``bits`` in at position ``p``.

        Returns the number of 1s before ``p`` (0 when ones are not tracked).
        """
        if p < 0 or p > self.total_bits:
            raise IndexError(f"insert position {p} outside [0, {self.total_bits}]")
        bits &= _mask(g)
        path, leaf, bb, ob = self._descend(p)
        q = p - bb
        before = ob + block_rank1(leaf.bits, leaf.n, leaf.samples, q) if self.track_ones else 0
        low = leaf.bits & _mask(q)
        leaf.bits = low | (bits << q) | ((leaf.bits >> q) << (q + g))
        leaf.n += g
        ones = bits.bit_count() if self.track_ones else 0
        if self.track_ones:
            refresh_samples(leaf.bits, leaf.n, leaf.samples, q)
        for node, i in path:
            node.b[i] += g
            node.o[i] += ones
        self.total_bits += g
        self.total_ones += ones
        st = self.stats
        st.splices += 1
        st.counter_updates += len(path) * (2 if self.track_ones else 1)
        st.words_written += ((leaf.n - q) >> 6) + 1
        self._touch()
        self._after_grow(path, leaf, bb)
        return before

    def remove_bits(self, p: int, g: int) -> int:
        """Remove the ``g``-bit group at ``p``; returns the removed bits."""
        if p < 0 or p + g > self.total_bits:
            raise IndexError(f"remove range [{p}, {p + g}) outside sequence of length {self.total_bits}")
        path, leaf, bb, _ = self._descend(p)
        q = p - bb
        if q + g > leaf.n:
            raise ValueError(f"group [{p}, {p + g}) spans two leaves")
        removed = (leaf.bits >> q) & _mask(g)
        leaf.bits = (leaf.bits & _mask(q)) | ((leaf.bits >> (q + g)) << q)
        leaf.n -= g
        ones = removed.bit_count() if self.track_ones else 0
        if self.track_ones:
            refresh_samples(leaf.bits, leaf.n, leaf.samples, q)
        for node, i in path:
            node.b[i] -= g
            node.o[i] -= ones
        self.total_bits -= g
        self.total_ones -= ones
        st = self.stats
        st.splices += 1
        st.counter_updates += len(path) * (2 if self.track_ones else 1)
        st.words_written += ((leaf.n - q) >> 6) + 1
        self._touch()
        self._after_shrink(path, leaf, bb)
        return removed

    # ------------------------------------------------------- restructuring

    def _entry_values(self, child, leaf_level: bool):
        if leaf_level:
            return child.n, self._leaf_ones(child)
        return sum(child.b), sum(child.o)

    def _after_grow(self, path, leaf, bb: int) -> None:
        size = self._leaf_bytes(leaf)
        if size <= self.capacities[leaf.cls]:
            return
        if size <= self.capacities[-1]:
            leaf.cls = self._class_for(size)
            return
        q = self._split_point(leaf, bb)
        left, right = self._cut(leaf, q)
        self._replace_with_pair(path, left, right, leaf_level=True)

    def _replace_with_pair(self, path, left, right, leaf_level: bool) -> None:
        lb, lo = self._entry_values(left, leaf_level)
        rb, ro = self._entry_values(right, leaf_level)
        if not path:
            self.root = Node([lb, rb], [lo, ro], [left, right])
            self.depth += 1
            return
        parent, i = path[-1]
        parent.kids[i] = left
        parent.b[i] = lb
        parent.o[i] = lo
        parent.kids.insert(i + 1, right)
        parent.b.insert(i + 1, rb)
        parent.o.insert(i + 1, ro)
        if len(parent.kids) > self.max_entries:
            half = len(parent.kids) // 2
            new = Node(parent.b[half:], parent.o[half:], parent.kids[half:])
            del parent.b[half:], parent.o[half:], parent.kids[half:]
            self._replace_with_pair(path[:-1], parent, new, leaf_level=False)

    def _after_shrink(self, path, leaf, bb: int) -> None:
        if not path or self._leaf_bytes(leaf) >= self.min_leaf_bytes:
            return
        parent, i = path[-1]
        j = i + 1 if i + 1 < len(parent.kids) else i - 1
        sib = parent.kids[j]
        sib_start = bb + parent.b[i] if j > i else bb - parent.b[j]
        if sib.n > 0:
            # borrow one group from the sibling's edge next to the leaf
            if j > i:
                piece, rest = self._cut(sib, self._first_group_end(sib, sib_start))
            else:
                rest, piece = self._cut(sib, self._last_group_start(sib, sib_start))
            if self._leaf_bytes(rest) >= self.min_leaf_bytes:
                merged = self._concat(leaf, piece) if j > i else self._concat(piece, leaf)
                self._set_pair(parent, i, merged, j, rest)
                return
        a = min(i, j)
        left, right = parent.kids[a], parent.kids[a + 1]
        merged = self._concat(left, right)
        merged.cls = self._class_for(self._leaf_bytes(merged))
        if self._leaf_bytes(merged) > self.capacities[-1]:
            # cannot merge into one block; rebalance the pair instead
            q = self._split_point(merged, (bb if a == i else sib_start))
            l2, r2 = self._cut(merged, q)
            self._set_pair(parent, a, l2, a + 1, r2)
            return
        parent.kids[a] = merged
        parent.b[a] += parent.b[a + 1]
        parent.o[a] += parent.o[a + 1]
        del parent.kids[a + 1], parent.b[a + 1], parent.o[a + 1]
        self._fix_internal(path[:-1], parent)

    def _set_pair(self, parent, i, li, j, lj) -> None:
        for idx, leaf in ((i, li), (j, lj)):
            leaf.cls = self._class_for(self._leaf_bytes(leaf))
            parent.kids[idx] = leaf
            parent.b[idx] = leaf.n
            parent.o[idx] = self._leaf_ones(leaf)

    def _fix_internal(self, path, node) -> None:
        """Restore fill bounds of ``node`` after it lost an entry."""
        if not path:
            while self.depth > 0 and len(self.root.kids) == 1:
                self.root = self.root.kids[0]
                self.depth -= 1
            return
        if len(node.kids) >= self.min_entries:
            return
        parent, i = path[-1]
        j = i + 1 if i + 1 < len(parent.kids) else i - 1
        sib = parent.kids[j]
        if len(sib.kids) > self.min_entries:
            if j > i:
                node.kids.append(sib.kids.pop(0))
                node.b.append(sib.b.pop(0))
                node.o.append(sib.o.pop(0))
            else:
                node.kids.insert(0, sib.kids.pop())
                node.b.insert(0, sib.b.pop())
                node.o.insert(0, sib.o.pop())
            for idx, nd in ((i, node), (j, sib)):
                parent.b[idx] = sum(nd.b)
                parent.o[idx] = sum(nd.o)
            return
        a = min(i, j)
        left, right = parent.kids[a], parent.kids[a + 1]
        left.kids.extend(right.kids)
        left.b.extend(right.b)
        left.o.extend(right.o)
        parent.b[a] += parent.b[a + 1]
        parent.o[a] += parent.o[a + 1]
        del parent.kids[a + 1], parent.b[a + 1], parent.o[a + 1]
        self._fix_internal(path[:-1], parent)

    # ------------------------------------------------------------ bulk build

    def _bulk_cuts(self, n: int, is_b) -> list[int]:
        """Aligned cut points splitting ``n`` bits into near-equal class-0 leaves."""
        cap = self.capacities[0] * 8
        nleaves = max(1, -(-n // cap))
        cuts = [0]
        for k in range(1, nleaves):
            target = (n * k) // nleaves
            q = None
            for delta in range(cap):
                for c in (target - delta, target + delta):
                    if cuts[-1] < c < n and is_b(c):
                        q = c
                        break
                if q is not None:
                    break
            if q is not None and q not in cuts:
                cuts.append(q)
        cuts.append(n)
        return cuts

    def load_bits(self, buf: bytes, nbits: int) -> None:
        """Replace the content with ``nbits`` bits packed little-endian in ``buf``."""
        cuts = self._bulk_cuts(nbits, self.aligner.is_boundary)
        leaves = [self._make_leaf(_slice_bits(buf, a, b), b - a) for a, b in zip(cuts, cuts[1:])]
        self._build_from_leaves(leaves)

    def _build_from_leaves(self, leaves) -> None:
        if not leaves:
            leaves = [self._empty_leaf()]
        level = leaves
        vals = [self._entry_values(x, True) for x in level]
        depth = 0
        while len(level) > 1:
            m = self.max_entries
            count = -(-len(level) // m)
            nodes, nvals = [], []
            for k in range(count):
                a = len(level) * k // count
                b = len(level) * (k + 1) // count
                node = Node([v[0] for v in vals[a:b]], [v[1] for v in vals[a:b]], level[a:b])
                nodes.append(node)
                nvals.append((sum(node.b), sum(node.o)))
            level, vals = nodes, nvals
            depth += 1
        self.root = level[0]
        self.depth = depth
        self.total_bits, self.total_ones = vals[0]
        self._touch()

    # ---------------------------------------------------------- accounting

    def leaf_count(self) -> int:
        return sum(1 for _ in self.iter_leaves())

    def node_count(self) -> int:
        count = 0
        stack = [(self.root, self.depth)]
        while stack:
            node, d = stack.pop()
            if d:
                count += 1
                stack.extend((k, d - 1) for k in node.kids)
        return count

    def _sample_bytes(self, leaf) -> int:
        return 2 * len(leaf.samples.counts) if self.track_ones else 0

    def size_bytes(self) -> int:
        """Modelled memory: allocated leaf blocks, leaf samples, full internal nodes."""
        entry = self.ENTRY_BYTES_T if self.track_ones else self.ENTRY_BYTES_L
        internal = self.node_count() * (self.NODE_HEADER_BYTES + self.max_entries * entry)
        leaves = 0
        for leaf in self.iter_leaves():
            leaves += self.LEAF_HEADER_BYTES + self.capacities[leaf.cls] + self._sample_bytes(leaf)
        return internal + leaves

    # ------------------------------------------------------------- audit

    def audit(self) -> list[str]:
        """Full structural check; returns a list of violations (empty when sound)."""
        errors: list[str] = []
        leaf_depths = set()
        pos = 0

        def walk(node, d, start):
            nonlocal pos
            if d == 0:
                leaf_depths.add(self.depth)
                self._audit_leaf(node, start, errors)
                if start != pos:
                    errors.append(f"leaf at {start} does not follow previous leaf ending at {pos}")
                pos = start + node.n
                return node.n, self._leaf_ones(node)
            k = len(node.kids)
            if not (len(node.b) == len(node.o) == k):
                errors.append("entry arrays of an internal node differ in length")
            if node is self.root:
                if k < 2:
                    errors.append(f"internal root has {k} entries")
            elif not (self.min_entries <= k <= self.max_entries):
                errors.append(f"internal node at {start} has {k} entries outside [{self.min_entries}, {self.max_entries}]")
            if k > self.max_entries:
                errors.append(f"internal node at {start} overflows with {k} entries")
            tb = to = 0
            for i, kid in enumerate(node.kids):
                cb, co = walk(kid, d - 1, start + tb)
                if node.b[i] != cb:
                    errors.append(f"b-counter {node.b[i]} != {cb} under node at {start}, entry {i}")
                if node.o[i] != co:
                    errors.append(f"o-counter {node.o[i]} != {co} under node at {start}, entry {i}")
                tb += cb
                to += co
            return tb, to

        tb, to = walk(self.root, self.depth, 0)
        if tb != self.total_bits:
            errors.append(f"total_bits {self.total_bits} != {tb}")
        if to != self.total_ones:
            errors.append(f"total_ones {self.total_ones} != {to}")
        return errors

    def _audit_leaf(self, leaf, start: int, errors: list[str]) -> None:
        if not 0 <= leaf.cls <= self.expansions:
            errors.append(f"leaf at {start} has class {leaf.cls}")
        elif self._leaf_bytes(leaf) > self.capacities[leaf.cls]:
            errors.append(f"leaf at {start} exceeds class {leaf.cls} capacity")
        if leaf.bits >> leaf.n:
            errors.append(f"leaf at {start} has bits set beyond its size")
        if self.track_ones:
            expect = rebuild_samples(leaf.bits, leaf.n, self.sample_period).counts
            if leaf.samples.counts != expect:
                errors.append(f"rank samples of leaf at {start} are stale")
        if leaf.n and start and not self.aligner.is_boundary(start):
            errors.append(f"leaf at {start} starts inside a sibling group")

    # ------------------------------------------------------------ snapshots

    _HEADER = struct.Struct("<BBIBIHB")  # version, mode, B, e, period, max_entries, depth

    def save(self, out) -> None:
        out.write(
            self._HEADER.pack(
                SNAPSHOT_VERSION,
                self._mode_byte(),
                self.block_bytes,
                self.expansions,
                self.sample_period,
                self.max_entries,
                self.depth,
            )
        )
        stack = [(self.root, self.depth)]
        while stack:
            node, d = stack.pop()
            if d == 0:
                out.write(b"\x01")
                self._save_leaf(node, out)
            else:
                out.write(b"\x00")
                out.write(struct.pack("<H", len(node.kids)))
                for b, o in zip(node.b, node.o):
                    out.write(struct.pack("<QQ", b, o))
                for kid in reversed(node.kids):
                    stack.append((kid, d - 1))

    def _mode_byte(self) -> int:
        return 1 if self.track_ones else 0

    def _save_leaf(self, leaf, out) -> None:
        nbytes = (leaf.n + 7) >> 3
        out.write(struct.pack("<BI", leaf.cls, leaf.n))
        out.write(leaf.bits.to_bytes(nbytes, "little"))

    def _load_leaf(self, inp):
        cls, n = struct.unpack("<BI", _read(inp, 5))
        bits = int.from_bytes(_read(inp, (n + 7) >> 3), "little")
        leaf = self._make_leaf(bits, n)
        leaf.cls = cls
        return leaf

    @classmethod
    def load(cls, inp, aligner=None, **kwargs):
        version, mode, B, e, period, max_entries, depth = cls._HEADER.unpack(_read(inp, cls._HEADER.size))
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported block tree snapshot version {version}")
        tree = cls(
            block_bytes=B,
            expansions=e,
            sample_period=period,
            track_ones=bool(mode & 1),
            aligner=aligner,
            max_entries=max_entries,
            **kwargs,
        )

        def read_node(d):
            tag = _read(inp, 1)
            if tag == b"\x01":
                if d != 0:
                    raise ValueError("leaf found above the leaf level")
                return tree._load_leaf(inp)
            if d == 0:
                raise ValueError("internal node found at the leaf level")
            (k,) = struct.unpack("<H", _read(inp, 2))
            b, o = [], []
            for _ in range(k):
                x, y = struct.unpack("<QQ", _read(inp, 16))
                b.append(x)
                o.append(y)
            kids = [read_node(d - 1) for _ in range(k)]
            return Node(b, o, kids)

        tree.root = read_node(depth)
        tree.depth = depth
        if depth:
            tree.total_bits, tree.total_ones = sum(tree.root.b), sum(tree.root.o)
        else:
            tree.total_bits, tree.total_ones = tree._entry_values(tree.root, True)
        return tree

    def snapshot_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.save(buf)
        return buf.getvalue()


def _read(inp, n: int) -> bytes:
    data = inp.read(n)
    if len(data) != n:
        raise ValueError("truncated snapshot")
    return data


def _slice_bits(buf: bytes, start: int, stop: int) -> int:
    """Bits ``[start, stop)`` of a little-endian packed buffer, as an int."""
    if stop <= start:
        return 0
    lo = start >> 3
    hi = (stop + 7) >> 3
    return (int.from_bytes(buf[lo:hi], "little") >> (start & 7)) & _mask(stop - start)


def _concat_parts(parts):
    """Concatenate ``(bits, n)`` chunks by balanced pairwise merging."""
    if not parts:
        return 0, 0
    while len(parts) > 1:
        merged = []
        for k in range(0, len(parts) - 1, 2):
            (a, na), (b, nb) = parts[k], parts[k + 1]
            merged.append((a | (b << na), na + nb))
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def bits_to_bytes(bits: int, nbits: int) -> bytes:
    return bits.to_bytes((nbits + 7) >> 3, "little")
