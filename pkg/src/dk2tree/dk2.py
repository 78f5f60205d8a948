"""The dynamic k2-tree: T and L bitmaps held in block trees, updated in place.

Level ``l`` of the conceptual tree is a run of ``k_l**2``-bit groups, one
group per 1 of level ``l - 1``. All levels but the last are concatenated in
the T-tree; the last level lives in the L-tree, which is either a plain bit
tree or a vocabulary-coded one. ``level_bits`` records each level's length so
that hybrid schedules can locate group boundaries.
"""

from __future__ import annotations

from bisect import bisect_right

from .blocktree import BlockTree, PathMemo, UnitAligner, bits_to_bytes
from .codec import block_rank1
from .navigate import K2Navigator, layout
from .schedule import DK2Config, KSchedule, compute_child
from .static import StaticK2Tree
from .vocab import MatrixVocabulary, VocabLTree


class _LevelAligner:
    """Group boundaries of the T sequence, read from the owning tree's level layout."""

    def __init__(self, owner: "DK2Tree"):
        self.owner = owner

    def is_boundary(self, p: int) -> bool:
        starts = self.owner._starts
        l = bisect_right(starts, p) - 1
        if l >= len(starts) - 1:
            return True
        return (p - starts[l]) % self.owner.schedule.groups[l] == 0


class DK2Tree(K2Navigator):
    """Dynamic binary relation over ids ``0 .. n_ids - 1``."""

    def __init__(self, n: int = 0, config: DK2Config | None = None, schedule: KSchedule | None = None):
        self.config = config if config is not None else DK2Config()
        self.config.validate()
        self.schedule = schedule if schedule is not None else self.config.schedule_for(max(n, 1))
        if n > self.schedule.side:
            raise ValueError(f"{n} ids do not fit a schedule of side {self.schedule.side}")
        self.n_ids = n
        self.free_ids: list[int] = []
        self._free_set: set[int] = set()
        self.level_bits = [0] * self.schedule.nlevels
        self._relayout()
        cfg = self.config
        self.T = BlockTree(
            block_bytes=cfg.block_bytes,
            expansions=cfg.expansions,
            sample_period=cfg.sample_t,
            track_ones=True,
            aligner=_LevelAligner(self),
        )
        self.L = self._new_l_tree()
        self.last_splices = 0

    def _new_l_tree(self):
        cfg = self.config
        g = self.schedule.groups[-1]
        if cfg.vocab == "off":
            return BlockTree(
                block_bytes=cfg.block_bytes,
                expansions=cfg.expansions,
                sample_period=cfg.sample_l,
                track_ones=False,
                aligner=UnitAligner(g),
            )
        return VocabLTree(
            g,
            MatrixVocabulary(tracked=cfg.vocab == "tracked"),
            block_bytes=cfg.block_bytes,
            expansions=cfg.expansions,
            sample_period=cfg.sample_l,
            rebuild_ratio=cfg.rebuild_ratio,
            rebuild_floor_bytes=cfg.rebuild_floor_bytes,
            rebuild_every=cfg.rebuild_every,
        )

    def _relayout(self) -> None:
        self._starts, self._ones_before = layout(self.level_bits, self.schedule.groups)

    # ---- navigator hooks

    def is_empty(self) -> bool:
        return self.level_bits[0] == 0

    def t_length(self) -> int:
        return self.T.total_bits

    def _layout(self):
        return self._starts, self._ones_before

    def _bitmaps(self) -> tuple[bytes, bytes]:
        return (
            bits_to_bytes(self.T.to_bits(), self.T.total_bits),
            bits_to_bytes(self.L.to_bits(), self.L.total_bits),
        )

    def _bit_ops(self):
        T, L = self.T, self.L
        mt, ml = PathMemo(), PathMemo()
        # the current leaf of each bitmap is cached in the closure; a query
        # never mutates, so the cache stays valid for the whole traversal
        tleaf = lleaf = None
        tlo = thi = tob = llo = lhi = 0

        def t_bit_rank(p):
            nonlocal tleaf, tlo, thi, tob
            if not tlo <= p < thi:
                tleaf, tlo, tob = T.find_leaf_star(p, mt)
                thi = tlo + tleaf.n
            q = p - tlo
            if not (tleaf.bits >> q) & 1:
                return 0
            return tob + block_rank1(tleaf.bits, tleaf.n, tleaf.samples, q + 1)

        if isinstance(L, VocabLTree):

            def l_access(p):
                return L.access_star(p, ml)

        else:

            def l_access(p):
                nonlocal lleaf, llo, lhi
                if not llo <= p < lhi:
                    lleaf, llo, _ = L.find_leaf_star(p, ml)
                    lhi = llo + lleaf.n
                return (lleaf.bits >> (p - llo)) & 1

        return t_bit_rank, l_access

    # ---- bit helpers over the global level layout (T then L)

    @property
    def last_level(self) -> int:
        return self.schedule.nlevels - 1

    def _child_base(self, level: int, rank: int) -> int:
        """Global start of the group spawned by the 1 of ``level`` with inclusive T rank ``rank``."""
        return self._starts[level + 1] + (rank - self._ones_before[level] - 1) * self.schedule.groups[level + 1]

    def _shift_layout(self, level: int, groups: int) -> None:
        """Account for ``groups`` groups added to (or removed from) ``level``."""
        g = self.schedule.groups[level]
        self.level_bits[level] += groups * g
        starts, ones_before = self._starts, self._ones_before
        for m in range(level + 1, len(starts)):
            starts[m] += groups * g
        if level:
            for m in range(level, len(ones_before)):
                ones_before[m] += groups

    def _insert_group(self, level: int, gpos: int, bits: int) -> int:
        """Splice a group; returns the T ones before it (0 for the last level)."""
        g = self.schedule.groups[level]
        # the layout must describe the post-splice sequence before the splice,
        # because leaf splits consult it for group boundaries
        self._shift_layout(level, 1)
        self.last_splices += 1
        if level == self.last_level:
            self.L.insert_bits(gpos - self._starts[level], bits, g)
            return 0
        return self.T.insert_bits(gpos, bits, g)

    def _remove_group(self, level: int, gpos: int) -> None:
        g = self.schedule.groups[level]
        self._shift_layout(level, -1)
        if level == self.last_level:
            self.L.remove_bits(gpos - self._starts[level], g)
        else:
            self.T.remove_bits(gpos, g)
        self.last_splices += 1

    def _read_group(self, level: int, gpos: int) -> int:
        g = self.schedule.groups[level]
        if level == self.last_level:
            return self.L.get_bits(gpos - self._starts[level], g)
        return self.T.get_bits(gpos, g)

    def _set_last(self, lpos: int, value: int) -> None:
        if isinstance(self.L, VocabLTree):
            self.L.set_bit(lpos, value)
        elif self.L.access(lpos) != value:
            self.L.flip(lpos)

    # ---- updates

    def set_cell(self, r: int, c: int) -> bool:
        """Make ``(r, c)`` a 1; returns False if it already was."""
        self._check_cell(r, c)
        self.last_splices = 0
        if self.is_empty():
            self._append_path(r, c, 0, 0)
            return True
        sched = self.schedule
        last = self.last_level
        T = self.T
        memo = PathMemo()
        base = 0
        for l in range(last):
            pos = base + compute_child(sched, r, c, l)
            rank = T.bit_rank(pos, memo)
            if not rank:
                T.flip(pos)
                self._append_path(r, c, l + 1, self._child_base(l, T.rank1(pos)))
                return True
            base = self._child_base(l, rank)
        lpos = base + compute_child(sched, r, c, last) - self._starts[last]
        if self.L.access(lpos):
            return False
        self._set_last(lpos, 1)
        return True

    def _append_path(self, r: int, c: int, level: int, gpos: int) -> None:
        """Splice fresh single-1 groups for ``level`` and every level below it."""
        sched = self.schedule
        last = self.last_level
        for l in range(level, last + 1):
            off = compute_child(sched, r, c, l)
            before = self._insert_group(l, gpos, 1 << off)
            if l < last:
                gpos = self._child_base(l, before + 1)

    def clear_cell(self, r: int, c: int) -> bool:
        """Make ``(r, c)`` a 0; returns False if it already was.

        Groups left all-zero are removed bottom-up together with the 1 that
        spawned them; clearing the last 1 empties the tree.
        """
        self._check_cell(r, c)
        self.last_splices = 0
        if self.is_empty():
            return False
        sched = self.schedule
        last = self.last_level
        T = self.T
        memo = PathMemo()
        bases = []
        base = 0
        for l in range(last):
            off = compute_child(sched, r, c, l)
            bases.append((base, off))
            rank = T.bit_rank(base + off, memo)
            if not rank:
                return False
            base = self._child_base(l, rank)
        off = compute_child(sched, r, c, last)
        bases.append((base, off))
        if not self.L.access(base + off - self._starts[last]):
            return False
        for l in range(last, -1, -1):
            base, off = bases[l]
            if self._read_group(l, base) != 1 << off:
                if l == last:
                    self._set_last(base + off - self._starts[last], 0)
                else:
                    T.flip(base + off)
                return True
            self._remove_group(l, base)
        return True

    def add_node(self) -> int:
        """Return a usable id: a freed one, the next unused one, or one gained by growing."""
        if self.free_ids:
            node = self.free_ids.pop()
            self._free_set.discard(node)
            return node
        if self.n_ids >= self.schedule.side:
            self._grow()
        self.n_ids += 1
        return self.n_ids - 1

    def _grow(self) -> None:
        """Add a level on top: the old root becomes the top-left child of a new root."""
        self.schedule = self.schedule.grown()
        empty = self.is_empty()
        self.level_bits = [0] + self.level_bits
        self._relayout()
        if not empty:
            self._insert_group(0, 0, 1)

    def remove_node(self, node: int) -> None:
        """Clear row and column ``node`` and put the id on the free list."""
        if not 0 <= node < self.n_ids or node in self._free_set:
            raise ValueError(f"node {node} is not in use")
        for c in self.row_successors(node):
            self.clear_cell(node, c)
        for r in self.col_predecessors(node):
            self.clear_cell(r, node)
        self.free_ids.append(node)
        self._free_set.add(node)

    def in_use(self, node: int) -> bool:
        return 0 <= node < self.n_ids and node not in self._free_set

    # ---- conversion

    @classmethod
    def from_static(cls, st: StaticK2Tree, config: DK2Config | None = None) -> "DK2Tree":
        """Partition the static bitmaps into blocks; the logical bits are kept exactly."""
        config = config if config is not None else DK2Config()
        if config.k_schedule != "hybrid" or config.kprime is not None:
            want = config.schedule_for(st.n_ids)
            if want != st.schedule:
                raise ValueError(f"schedule {st.schedule.spec()} does not match configured {want.spec()}")
        if config.vocab != "off" and config.leaf_k != st.schedule.ks[-1]:
            raise ValueError("vocabulary leaves need the static tree's last arity to equal kprime")
        tree = cls(st.n_ids, config, st.schedule)
        tree.level_bits = list(st.level_bits)
        tree._relayout()
        tree.T.load_bits(st.t_bytes, st.t_bits)
        if isinstance(tree.L, VocabLTree):
            g = st.schedule.groups[-1]
            bits = int.from_bytes(st.l_bytes, "little")
            mask = (1 << g) - 1
            tree.L.load_groups([(bits >> p) & mask for p in range(0, st.l_bits, g)])
        else:
            tree.L.load_bits(st.l_bytes, st.l_bits)
        return tree

    def to_static(self) -> StaticK2Tree:
        t_bytes, l_bytes = self._bitmaps()
        return StaticK2Tree(
            self.schedule, self.n_ids, t_bytes, self.T.total_bits, l_bytes, self.L.total_bits, self.level_bits
        )

    # ---- checks and accounting

    def level_ones(self) -> list[int]:
        """Number of 1s in each T level."""
        out = []
        for l in range(self.last_level):
            a, b = self._starts[l], self._starts[l] + self.level_bits[l]
            hi = self.T.rank1(b - 1) if b > 0 else 0
            lo = self.T.rank1(a - 1) if a > 0 else 0
            out.append(hi - lo)
        return out

    def structure_errors(self) -> list[str]:
        """Group-count identities linking consecutive levels."""
        errors = []
        groups = self.schedule.groups
        if sum(self.level_bits[:-1]) != self.T.total_bits:
            errors.append(f"T length {self.T.total_bits} != level sizes {self.level_bits[:-1]}")
        if self.level_bits[-1] != self.L.total_bits:
            errors.append(f"L length {self.L.total_bits} != last level size {self.level_bits[-1]}")
        if self.level_bits[0] not in (0, groups[0]):
            errors.append(f"root level holds {self.level_bits[0]} bits")
        if self.is_empty():
            if any(self.level_bits):
                errors.append("empty relation with non-empty levels")
            return errors
        for l, ones in enumerate(self.level_ones()):
            if ones * groups[l + 1] != self.level_bits[l + 1]:
                errors.append(f"level {l} has {ones} ones but level {l + 1} holds {self.level_bits[l + 1]} bits")
        return errors

    def audit(self) -> list[str]:
        return (
            [f"T: {e}" for e in self.T.audit()]
            + [f"L: {e}" for e in self.L.audit()]
            + self.structure_errors()
        )

    def ones(self) -> int:
        """Number of 1 cells."""
        if isinstance(self.L, VocabLTree):
            voc = self.L.vocab
            return sum(m.bit_count() * f for m, f in zip(voc.V, voc.F) if m is not None)
        return self.L.to_bits().bit_count()

    def mutation_work(self) -> int:
        return self.T.stats.mutation_work() + self.L.stats.mutation_work()

    def size_bytes(self) -> int:
        return self.T.size_bytes() + self.L.size_bytes() + 4 * len(self.free_ids) + 64

    def measure(self) -> dict:
        out = {
            "side": self.schedule.side,
            "levels": self.schedule.nlevels,
            "n_ids": self.n_ids,
            "t_bits": self.T.total_bits,
            "l_bits": self.L.total_bits,
            "t_bytes": self.T.size_bytes(),
            "l_bytes": self.L.size_bytes(),
            "t_leaves": self.T.leaf_count(),
            "l_leaves": self.L.leaf_count(),
            "t_depth": self.T.depth,
            "l_depth": self.L.depth,
            "total_bytes": self.size_bytes(),
        }
        if isinstance(self.L, VocabLTree):
            out["vocab_size"] = len(self.L.vocab)
            out["vocab_ratio"] = round(self.L.size_ratio(), 6)
            out["vocab_rebuilds"] = self.L.rebuilds
        return out
