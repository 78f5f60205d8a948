"""Vocabulary-coded last level: leaves hold ETDC codewords naming k'xk' submatrices.

A :class:`MatrixVocabulary` maps submatrices (as ``k'**2``-bit ints) to code
indices and keeps their frequencies. With tracking on, it also keeps the
permutation between current and frequency-optimal code order plus the
per-frequency boundary array, so the cost of the current codes relative to
an optimal reassignment is known at every moment in O(1).
"""

from __future__ import annotations

import io
import struct

from .blocktree import BlockTree, UnitAligner, _concat_parts, _read
from .codec import etdc_decode, etdc_encode, etdc_length, etdc_skip


class MatrixVocabulary:
    """Submatrix dictionary with frequencies and optional optimal-order tracking.

    ``H`` maps matrix -> current code, ``V[code]`` is the matrix (``None`` for
    a free code), ``F[code]`` its frequency. With tracking, ``VP[code]`` is
    the optimal position of a code, ``VP_inv`` the inverse, and ``Top[f]``
    the number of codes with frequency greater than ``f`` -- equivalently the
    first optimal position whose frequency is at most ``f``.
    """

    def __init__(self, tracked: bool = True):
        self.tracked = tracked
        self.H: dict[int, int] = {}
        self.V: list[int | None] = []
        self.F: list[int] = []
        self.empty: list[int] = []
        self.VP: list[int] = []
        self.VP_inv: list[int] = []
        self.Top: list[int] = [0]
        self.cur_bytes = 0
        self.opt_bytes = 0

    def __len__(self) -> int:
        return len(self.H)

    def lookup(self, matrix: int) -> int | None:
        return self.H.get(matrix)

    def code_for(self, matrix: int) -> int:
        """Code of ``matrix``, adding it with frequency 0 if it is new."""
        code = self.H.get(matrix)
        if code is not None:
            return code
        if self.empty:
            code = self.empty.pop()
        else:
            code = len(self.V)
            self.V.append(None)
            self.F.append(0)
            if self.tracked:
                self.VP.append(len(self.VP_inv))
                self.VP_inv.append(code)
        self.V[code] = matrix
        self.H[matrix] = code
        return code

    def matrix(self, code: int) -> int:
        m = self.V[code] if 0 <= code < len(self.V) else None
        if m is None:
            raise ValueError(f"code {code} is not active")
        return m

    def _swap(self, a: int, b: int) -> None:
        if a == b:
            return
        ca, cb = self.VP_inv[a], self.VP_inv[b]
        self.VP_inv[a], self.VP_inv[b] = cb, ca
        self.VP[ca], self.VP[cb] = b, a

    def bump_freq(self, code: int) -> None:
        if not 0 <= code < len(self.V) or self.V[code] is None:
            raise ValueError(f"code {code} is not active")
        f = self.F[code]
        if self.tracked:
            top = self.Top
            if len(top) <= f + 1:
                top.extend([0] * (f + 2 - len(top)))
            t = top[f]
            self._swap(self.VP[code], t)
            top[f] = t + 1
            self.opt_bytes += etdc_length(t)
        self.F[code] = f + 1
        self.cur_bytes += etdc_length(code)

    def drop_freq(self, code: int) -> None:
        if not 0 <= code < len(self.V) or self.V[code] is None or self.F[code] == 0:
            raise ValueError(f"code {code} is not active")
        f = self.F[code]
        if self.tracked:
            t = self.Top[f - 1] - 1
            self._swap(self.VP[code], t)
            self.Top[f - 1] = t
            self.opt_bytes -= etdc_length(t)
        self.F[code] = f - 1
        self.cur_bytes -= etdc_length(code)
        if f == 1:
            del self.H[self.V[code]]
            self.V[code] = None
            self.empty.append(code)

    def optimal_bytes(self) -> int:
        if self.tracked:
            return self.opt_bytes
        freqs = sorted((f for f in self.F if f), reverse=True)
        return sum(f * etdc_length(i) for i, f in enumerate(freqs))

    def size_ratio(self) -> float:
        opt = self.optimal_bytes()
        if not opt:
            return 1.0
        return self.cur_bytes / opt

    def optimal_order(self) -> list[int]:
        """Active codes by descending frequency; ties keep the previous optimal order."""
        if self.tracked:
            return self.VP_inv[: self.Top[0]]
        active = [c for c, f in enumerate(self.F) if f]
        active.sort(key=lambda c: -self.F[c])
        return active

    def reassign(self) -> dict[int, int]:
        """Renumber codes densely in optimal order; returns old -> new code."""
        order = self.optimal_order()
        remap = {old: new for new, old in enumerate(order)}
        self.V = [self.V[c] for c in order]
        self.F = [self.F[c] for c in order]
        self.H = {m: i for i, m in enumerate(self.V)}
        self.empty = []
        self._reset_order()
        return remap

    def _reset_order(self) -> None:
        n = len(self.V)
        self.cur_bytes = sum(f * etdc_length(i) for i, f in enumerate(self.F))
        if self.tracked:
            self.VP = list(range(n))
            self.VP_inv = list(range(n))
            maxf = max(self.F, default=0)
            top = [0] * (maxf + 2)
            for f in self.F:
                # Top[x] counts codes with frequency > x
                if f:
                    top[f - 1] += 1
            for x in range(maxf - 1, -1, -1):
                top[x] += top[x + 1]
            self.Top = top
            self.opt_bytes = self.cur_bytes
        else:
            self.opt_bytes = 0

    def load_frequencies(self, counts: dict[int, int]) -> dict[int, int]:
        """Start from known matrix frequencies with optimal codes; returns matrix -> code."""
        items = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        self.V = [m for m, _ in items]
        self.F = [f for _, f in items]
        self.H = {m: i for i, m in enumerate(self.V)}
        self.empty = []
        self._reset_order()
        return dict(self.H)

    def audit(self) -> list[str]:
        errors = []
        for code, m in enumerate(self.V):
            if m is None:
                if self.F[code] != 0:
                    errors.append(f"free code {code} has frequency {self.F[code]}")
                if code not in self.empty:
                    errors.append(f"free code {code} missing from the empty list")
            else:
                if self.H.get(m) != code:
                    errors.append(f"hash entry of code {code} does not point back")
                if self.F[code] <= 0:
                    errors.append(f"active code {code} has frequency {self.F[code]}")
        if len(self.H) + len(self.empty) != len(self.V):
            errors.append("hash table and empty list do not partition the codes")
        cur = sum(f * etdc_length(i) for i, f in enumerate(self.F))
        if cur != self.cur_bytes:
            errors.append(f"current byte total {self.cur_bytes} != {cur}")
        if self.tracked:
            n = len(self.V)
            if sorted(self.VP) != list(range(n)) or any(self.VP_inv[self.VP[c]] != c for c in range(n)):
                errors.append("VP and VP_inv are not inverse permutations")
            opt_f = [self.F[self.VP_inv[o]] for o in range(n)]
            if any(opt_f[i] < opt_f[i + 1] for i in range(n - 1)):
                errors.append("frequencies in optimal order are not non-increasing")
            for f in range(len(self.Top)):
                want = sum(1 for x in self.F if x > f)
                if self.Top[f] != want:
                    errors.append(f"Top[{f}] = {self.Top[f]}, expected {want}")
                    break
            opt = sum(f * etdc_length(i) for i, f in enumerate(opt_f))
            if opt != self.opt_bytes:
                errors.append(f"optimal byte total {self.opt_bytes} != {opt}")
        return errors

    def dump(self) -> str:
        """Vocabulary listing in optimal order, for debugging."""
        order = self.optimal_order()
        lines = ["opt\tcode\tfreq\tmatrix"]
        for pos, code in enumerate(order):
            lines.append(f"{pos}\t{code}\t{self.F[code]}\t{self.V[code]:#x}")
        return "\n".join(lines)

    # ---- snapshot

    def save(self, out) -> None:
        n = len(self.V)
        out.write(struct.pack("<BI", int(self.tracked), n))
        for code in range(n):
            m = self.V[code]
            out.write(struct.pack("<BQI", m is not None, m or 0, self.F[code]))
        out.write(struct.pack("<I", len(self.empty)))
        out.write(b"".join(struct.pack("<I", c) for c in self.empty))
        if self.tracked:
            out.write(b"".join(struct.pack("<I", x) for x in self.VP))
            out.write(struct.pack("<I", len(self.Top)))
            out.write(b"".join(struct.pack("<I", x) for x in self.Top))

    @classmethod
    def load(cls, inp) -> "MatrixVocabulary":
        tracked, n = struct.unpack("<BI", _read(inp, 5))
        voc = cls(bool(tracked))
        for code in range(n):
            active, m, f = struct.unpack("<BQI", _read(inp, 13))
            voc.V.append(m if active else None)
            voc.F.append(f)
            if active:
                voc.H[m] = code
        (ne,) = struct.unpack("<I", _read(inp, 4))
        voc.empty = list(struct.unpack(f"<{ne}I", _read(inp, 4 * ne)))
        voc.cur_bytes = sum(f * etdc_length(i) for i, f in enumerate(voc.F))
        if voc.tracked:
            voc.VP = list(struct.unpack(f"<{n}I", _read(inp, 4 * n)))
            voc.VP_inv = [0] * n
            for c, o in enumerate(voc.VP):
                voc.VP_inv[o] = c
            (nt,) = struct.unpack("<I", _read(inp, 4))
            voc.Top = list(struct.unpack(f"<{nt}I", _read(inp, 4 * nt)))
            voc.opt_bytes = sum(voc.F[voc.VP_inv[o]] * etdc_length(o) for o in range(n))
        return voc

    def size_bytes(self, matrix_bits: int) -> int:
        """Modelled memory of the vocabulary arrays and hash table."""
        n = len(self.V)
        slots = 1
        while slots * 7 < len(self.H) * 10:
            slots *= 2
        total = slots * ((matrix_bits + 7) // 8 + 4) + 8 * n + 4 * len(self.empty)
        if self.tracked:
            total += 8 * n + 4 * len(self.Top)
        return total


class CodeLeaf:
    __slots__ = ("data", "n", "cls", "samples")

    def __init__(self, data: bytearray, n: int, cls: int = 0, samples=None):
        self.data = data
        self.n = n
        self.cls = cls
        self.samples = samples if samples is not None else []


class VocabLTree(BlockTree):
    """L-tree whose leaves store codewords; counters still count logical bits.

    Leaf size classes and splits are measured in payload bytes, while entry
    ``b`` counters stay in logical bits (``k'**2`` per codeword). Each leaf
    samples the byte offset of every ``sample_period``-th codeword.
    """

    def __init__(
        self,
        group_bits: int,
        vocab: MatrixVocabulary | None = None,
        block_bytes: int = 512,
        expansions: int = 3,
        sample_period: int = 128,
        track_ones: bool = False,
        aligner=None,
        max_entries: int | None = None,
        rebuild_ratio: float = 1.2,
        rebuild_floor_bytes: int = 100 * 1024,
        rebuild_every: int = 1 << 20,
    ):
        self.g = group_bits
        self.vocab = vocab if vocab is not None else MatrixVocabulary()
        self.rebuild_ratio = rebuild_ratio
        self.rebuild_floor_bytes = rebuild_floor_bytes
        self.rebuild_every = rebuild_every
        self.updates = 0
        self.rebuilds = 0
        super().__init__(
            block_bytes=block_bytes,
            expansions=expansions,
            sample_period=sample_period,
            track_ones=False,
            aligner=UnitAligner(group_bits),
            max_entries=max_entries,
        )

    # ---- leaf hooks

    def _empty_leaf(self):
        return CodeLeaf(bytearray(), 0, 0, [])

    def _code_samples(self, data) -> list[int]:
        out = []
        period = self.sample_period
        pos = 0
        idx = 0
        end = len(data)
        while pos < end:
            if idx % period == 0:
                out.append(pos)
            while not data[pos] & 0x80:
                pos += 1
            pos += 1
            idx += 1
        return out

    def _make_code_leaf(self, data: bytearray, n: int):
        leaf = CodeLeaf(data, n, 0, self._code_samples(data))
        leaf.cls = self._class_for(len(data))
        return leaf

    def _leaf_bytes(self, leaf) -> int:
        return len(leaf.data)

    def _leaf_ones(self, leaf) -> int:
        return 0

    def _offset(self, leaf, j: int) -> int:
        """Byte offset of the ``j``-th codeword of a leaf."""
        if j * self.g >= leaf.n:
            return len(leaf.data)
        s = j // self.sample_period
        return etdc_skip(leaf.data, leaf.samples[s], j - s * self.sample_period)

    def _cut(self, leaf, q: int):
        off = self._offset(leaf, q // self.g)
        return (
            self._make_code_leaf(leaf.data[:off], q),
            self._make_code_leaf(leaf.data[off:], leaf.n - q),
        )

    def _concat(self, a, b):
        return self._make_code_leaf(a.data + b.data, a.n + b.n)

    def _split_point(self, leaf, b_start: int) -> int:
        half = len(leaf.data) // 2
        data = leaf.data
        pos = 0
        j = 0
        best_j, best_d = 1, None
        while pos < len(data):
            if j:
                d = abs(pos - half)
                if best_d is None or d < best_d:
                    best_j, best_d = j, d
            while not data[pos] & 0x80:
                pos += 1
            pos += 1
            j += 1
        return best_j * self.g

    def _first_group_end(self, leaf, b_start: int) -> int:
        return self.g

    def _last_group_start(self, leaf, b_start: int) -> int:
        return leaf.n - self.g

    def _sample_bytes(self, leaf) -> int:
        return 2 * len(leaf.samples)

    # ---- locating codewords

    def _locate(self, p: int, memo=None):
        if memo is None:
            leaf, bb, _ = self.find_leaf(p)
        else:
            leaf, bb, _ = self.find_leaf_star(p, memo)
        q = p - bb
        off = self._offset(leaf, q // self.g)
        return leaf, q, off

    def access(self, p: int) -> int:
        leaf, q, off = self._locate(p)
        code, _ = etdc_decode(leaf.data, off)
        return (self.vocab.V[code] >> (q % self.g)) & 1

    def access_star(self, p: int, memo) -> int:
        leaf, q, off = self._locate(p, memo)
        code, _ = etdc_decode(leaf.data, off)
        return (self.vocab.V[code] >> (q % self.g)) & 1

    def access_bit(self, p: int) -> int:
        return self.access(p)

    def get_bits(self, p: int, g: int) -> int:
        if g != self.g or p % self.g:
            raise ValueError("vocabulary leaves are read one whole submatrix at a time")
        leaf, _, off = self._locate(p)
        code, _ = etdc_decode(leaf.data, off)
        return self.vocab.V[code]

    def rank1(self, p: int) -> int:
        raise TypeError("the vocabulary-coded L-tree does not support rank")

    def codes(self) -> list[int]:
        out = []
        for leaf in self.iter_leaves():
            pos = 0
            data = leaf.data
            while pos < len(data):
                code, used = etdc_decode(data, pos)
                out.append(code)
                pos += used
        return out

    def to_bits(self) -> int:
        V = self.vocab.V
        bits, _ = _concat_parts([(V[code], self.g) for code in self.codes()])
        return bits

    # ---- updates

    def _updated(self) -> None:
        self.updates += 1
        voc = self.vocab
        if voc.tracked:
            if voc.cur_bytes >= self.rebuild_floor_bytes and voc.size_ratio() > self.rebuild_ratio:
                self.rebuild()
        elif self.updates % self.rebuild_every == 0:
            self.rebuild()

    def _splice_done(self, path, leaf, bb, db: int) -> None:
        leaf.samples = self._code_samples(leaf.data)
        leaf.n += db
        for node, i in path:
            node.b[i] += db
        self.total_bits += db
        st = self.stats
        st.splices += 1
        st.counter_updates += len(path)
        st.words_written += (len(leaf.data) >> 3) + 1
        self._touch()

    def insert_group(self, p: int, matrix: int) -> None:
        if matrix == 0:
            raise ValueError("the all-zero submatrix is never stored")
        if p < 0 or p > self.total_bits or p % self.g:
            raise IndexError(f"insert position {p} is not a group boundary in [0, {self.total_bits}]")
        path, leaf, bb, _ = self._descend(p)
        q = p - bb
        off = self._offset(leaf, q // self.g)
        code = self.vocab.code_for(matrix)
        self.vocab.bump_freq(code)
        leaf.data[off:off] = etdc_encode(code)
        self._splice_done(path, leaf, bb, self.g)
        self._after_grow(path, leaf, bb)
        self._updated()

    def remove_group(self, p: int) -> int:
        if p < 0 or p + self.g > self.total_bits or p % self.g:
            raise IndexError(f"remove position {p} is not a stored group")
        path, leaf, bb, _ = self._descend(p)
        q = p - bb
        off = self._offset(leaf, q // self.g)
        code, used = etdc_decode(leaf.data, off)
        matrix = self.vocab.V[code]
        del leaf.data[off : off + used]
        self.vocab.drop_freq(code)
        self._splice_done(path, leaf, bb, -self.g)
        self._after_shrink(path, leaf, bb)
        self._updated()
        return matrix

    def set_bit(self, p: int, value: int) -> bool:
        """Set logical bit ``p``; returns whether anything changed."""
        self._check(p)
        path, leaf, bb, _ = self._descend(p)
        q = p - bb
        off = self._offset(leaf, q // self.g)
        code, used = etdc_decode(leaf.data, off)
        old = self.vocab.V[code]
        bit = 1 << (q % self.g)
        new = (old | bit) if value else (old & ~bit)
        if new == old:
            return False
        if new == 0:
            raise ValueError("clearing the last 1 of a submatrix must remove the group")
        self.vocab.drop_freq(code)
        ncode = self.vocab.code_for(new)
        self.vocab.bump_freq(ncode)
        leaf.data[off : off + used] = etdc_encode(ncode)
        self._splice_done(path, leaf, bb, 0)
        self.stats.splices -= 1
        self.stats.flips += 1
        size = len(leaf.data)
        if size > self.capacities[leaf.cls]:
            self._after_grow(path, leaf, bb)
        elif size < self.min_leaf_bytes:
            self._after_shrink(path, leaf, bb)
        self._updated()
        return True

    # uniform interface used by the dynamic tree
    def insert_bits(self, p: int, bits: int, g: int) -> None:
        if g != self.g:
            raise ValueError(f"group size {g} != submatrix size {self.g}")
        self.insert_group(p, bits)

    def remove_bits(self, p: int, g: int) -> int:
        if g != self.g:
            raise ValueError(f"group size {g} != submatrix size {self.g}")
        return self.remove_group(p)

    def flip(self, p: int) -> int:
        new = self.access(p) ^ 1
        self.set_bit(p, new)
        return new

    # ---- bulk

    def load_groups(self, matrices) -> None:
        """Replace the content with ``matrices``, assigning optimal codes."""
        counts: dict[int, int] = {}
        for m in matrices:
            if m == 0:
                raise ValueError("the all-zero submatrix is never stored")
            counts[m] = counts.get(m, 0) + 1
        code_of = self.vocab.load_frequencies(counts)
        self._build_from_codes([code_of[m] for m in matrices])

    def _build_from_codes(self, codes) -> None:
        cap = self.capacities[0]
        leaves = []
        data = bytearray()
        count = 0
        for code in codes:
            cw = etdc_encode(code)
            if len(data) + len(cw) > cap:
                leaves.append(self._make_code_leaf(data, count * self.g))
                data = bytearray()
                count = 0
            data += cw
            count += 1
        if count or not leaves:
            leaves.append(self._make_code_leaf(data, count * self.g))
        # keep the tail leaf above the underflow threshold where possible
        if len(leaves) > 1 and len(leaves[-1].data) < self.min_leaf_bytes:
            a, b = leaves[-2], leaves[-1]
            both = self._concat(a, b)
            if len(both.data) <= self.capacities[-1]:
                leaves[-2:] = [both]
            else:
                leaves[-2:] = list(self._cut(both, self._split_point(both, 0)))
        self._build_from_leaves(leaves)

    def rebuild(self) -> None:
        """Reassign optimal codes and rewrite every leaf left to right."""
        old = self.codes()
        remap = self.vocab.reassign()
        self._build_from_codes([remap[c] for c in old])
        self.rebuilds += 1

    def size_ratio(self) -> float:
        return self.vocab.size_ratio()

    def size_bytes(self) -> int:
        return super().size_bytes() + self.vocab.size_bytes(self.g)

    # ---- audit and snapshot

    def _audit_leaf(self, leaf, start: int, errors: list[str]) -> None:
        if not 0 <= leaf.cls <= self.expansions:
            errors.append(f"code leaf at {start} has class {leaf.cls}")
        elif len(leaf.data) > self.capacities[leaf.cls]:
            errors.append(f"code leaf at {start} exceeds class {leaf.cls} capacity")
        pos, count = 0, 0
        while pos < len(leaf.data):
            code, used = etdc_decode(leaf.data, pos)
            if code >= len(self.vocab.V) or self.vocab.V[code] is None:
                errors.append(f"code leaf at {start} references inactive code {code}")
            pos += used
            count += 1
        if count * self.g != leaf.n:
            errors.append(f"code leaf at {start}: {count} codes but logical size {leaf.n}")
        if leaf.samples != self._code_samples(leaf.data):
            errors.append(f"code samples of leaf at {start} are stale")
        if start % self.g:
            errors.append(f"code leaf at {start} is not group aligned")

    def audit(self) -> list[str]:
        errors = super().audit() + self.vocab.audit()
        freq: dict[int, int] = {}
        for code in self.codes():
            freq[code] = freq.get(code, 0) + 1
        for code, f in enumerate(self.vocab.F):
            if freq.get(code, 0) != f:
                errors.append(f"code {code} occurs {freq.get(code, 0)} times but F says {f}")
                break
        return errors

    def _mode_byte(self) -> int:
        return 2

    def _save_leaf(self, leaf, out) -> None:
        out.write(struct.pack("<BII", leaf.cls, leaf.n, len(leaf.data)))
        out.write(bytes(leaf.data))

    def _load_leaf(self, inp):
        cls, n, size = struct.unpack("<BII", _read(inp, 9))
        leaf = self._make_code_leaf(bytearray(_read(inp, size)), n)
        leaf.cls = cls
        return leaf

    def save(self, out) -> None:
        out.write(struct.pack("<I", self.g))
        self.vocab.save(out)
        super().save(out)

    @classmethod
    def load(cls, inp, **kwargs):
        (g,) = struct.unpack("<I", _read(inp, 4))
        vocab = MatrixVocabulary.load(inp)
        kwargs.pop("aligner", None)
        tree = BlockTree.load.__func__(cls, inp, group_bits=g, vocab=vocab, **kwargs)
        return tree

    def snapshot_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.save(buf)
        return buf.getvalue()
