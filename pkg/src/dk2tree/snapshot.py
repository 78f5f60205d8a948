"""Binary snapshots for static trees, dynamic trees and triple stores.

Layout (all integers little-endian)::

    magic "DK2S" | format version u8 | kind u8 (1 static, 2 dynamic, 3 store) | body

Static body: schedule, logical side, level sizes, then the T and L bitmaps.
Dynamic body: config as JSON, schedule, id count, free ids, level sizes, then
the T block tree and the L block tree (plain or vocabulary-coded), each as a
preorder node dump. Store body: config, counters, the term dictionary, and one
dynamic body per predicate. Saving a loaded snapshot reproduces it byte for byte.
"""

from __future__ import annotations

import dataclasses
import io
import json
import struct

from .blocktree import BlockTree, _read
from .dk2 import DK2Tree, _LevelAligner
from .rdf import TermDictionary, TripleStore
from .schedule import DK2Config, KSchedule
from .static import StaticK2Tree
from .vocab import VocabLTree

MAGIC = b"DK2S"
FORMAT_VERSION = 1
KIND_STATIC, KIND_DYNAMIC, KIND_STORE = 1, 2, 3


class SnapshotError(ValueError):
    """Malformed or unsupported snapshot data."""


def _u32(out, x: int) -> None:
    out.write(struct.pack("<I", x))


def _u64(out, x: int) -> None:
    out.write(struct.pack("<Q", x))


def _r32(inp) -> int:
    return struct.unpack("<I", _read(inp, 4))[0]


def _r64(inp) -> int:
    return struct.unpack("<Q", _read(inp, 8))[0]


def _str(out, s: str) -> None:
    data = s.encode("utf-8")
    _u32(out, len(data))
    out.write(data)


def _rstr(inp) -> str:
    return _read(inp, _r32(inp)).decode("utf-8")


def _ints(out, xs, wide: bool = False) -> None:
    _u32(out, len(xs))
    fmt = "Q" if wide else "I"
    out.write(struct.pack(f"<{len(xs)}{fmt}", *xs))


def _rints(inp, wide: bool = False) -> list[int]:
    n = _r32(inp)
    size = 8 if wide else 4
    return list(struct.unpack(f"<{n}{'Q' if wide else 'I'}", _read(inp, n * size)))


def _config(out, cfg: DK2Config) -> None:
    _str(out, json.dumps(dataclasses.asdict(cfg), sort_keys=True))


def _rconfig(inp) -> DK2Config:
    return DK2Config(**json.loads(_rstr(inp)))


# ---- bodies


def _write_static(out, st: StaticK2Tree) -> None:
    _ints(out, st.schedule.ks)
    _u64(out, st.n_ids)
    _ints(out, st.level_bits, wide=True)
    _u64(out, st.t_bits)
    out.write(st.t_bytes)
    _u64(out, st.l_bits)
    out.write(st.l_bytes)


def _read_static(inp) -> StaticK2Tree:
    sched = KSchedule(tuple(_rints(inp)))
    n = _r64(inp)
    level_bits = _rints(inp, wide=True)
    t_bits = _r64(inp)
    t_bytes = _read(inp, (t_bits + 7) >> 3)
    l_bits = _r64(inp)
    l_bytes = _read(inp, (l_bits + 7) >> 3)
    return StaticK2Tree(sched, n, t_bytes, t_bits, l_bytes, l_bits, level_bits)


def _write_dynamic(out, tree: DK2Tree, with_config: bool = True) -> None:
    if with_config:
        _config(out, tree.config)
    _ints(out, tree.schedule.ks)
    _u64(out, tree.n_ids)
    _ints(out, tree.free_ids)
    _ints(out, tree.level_bits, wide=True)
    tree.T.save(out)
    if isinstance(tree.L, VocabLTree):
        _u32(out, tree.L.updates)
    tree.L.save(out)


def _read_dynamic(inp, config: DK2Config | None = None) -> DK2Tree:
    cfg = config if config is not None else _rconfig(inp)
    sched = KSchedule(tuple(_rints(inp)))
    n = _r64(inp)
    tree = DK2Tree(n, cfg, sched)
    tree.free_ids = _rints(inp)
    tree._free_set = set(tree.free_ids)
    tree.level_bits = _rints(inp, wide=True)
    if len(tree.level_bits) != sched.nlevels:
        raise SnapshotError("level sizes do not match the schedule")
    tree._relayout()
    tree.T = BlockTree.load(inp, aligner=_LevelAligner(tree))
    if cfg.vocab != "off":
        updates = _r32(inp)
        tree.L = VocabLTree.load(
            inp,
            rebuild_ratio=cfg.rebuild_ratio,
            rebuild_floor_bytes=cfg.rebuild_floor_bytes,
            rebuild_every=cfg.rebuild_every,
        )
        tree.L.updates = updates
    else:
        tree.L = BlockTree.load(inp, aligner=tree.L.aligner)
    return tree


def _write_store(out, store: TripleStore) -> None:
    _config(out, store.config)
    d = store.dictionary
    _u64(out, store.n_ids)
    _u64(out, store.count)
    _u32(out, len(d.terms))
    for term, refs in zip(d.terms, d.refs):
        out.write(b"\x01" if term is not None else b"\x00")
        if term is not None:
            _str(out, term)
        _u32(out, refs)
    _ints(out, d.free)
    _u32(out, len(d.preds))
    for name in d.preds:
        _str(out, name)
    for tree in store.trees:
        _write_dynamic(out, tree, with_config=False)


def _read_store(inp) -> TripleStore:
    cfg = _rconfig(inp)
    store = TripleStore(cfg)
    store.n_ids = _r64(inp)
    store.count = _r64(inp)
    d = TermDictionary()
    for tid in range(_r32(inp)):
        live = _read(inp, 1) == b"\x01"
        term = _rstr(inp) if live else None
        d.terms.append(term)
        d.refs.append(_r32(inp))
        if term is not None:
            d.ids[term] = tid
    d.free = _rints(inp)
    for pid in range(_r32(inp)):
        name = _rstr(inp)
        d.preds.append(name)
        d.pred_ids[name] = pid
    store.dictionary = d
    store.trees = [_read_dynamic(inp, cfg) for _ in d.preds]
    return store


# ---- public entry points


def dumps(obj) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)
    if isinstance(obj, StaticK2Tree):
        out.write(bytes([FORMAT_VERSION, KIND_STATIC]))
        _write_static(out, obj)
    elif isinstance(obj, DK2Tree):
        out.write(bytes([FORMAT_VERSION, KIND_DYNAMIC]))
        _write_dynamic(out, obj)
    elif isinstance(obj, TripleStore):
        out.write(bytes([FORMAT_VERSION, KIND_STORE]))
        _write_store(out, obj)
    else:
        raise TypeError(f"cannot snapshot {type(obj).__name__}")
    return out.getvalue()


def loads(data: bytes):
    inp = io.BytesIO(data)
    try:
        if _read(inp, 4) != MAGIC:
            raise SnapshotError("not a dk2tree snapshot")
        version, kind = _read(inp, 2)
        if version != FORMAT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        if kind == KIND_STATIC:
            obj = _read_static(inp)
        elif kind == KIND_DYNAMIC:
            obj = _read_dynamic(inp)
        elif kind == KIND_STORE:
            obj = _read_store(inp)
        else:
            raise SnapshotError(f"unknown snapshot kind {kind}")
    except SnapshotError:
        raise
    except (ValueError, KeyError, TypeError, struct.error, UnicodeDecodeError) as exc:
        raise SnapshotError(f"corrupt snapshot: {exc}") from exc
    if inp.read(1):
        raise SnapshotError("trailing bytes after snapshot")
    return obj


def save(obj, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(obj))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
