"""Dynamic k2-triples: one dynamic tree per predicate over a shared subject/object id space.

Patterns are ``(s, p, o)`` triples of strings where a string starting with
``?`` is a variable. Joins take two patterns sharing exactly one variable in
subject or object position; predicates may be bound or variable.
"""

from __future__ import annotations

from .dk2 import DK2Tree
from .schedule import DK2Config

STRATEGIES = ("indep", "chain", "inter")


def is_var(term) -> bool:
    return term is None or (isinstance(term, str) and term.startswith("?"))


class TermDictionary:
    """Terms <-> ids over one space shared by subjects and objects, plus predicate ids."""

    def __init__(self):
        self.ids: dict[str, int] = {}
        self.terms: list[str | None] = []
        self.refs: list[int] = []
        self.free: list[int] = []
        self.pred_ids: dict[str, int] = {}
        self.preds: list[str] = []

    def __len__(self) -> int:
        return len(self.ids)

    def lookup(self, term: str) -> int | None:
        return self.ids.get(term)

    def term(self, tid: int) -> str:
        t = self.terms[tid] if 0 <= tid < len(self.terms) else None
        if t is None:
            raise KeyError(f"id {tid} is not bound to a term")
        return t

    def intern(self, term: str) -> tuple[int, bool]:
        """Id of ``term``, allocating one if needed; returns ``(id, fresh)``."""
        tid = self.ids.get(term)
        if tid is not None:
            return tid, False
        if self.free:
            tid = self.free.pop()
            self.terms[tid] = term
        else:
            tid = len(self.terms)
            self.terms.append(term)
            self.refs.append(0)
        self.ids[term] = tid
        return tid, True

    def release(self, tid: int) -> None:
        del self.ids[self.terms[tid]]
        self.terms[tid] = None
        self.refs[tid] = 0
        self.free.append(tid)

    def predicate(self, name: str) -> int | None:
        return self.pred_ids.get(name)

    def intern_predicate(self, name: str) -> tuple[int, bool]:
        pid = self.pred_ids.get(name)
        if pid is not None:
            return pid, False
        pid = len(self.preds)
        self.preds.append(name)
        self.pred_ids[name] = pid
        return pid, True

    def audit(self) -> list[str]:
        errors = []
        for term, tid in self.ids.items():
            if self.terms[tid] != term:
                errors.append(f"term {term!r} maps to id {tid} which names {self.terms[tid]!r}")
        for tid, term in enumerate(self.terms):
            if term is None and tid not in self.free:
                errors.append(f"unbound id {tid} missing from the free list")
            if term is not None and self.refs[tid] <= 0:
                errors.append(f"live term {term!r} has reference count {self.refs[tid]}")
        return errors


class TripleStore:
    """Triples ``(s, p, o)`` stored as cell ``(id(s), id(o))`` of predicate ``p``'s tree."""

    def __init__(self, config: DK2Config | None = None):
        self.config = config if config is not None else DK2Config()
        self.dictionary = TermDictionary()
        self.trees: list[DK2Tree] = []
        self.n_ids = 0
        self.count = 0

    def __len__(self) -> int:
        return self.count

    # ---- updates

    def _new_tree(self) -> DK2Tree:
        if self.trees:
            tree = DK2Tree(self.n_ids, self.config, self.trees[0].schedule)
        else:
            tree = DK2Tree(self.n_ids, self.config)
        tree.free_ids = list(self.dictionary.free)
        tree._free_set = set(tree.free_ids)
        return tree

    def _node_id(self, term: str) -> int:
        tid, fresh = self.dictionary.intern(term)
        if fresh:
            if tid >= self.n_ids:
                self.n_ids = tid + 1
            for tree in self.trees:
                got = tree.add_node()
                if got != tid:
                    raise RuntimeError(f"tree allocated id {got}, dictionary allocated {tid}")
        return tid

    def add_triple(self, s: str, p: str, o: str) -> bool:
        sid = self._node_id(s)
        oid = self._node_id(o)
        pid, fresh = self.dictionary.intern_predicate(p)
        if fresh:
            self.trees.append(self._new_tree())
        if not self.trees[pid].set_cell(sid, oid):
            return False
        refs = self.dictionary.refs
        refs[sid] += 1
        refs[oid] += 1
        self.count += 1
        return True

    def delete_triple(self, s: str, p: str, o: str) -> bool:
        d = self.dictionary
        sid, oid, pid = d.lookup(s), d.lookup(o), d.predicate(p)
        if sid is None or oid is None or pid is None:
            return False
        if not self.trees[pid].clear_cell(sid, oid):
            return False
        self.count -= 1
        for tid in (sid, oid):
            d.refs[tid] -= 1
        for tid in {sid, oid}:
            if d.refs[tid] == 0:
                for tree in self.trees:
                    tree.remove_node(tid)
                d.release(tid)
        return True

    def load_lines(self, lines) -> int:
        """Add tab-separated ``subject predicate object`` lines; returns triples added."""
        added = 0
        for lineno, line in enumerate(lines, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise ValueError(f"line {lineno}: expected 3 tab-separated terms")
            added += self.add_triple(*parts)
        return added

    # ---- patterns

    def _resolve(self, term, kind: str):
        """Bound id, ``None`` for a variable, or ``False`` for an unknown term."""
        if is_var(term):
            return None
        tid = self.dictionary.predicate(term) if kind == "p" else self.dictionary.lookup(term)
        return False if tid is None else tid

    def match(self, s=None, p=None, o=None) -> list[tuple[str, str, str]]:
        """All stored triples matching the pattern, sorted."""
        sid, pid, oid = self._resolve(s, "s"), self._resolve(p, "p"), self._resolve(o, "o")
        if sid is False or pid is False or oid is False:
            return []
        d = self.dictionary
        out = [(d.term(r), d.preds[q], d.term(c)) for q, r, c in self._id_triples(sid, pid, oid)]
        out.sort()
        return out

    def _id_triples(self, sid, pid, oid):
        """``(pid, sid, oid)`` tuples for a resolved pattern."""
        pids = range(len(self.trees)) if pid is None else [pid]
        for q in pids:
            tree = self.trees[q]
            if sid is not None and oid is not None:
                if tree.get_cell(sid, oid):
                    yield q, sid, oid
            elif sid is not None:
                for c in tree.row_successors(sid):
                    yield q, sid, c
            elif oid is not None:
                for r in tree.col_predecessors(oid):
                    yield q, r, oid
            else:
                for r, c in tree.cells():
                    yield q, r, c

    # ---- joins

    def join(self, tp1, tp2, strategy: str = "indep") -> list[tuple[tuple[str, str], ...]]:
        """Distinct bindings of the two patterns' variables, as sorted ``(name, value)`` tuples."""
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown join strategy {strategy!r}; choose from {STRATEGIES}")
        spec = _JoinSpec(tp1, tp2)
        sides = [self._side(spec, i) for i in (0, 1)]
        if any(side is None for side in sides):
            return []
        if strategy == "indep":
            pairs = self._join_independent(sides)
        elif strategy == "chain":
            pairs = self._join_chain(sides)
        else:
            pairs = self._join_interactive(sides)
        d = self.dictionary
        rows = set()
        for v, p1, p2 in pairs:
            row = [(spec.var, d.term(v))]
            if spec.pvars[0]:
                row.append((spec.pvars[0], d.preds[p1]))
            if spec.pvars[1]:
                row.append((spec.pvars[1], d.preds[p2]))
            rows.add(tuple(sorted(row)))
        return sorted(rows)

    def join_independent(self, tp1, tp2):
        return self.join(tp1, tp2, "indep")

    def join_chain(self, tp1, tp2):
        return self.join(tp1, tp2, "chain")

    def join_interactive(self, tp1, tp2):
        return self.join(tp1, tp2, "inter")

    def _side(self, spec: "_JoinSpec", i: int):
        """``(predicate ids, bound id, var_is_subject)`` for one pattern, or None if it cannot match."""
        s, p, o = spec.patterns[i]
        var_is_subject = spec.var_pos[i] == 0
        bound = o if var_is_subject else s
        bid = self.dictionary.lookup(bound)
        if bid is None:
            return None
        if spec.pvars[i]:
            pids = list(range(len(self.trees)))
        else:
            pid = self.dictionary.predicate(p)
            if pid is None:
                return None
            pids = [pid]
        return pids, bid, var_is_subject

    def _line(self, tree: DK2Tree, bid: int, var_is_subject: bool) -> list[int]:
        return tree.col_predecessors(bid) if var_is_subject else tree.row_successors(bid)

    def _join_independent(self, sides):
        """Evaluate both patterns fully, then intersect on the join variable."""
        found = []
        for pids, bid, vs in sides:
            by_value: dict[int, list[int]] = {}
            for q in pids:
                for v in self._line(self.trees[q], bid, vs):
                    by_value.setdefault(v, []).append(q)
            found.append(by_value)
        out = []
        for v in sorted(found[0].keys() & found[1].keys()):
            for p1 in found[0][v]:
                for p2 in found[1][v]:
                    out.append((v, p1, p2))
        return out

    def _join_chain(self, sides):
        """Evaluate the first pattern, then probe the second with each candidate."""
        (pids1, b1, vs1), (pids2, b2, vs2) = sides
        out = []
        for p1 in pids1:
            for v in self._line(self.trees[p1], b1, vs1):
                for p2 in pids2:
                    r, c = (v, b2) if vs2 else (b2, v)
                    if self.trees[p2].get_cell(r, c):
                        out.append((v, p1, p2))
        return out

    def _join_interactive(self, sides):
        """Descend both trees together, keeping join-axis intervals present in both."""
        (pids1, b1, vs1), (pids2, b2, vs2) = sides
        out = []
        for p1 in pids1:
            for p2 in pids2:
                for v in synchronized_lines(self.trees[p1], b1, vs1, self.trees[p2], b2, vs2):
                    out.append((v, p1, p2))
        return out

    # ---- checks

    def audit(self) -> list[str]:
        errors = self.dictionary.audit()
        total = 0
        for q, tree in enumerate(self.trees):
            errors += [f"predicate {self.dictionary.preds[q]}: {e}" for e in tree.audit()]
            if tree.n_ids != self.n_ids:
                errors.append(f"predicate {q} tree has {tree.n_ids} ids, store has {self.n_ids}")
            total += tree.ones()
        if total != self.count:
            errors.append(f"trees hold {total} cells but the store counts {self.count} triples")
        return errors

    def measure(self) -> dict:
        return {
            "triples": self.count,
            "terms": len(self.dictionary),
            "predicates": len(self.trees),
            "n_ids": self.n_ids,
            "total_bytes": sum(t.size_bytes() for t in self.trees),
        }


class _JoinSpec:
    """Validated shape of a two-pattern join."""

    def __init__(self, tp1, tp2):
        self.patterns = (tuple(tp1), tuple(tp2))
        if any(len(tp) != 3 for tp in self.patterns):
            raise ValueError("patterns must have three positions")
        so_vars = [{t for t in (tp[0], tp[2]) if is_var(t)} for tp in self.patterns]
        for tp in self.patterns:
            if is_var(tp[0]) and is_var(tp[2]):
                raise ValueError(f"pattern {tp} must bind one of subject or object")
        common = so_vars[0] & so_vars[1]
        if len(common) != 1 or None in common:
            raise ValueError("patterns must share exactly one named subject/object variable")
        self.var = next(iter(common))
        self.var_pos = tuple(0 if tp[0] == self.var else 2 for tp in self.patterns)
        self.pvars = tuple(tp[1] if is_var(tp[1]) else None for tp in self.patterns)
        if any(tp[1] is None for tp in self.patterns):
            raise ValueError("predicate variables must be named")
        if self.pvars[0] and self.pvars[0] == self.pvars[1]:
            raise ValueError("a shared predicate variable would make a second join variable")
        if self.var in self.pvars:
            raise ValueError("the join variable cannot also be a predicate")


def _line_child(k: int, j: int, fixed_digit: int, var_is_subject: bool) -> int:
    return j * k + fixed_digit if var_is_subject else fixed_digit * k + j


def synchronized_lines(t1: DK2Tree, b1: int, vs1: bool, t2: DK2Tree, b2: int, vs2: bool) -> list[int]:
    """Ids ``v`` with a 1 on line ``b1`` of ``t1`` and line ``b2`` of ``t2``.

    ``vs`` says whether ``v`` is the row (subject) of its tree, the bound id
    being the column, or the other way round. Both trees must share a schedule.
    """
    if t1.schedule != t2.schedule:
        raise ValueError("synchronized descent needs trees with the same schedule")
    if t1.is_empty() or t2.is_empty():
        return []
    sched = t1.schedule
    last = sched.nlevels - 1
    ops = [t1._bit_ops(), t2._bit_ops()]
    lays = [t1._layout(), t2._layout()]
    tlens = [t1.t_length(), t2.t_length()]
    bounds, subj = (b1, b2), (vs1, vs2)
    frontier = [(0, 0, 0)]  # (v0, base in t1, base in t2)
    limit = min(t1.n_ids, t2.n_ids)
    out = []
    for l in range(sched.nlevels):
        k = sched.ks[l]
        s = sched.child_side[l]
        digits = [(b // s) % k for b in bounds]
        nxt = []
        firsts = None
        if l < last:
            g_next = sched.groups[l + 1]
            firsts = [st[l + 1] - (ob[l] + 1) * g_next for st, ob in lays]
        for v0, base1, base2 in frontier:
            for j in range(k):
                v = v0 + j * s
                if v >= limit:
                    break
                pos = [
                    base1 + _line_child(k, j, digits[0], subj[0]),
                    base2 + _line_child(k, j, digits[1], subj[1]),
                ]
                if l == last:
                    if ops[0][1](pos[0] - tlens[0]) and ops[1][1](pos[1] - tlens[1]):
                        out.append(v)
                    continue
                r1 = ops[0][0](pos[0])
                if not r1:
                    continue
                r2 = ops[1][0](pos[1])
                if not r2:
                    continue
                nxt.append((v, firsts[0] + r1 * g_next, firsts[1] + r2 * g_next))
        frontier = nxt
        if not frontier:
            break
    return out
