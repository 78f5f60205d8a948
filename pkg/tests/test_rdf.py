import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dk2tree.rdf import TermDictionary, TripleStore, is_var, synchronized_lines
from dk2tree.schedule import DK2Config
from dk2tree.synth import random_triples

CFG = DK2Config(k_schedule="2", block_bytes=32, sample_t=32, sample_l=32)


def scan(triples, s=None, p=None, o=None):
    return sorted(t for t in triples if all(is_var(x) or x == y for x, y in zip((s, p, o), t)))


def bindings(triples, pattern):
    out = []
    for t in scan(triples, *pattern):
        b = {}
        for x, y in zip(pattern, t):
            if x is not None and is_var(x):
                b[x] = y
        out.append(b)
    return out


def join_oracle(triples, tp1, tp2, var):
    right: dict[str, list[dict]] = {}
    for b in bindings(triples, tp2):
        right.setdefault(b[var], []).append(b)
    rows = set()
    for b1 in bindings(triples, tp1):
        for b2 in right.get(b1[var], []):
            rows.add(tuple(sorted({**b1, **b2}.items())))
    return sorted(rows)


def all_strategies(store, tp1, tp2):
    results = {s: store.join(tp1, tp2, s) for s in ("indep", "chain", "inter")}
    assert results["indep"] == results["chain"] == results["inter"]
    return results["indep"]


def test_is_var():
    assert is_var(None) and is_var("?x") and not is_var("x")


def test_add_to_empty_store():
    store = TripleStore(CFG)
    assert store.add_triple("a", "p", "b")
    assert len(store.trees) == 1 and len(store.dictionary) == 2
    assert not store.add_triple("a", "p", "b")
    other = TripleStore(CFG)
    other.add_triple("a", "p", "a")
    assert len(other.dictionary) == 1


def test_simple_patterns():
    store = TripleStore(CFG)
    store.add_triple("a", "p", "b")
    assert store.match("a", "p", None) == [("a", "p", "b")]
    assert store.match("?s", "?p", "x") == []
    assert store.match("a", "zzz", "?o") == []


def test_delete():
    store = TripleStore(CFG)
    assert not store.delete_triple("a", "p", "b")
    store.add_triple("a", "p", "b")
    assert store.delete_triple("a", "p", "b")
    assert store.match() == [] and len(store) == 0 and len(store.dictionary) == 0
    assert store.audit() == []
    store.add_triple("c", "p", "d")
    assert store.match() == [("c", "p", "d")]


def test_growth_adds_rows_to_all_trees():
    store = TripleStore(CFG)
    for i in range(40):
        store.add_triple(f"s{i}", f"p{i % 3}", f"o{i}")
    sides = {t.schedule.side for t in store.trees}
    assert len(sides) == 1 and sides.pop() >= 80
    assert all(t.n_ids == store.n_ids for t in store.trees)
    assert store.audit() == []


def test_load_lines_and_errors():
    store = TripleStore(CFG)
    assert store.load_lines(["# comment\n", "a\tp\tb\n", "\n", "a\tp\tb\n", "b\tq\tc\n"]) == 2
    with pytest.raises(ValueError, match="line 2"):
        store.load_lines(["a\tp\tb", "broken line"])


def test_term_dictionary_roundtrip_and_reuse():
    d = TermDictionary()
    a, fresh = d.intern("x")
    assert fresh and d.term(a) == "x" and d.intern("x") == (a, False)
    d.refs[a] = 1
    d.release(a)
    with pytest.raises(KeyError):
        d.term(a)
    assert d.intern("y") == (a, True)


@pytest.fixture(scope="module")
def corpus():
    triples = random_triples(3000, 150, 6, seed=4)
    store = TripleStore(CFG)
    for t in triples:
        store.add_triple(*t)
    return store, sorted(triples)


def test_all_pattern_shapes(corpus):
    store, triples = corpus
    rng = random.Random(1)
    assert store.match() == triples
    for _ in range(30):
        s, p, o = rng.choice(triples)
        for pattern in [
            (s, p, o),
            (s, None, o),
            (s, p, None),
            (None, p, o),
            (s, None, None),
            (None, None, o),
            (None, p, None),
        ]:
            assert store.match(*pattern) == scan(triples, *pattern)
    assert store.match("e0", "p0", "nope") == []


def join_cases(triples, rng, count):
    terms = sorted({t[0] for t in triples} | {t[2] for t in triples})
    preds = sorted({t[1] for t in triples})
    for _ in range(count):
        o1, o2 = rng.choice(terms), rng.choice(terms)
        p1, p2 = rng.choice(preds), rng.choice(preds)
        shape = rng.choice(["ss", "so", "os", "oo"])
        tp1 = ("?v", p1, o1) if shape[0] == "s" else (o1, p1, "?v")
        tp2 = ("?v", p2, o2) if shape[1] == "s" else (o2, p2, "?v")
        yield tp1, tp2
        yield tp1, (tp2[0], "?p", tp2[2])


def test_joins_match_oracle(corpus):
    store, triples = corpus
    rng = random.Random(2)
    nonempty = 0
    for tp1, tp2 in join_cases(triples, rng, 60):
        got = all_strategies(store, tp1, tp2)
        assert got == join_oracle(triples, tp1, tp2, "?v")
        nonempty += bool(got)
    assert nonempty > 0


def test_subject_join_example():
    store = TripleStore(CFG)
    for s in ("n3", "n9"):
        store.add_triple(s, "likes", "x")
    for s in ("n9", "n12"):
        store.add_triple(s, "knows", "y")
    assert all_strategies(store, ("?v", "likes", "x"), ("?v", "knows", "y")) == [(("?v", "n9"),)]
    assert all_strategies(store, ("?v", "likes", "x"), ("?v", "knows", "absent")) == []
    assert all_strategies(store, ("?v", "likes", "x"), ("?v", "?p", "y")) == [(("?p", "knows"), ("?v", "n9"))]


def test_join_single_predicate_variable_reduces_to_bound():
    store = TripleStore(CFG)
    for s, o in [("a", "x"), ("b", "x"), ("a", "y")]:
        store.add_triple(s, "p", o)
    bound = all_strategies(store, ("?v", "p", "x"), ("?v", "p", "y"))
    free = all_strategies(store, ("?v", "p", "x"), ("?v", "?q", "y"))
    assert [tuple(kv for kv in row if kv[0] == "?v") for row in free] == bound


@pytest.mark.parametrize(
    "tp1, tp2",
    [
        (("?a", "p", "x"), ("?b", "p", "y")),
        (("?v", "p", "?v"), ("?v", "p", "y")),
        (("?v", "p"), ("?v", "p", "y")),
        (("?v", "?p", "x"), ("?v", "?p", "y")),
        (("?v", None, "x"), ("?v", "p", "y")),
    ],
)
def test_malformed_join_rejected(tp1, tp2):
    store = TripleStore(CFG)
    store.add_triple("a", "p", "x")
    with pytest.raises(ValueError):
        store.join(tp1, tp2)


def test_unknown_strategy_rejected():
    with pytest.raises(ValueError):
        TripleStore(CFG).join(("?v", "p", "x"), ("?v", "p", "y"), "fast")


def test_synchronized_lines_needs_shared_schedule():
    a = TripleStore(CFG)
    a.add_triple("s", "p", "o")
    b = TripleStore(DK2Config())
    b.add_triple("s", "p", "o")
    with pytest.raises(ValueError):
        synchronized_lines(a.trees[0], 0, True, b.trees[0], 0, True)


@given(
    st.lists(
        st.tuples(
            st.booleans(),
            st.sampled_from(["a", "b", "c", "d", "e"]),
            st.sampled_from(["p", "q"]),
            st.sampled_from(["a", "b", "c", "d", "e"]),
        ),
        max_size=60,
    )
)
def test_add_delete_mix_against_set_oracle(ops):
    store = TripleStore(CFG)
    truth = set()
    for add, s, p, o in ops:
        if add:
            assert store.add_triple(s, p, o) == ((s, p, o) not in truth)
            truth.add((s, p, o))
        else:
            assert store.delete_triple(s, p, o) == ((s, p, o) in truth)
            truth.discard((s, p, o))
    assert store.match() == sorted(truth)
    assert store.audit() == []
    live = {t[0] for t in truth} | {t[2] for t in truth}
    assert set(store.dictionary.ids) == live
    for term in live:
        assert store.dictionary.term(store.dictionary.lookup(term)) == term
    if truth:
        s, p, o = min(truth)
        assert all_strategies(store, ("?v", p, o), ("?v", "?x", o)) == join_oracle(
            sorted(truth), ("?v", p, o), ("?v", "?x", o), "?v"
        )
