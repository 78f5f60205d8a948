import io
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dk2tree.blocktree import BlockTree, UnitAligner
from dk2tree.codec import etdc_length
from dk2tree.vocab import MatrixVocabulary, VocabLTree

G = 16  # 4x4 submatrices, row-major bits


def matrix(*cells):
    """Bitmask of a 4x4 submatrix from (row, col) pairs."""
    return sum(1 << (4 * r + c) for r, c in cells)


def small_tree(**kw):
    kw.setdefault("block_bytes", 8)
    kw.setdefault("sample_period", 3)
    kw.setdefault("max_entries", 4)
    return VocabLTree(G, MatrixVocabulary(tracked=kw.pop("tracked", True)), **kw)


def sorted_freqs_oracle(vltree):
    counts: dict[int, int] = {}
    for m in groups_of(vltree):
        counts[m] = counts.get(m, 0) + 1
    return sorted(counts.values(), reverse=True)


def groups_of(vltree):
    bits = vltree.to_bits()
    return [(bits >> p) & 0xFFFF for p in range(0, vltree.total_bits, G)]


def test_worked_example_position_21():
    a, b = matrix((0, 0)), matrix((3, 3))
    old = matrix((1, 2), (1, 3))  # rows 0000 / 0011 / 0000 / 0000
    new = matrix((1, 1), (1, 2), (1, 3))  # rows 0000 / 0111 / 0000 / 0000
    t = small_tree(block_bytes=64, rebuild_floor_bytes=1 << 30)
    # creation order fixes the codes: a=0, b=1, old=2, new=3
    for pos, m in [(0, a), (16, b), (16, old), (48, old), (64, new), (80, a)]:
        t.insert_group(pos, m)
    voc = t.vocab
    assert [voc.lookup(m) for m in (a, b, old, new)] == [0, 1, 2, 3]
    assert voc.F[2] == 2 and voc.F[3] == 1
    # position 21 is in the second codeword, bit 5 of its submatrix (row 1, col 1)
    assert t.codes()[1] == 2
    assert 21 // G == 1 and 21 % G == 5
    assert t.access_bit(21) == 0
    assert t.set_bit(21, 1)
    assert voc.F[2] == 1 and voc.F[3] == 2
    assert t.codes()[1] == 3
    assert t.access_bit(21) == 1
    assert t.audit() == []


def test_single_matrix_bit_zero():
    t = small_tree()
    t.insert_group(0, 1)
    assert t.access_bit(0) == 1 and t.access_bit(1) == 0


def test_first_and_repeated_insert():
    t = small_tree()
    t.insert_group(0, 0x8001)
    assert len(t.vocab) == 1 and t.vocab.F == [1] and t.codes() == [0]
    t.insert_group(16, 0x8001)
    assert len(t.vocab) == 1 and t.vocab.F == [2]


def test_insert_then_remove_frees_code():
    t = small_tree()
    t.insert_group(0, 0x0F0F)
    assert t.remove_group(0) == 0x0F0F
    assert t.total_bits == 0 and t.vocab.empty == [0] and t.vocab.F == [0]
    assert t.audit() == []
    t.insert_group(0, 0x1234)
    assert t.codes() == [0] and t.vocab.empty == []


def test_remove_one_of_two():
    t = small_tree()
    t.insert_group(0, 7)
    t.insert_group(0, 7)
    t.remove_group(16)
    assert t.vocab.F == [1]


def test_set_bit_same_value_is_noop():
    t = small_tree()
    t.insert_group(0, 0b101)
    assert not t.set_bit(0, 1)
    assert not t.set_bit(1, 0)
    assert t.vocab.F == [1]


def test_precondition_errors():
    t = small_tree()
    with pytest.raises(ValueError):
        t.insert_group(0, 0)
    with pytest.raises(IndexError):
        t.insert_group(3, 1)
    t.insert_group(0, 1)
    with pytest.raises(ValueError):
        t.set_bit(0, 0)
    with pytest.raises(IndexError):
        t.remove_group(16)
    with pytest.raises(IndexError):
        t.access_bit(16)
    with pytest.raises(ValueError):
        t.get_bits(1, G)
    with pytest.raises(TypeError):
        t.rank1(0)
    with pytest.raises(ValueError):
        t.vocab.bump_freq(5)
    with pytest.raises(ValueError):
        t.vocab.drop_freq(5)


@pytest.mark.parametrize("tracked", [True, False])
def test_random_groups_against_plain_tree(tracked):
    rng = random.Random(17 + tracked)
    pool = [rng.randrange(1, 1 << 16) for _ in range(300)]
    t = small_tree(block_bytes=16, tracked=tracked, rebuild_floor_bytes=0, rebuild_every=500)
    plain = BlockTree(block_bytes=16, sample_period=16, track_ones=False, aligner=UnitAligner(G), max_entries=4)
    count = 0
    for step in range(10_000):
        x = rng.random()
        if x < 0.6 or count == 0:
            p = rng.randint(0, count) * G
            m = rng.choice(pool[: 20 + step // 40])
            t.insert_group(p, m)
            plain.insert_bits(p, m, G)
            count += 1
        elif x < 0.85:
            p = rng.randrange(count) * G
            assert t.remove_group(p) == plain.remove_bits(p, G)
            count -= 1
        else:
            p = rng.randrange(count * G)
            old = plain.get_bits(p - p % G, G)
            bit = 1 << (p % G)
            if old & ~bit:
                value = rng.randint(0, 1)
                t.set_bit(p, value)
                if ((old >> (p % G)) & 1) != value:
                    plain.flip(p)
        assert sum(t.vocab.F) == count
        if step % 500 == 0:
            assert t.audit() == []
            assert t.to_bits() == plain.to_bits()
            for p in rng.sample(range(count * G), min(50, count * G)):
                assert t.access_bit(p) == plain.access(p)
    assert t.audit() == []
    assert t.to_bits() == plain.to_bits()
    assert t.rebuilds > 0


def test_bump_reorders_optimal_position():
    v = MatrixVocabulary()
    c0, c1 = v.code_for(0xA), v.code_for(0xB)
    for code in (c0, c0, c1):
        v.bump_freq(code)
    assert v.optimal_order() == [c0, c1]
    v.bump_freq(c1)
    v.bump_freq(c1)
    assert v.optimal_order()[0] == c1
    assert v.audit() == []


def test_bump_then_drop_keeps_frequency_classes():
    v = MatrixVocabulary()
    codes = [v.code_for(m) for m in range(1, 6)]
    for i, c in enumerate(codes):
        for _ in range(i + 1):
            v.bump_freq(c)
    before = [v.F[c] for c in v.optimal_order()]
    v.bump_freq(codes[2])
    v.drop_freq(codes[2])
    assert [v.F[c] for c in v.optimal_order()] == before
    assert v.audit() == []


def test_single_code_bookkeeping():
    v = MatrixVocabulary()
    c = v.code_for(3)
    v.bump_freq(c)
    assert v.VP == [0] and v.VP_inv == [0] and v.Top[0] == 1
    assert v.size_ratio() == 1.0


@given(st.lists(st.tuples(st.booleans(), st.integers(1, 40)), max_size=300))
def test_sort_oracle_after_any_frequency_updates(ops):
    v = MatrixVocabulary()
    truth: dict[int, int] = {}
    for up, m in ops:
        if up:
            v.bump_freq(v.code_for(m))
            truth[m] = truth.get(m, 0) + 1
        elif truth.get(m):
            v.drop_freq(v.lookup(m))
            truth[m] -= 1
            if not truth[m]:
                del truth[m]
    assert v.audit() == []
    n = len(v.V)
    assert [v.VP_inv[v.VP[c]] for c in range(n)] == list(range(n))
    assert [v.F[c] for c in v.optimal_order()] == sorted(truth.values(), reverse=True)
    for m, f in truth.items():
        assert v.F[v.lookup(m)] == f
    want_opt = sum(f * etdc_length(i) for i, f in enumerate(sorted(truth.values(), reverse=True)))
    assert v.optimal_bytes() == want_opt


def test_ratio_one_within_single_length_class():
    v = MatrixVocabulary()
    for m in range(1, 50):
        c = v.code_for(m)
        for _ in range(m % 7 + 1):
            v.bump_freq(c)
    assert v.size_ratio() == 1.0


def test_ratio_after_inversion_across_length_boundary():
    v = MatrixVocabulary()
    codes = [v.code_for(m) for m in range(1, 130)]  # codes 0..127 take 1 byte, code 128 takes 2
    for c in codes:
        v.bump_freq(c)
    hot = codes[128]
    for _ in range(99):
        v.bump_freq(hot)
    current = 128 * 1 + 100 * 2
    optimal = 100 * 1 + 127 * 1 + 1 * 2
    assert v.cur_bytes == current and v.optimal_bytes() == optimal
    assert v.size_ratio() == current / optimal > 1


def test_rebuild_restores_ratio_and_drops_free_codes():
    t = small_tree(block_bytes=64, rebuild_floor_bytes=1 << 30)
    for m in range(1, 140):
        t.insert_group(t.total_bits, m)
    for _ in range(60):
        t.insert_group(0, 139)
    t.remove_group(16 * 70)
    bits = t.to_bits()
    assert t.size_ratio() > 1
    assert t.vocab.empty
    t.rebuild()
    assert t.size_ratio() == 1.0
    assert t.vocab.cur_bytes == t.vocab.optimal_bytes()
    assert t.vocab.empty == [] and None not in t.vocab.V
    assert t.vocab.VP == list(range(len(t.vocab.V)))
    assert t.to_bits() == bits and t.audit() == []
    assert t.codes().count(0) == 61


def test_rebuild_without_updates_is_identity():
    t = small_tree()
    t.load_groups([5, 5, 9, 5, 1])
    bits, codes = t.to_bits(), t.codes()
    t.rebuild()
    assert t.to_bits() == bits and t.codes() == codes
    assert t.codes() == [0, 0, 2, 0, 1]  # equal frequencies ordered by matrix value


def test_automatic_rebuild_bounds_ratio():
    t = small_tree(block_bytes=64, rebuild_floor_bytes=0, rebuild_ratio=1.05)
    for m in range(1, 140):
        t.insert_group(t.total_bits, m)
    for _ in range(200):
        t.insert_group(0, 139)
        assert t.size_ratio() <= 1.05
    assert t.rebuilds >= 1 and t.audit() == []


def test_untracked_rebuilds_every_n_updates():
    t = small_tree(tracked=False, rebuild_every=10)
    for i in range(25):
        t.insert_group(0, i % 4 + 1)
    assert t.rebuilds == 2


def test_dump_lists_optimal_order():
    v = MatrixVocabulary()
    for m, f in [(1, 1), (2, 3)]:
        c = v.code_for(m)
        for _ in range(f):
            v.bump_freq(c)
    lines = v.dump().splitlines()
    assert lines[1].split("\t")[:3] == ["0", "1", "3"]


@pytest.mark.parametrize("tracked", [True, False])
def test_snapshot_roundtrip(tracked):
    rng = random.Random(6)
    t = small_tree(tracked=tracked, rebuild_floor_bytes=1 << 30)
    for _ in range(400):
        t.insert_group(rng.randint(0, t.total_bits // G) * G, rng.randrange(1, 50))
    for _ in range(100):
        t.remove_group(rng.randrange(t.total_bits // G) * G)
    data = t.snapshot_bytes()
    u = VocabLTree.load(io.BytesIO(data))
    assert u.audit() == [] and u.to_bits() == t.to_bits()
    assert u.snapshot_bytes() == data
    assert u.vocab.F == t.vocab.F and u.vocab.empty == t.vocab.empty
