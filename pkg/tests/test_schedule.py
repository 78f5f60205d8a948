import pytest
from hypothesis import given
from hypothesis import strategies as st

from dk2tree.schedule import DK2Config, KSchedule, compute_child


@pytest.mark.parametrize("level, expected", [(0, 2), (1, 1), (2, 1), (3, 2)])
def test_compute_child_worked_example(level, expected):
    sched = KSchedule.uniform(2, 16)
    assert sched.nlevels == 4
    assert compute_child(sched, 9, 6, level) == expected


@given(st.lists(st.integers(2, 5), min_size=1, max_size=5), st.data())
def test_child_offsets_reconstruct_the_cell(ks, data):
    sched = KSchedule(tuple(ks))
    r = data.draw(st.integers(0, sched.side - 1))
    c = data.draw(st.integers(0, sched.side - 1))
    rr = cc = 0
    for level, k in enumerate(ks):
        off = compute_child(sched, r, c, level)
        assert 0 <= off < k * k
        rr += (off // k) * sched.child_side[level]
        cc += (off % k) * sched.child_side[level]
    assert (rr, cc) == (r, c)


def test_hybrid_uses_four_on_top_then_two():
    sched = KSchedule.hybrid(1 << 20)
    assert sched.ks == (4,) * 5 + (2,) * 10
    assert sched.side == 1 << 20


def test_hybrid_small_matrix_stays_within_top_levels():
    assert KSchedule.hybrid(64).ks == (4, 4, 4)


def test_leaf_arity_appended():
    sched = KSchedule.hybrid(1 << 12, leaf_k=4)
    assert sched.ks[-1] == 4 and sched.side >= 1 << 12


@given(st.integers(1, 1 << 30), st.integers(2, 8))
def test_uniform_covers_side(n, k):
    sched = KSchedule.uniform(k, n)
    assert sched.side >= max(n, 2)
    assert sched.side // k < max(n, 2) or sched.nlevels == 1


def test_schedule_validation():
    with pytest.raises(ValueError):
        KSchedule(())
    with pytest.raises(ValueError):
        KSchedule((2, 1))


def test_from_spec_forms():
    assert KSchedule.from_spec("2", 16).ks == (2, 2, 2, 2)
    assert KSchedule.from_spec("4,4,2", 32).ks == (4, 4, 2)
    with pytest.raises(ValueError):
        KSchedule.from_spec("4,2", 100)
    with pytest.raises(ValueError):
        KSchedule.from_spec("x", 10)


def test_grown_prepends_root_arity():
    assert KSchedule((4, 2)).grown().ks == (4, 4, 2)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"vocab": "maybe"},
        {"block_bytes": 8},
        {"expansions": -1},
        {"sample_t": 0},
        {"kprime": 1},
        {"rebuild_ratio": 0.5},
        {"rebuild_every": 0},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        DK2Config(**kwargs)


def test_config_leaf_arity():
    assert DK2Config().leaf_k is None
    assert DK2Config(vocab="on").leaf_k == 4
    assert DK2Config(vocab="on", kprime=8).leaf_k == 8
