import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dk2tree.codec import (
    MAX_INDEX,
    CodecError,
    RankSamples,
    block_rank1,
    etdc_decode,
    etdc_decode_all,
    etdc_encode,
    etdc_length,
    etdc_skip,
    rebuild_samples,
    refresh_samples,
)


def enumerate_codewords():
    """Codewords by length, then lexicographically: continuation bytes 0x00-0x7F, last byte 0x80-0xFF."""
    for length in itertools.count(1):
        heads = itertools.product(range(0x80), repeat=length - 1)
        for head in heads:
            for last in range(0x80, 0x100):
                yield bytes(head) + bytes([last])


def test_encode_matches_enumeration_across_first_two_classes():
    boundary = 128 + (1 << 14)
    for index, code in enumerate(itertools.islice(enumerate_codewords(), boundary + 300)):
        assert etdc_encode(index) == code


@pytest.mark.parametrize(
    "index, expected",
    [(0, b"\x80"), (127, b"\xff"), (128, b"\x00\x80"), (255, b"\x00\xff"), (256, b"\x01\x80")],
)
def test_encode_examples(index, expected):
    assert etdc_encode(index) == expected


@pytest.mark.parametrize(
    "data, offset, expected",
    [(b"\x80", 0, (0, 1)), (b"\x00\x80", 0, (128, 2)), (b"\xff\x00\x80", 1, (128, 2))],
)
def test_decode_examples(data, offset, expected):
    assert etdc_decode(data, offset) == expected


@pytest.mark.parametrize(
    "index, length",
    [(0, 1), (127, 1), (128, 2), (128 + (1 << 14) - 1, 2), (128 + (1 << 14), 3), (MAX_INDEX, 4)],
)
def test_length_classes(index, length):
    assert etdc_length(index) == length
    assert len(etdc_encode(index)) == length


def test_out_of_range_index():
    for bad in (-1, MAX_INDEX + 1):
        with pytest.raises(IndexError):
            etdc_encode(bad)
        with pytest.raises(IndexError):
            etdc_length(bad)


def test_corrupt_stream():
    with pytest.raises(CodecError):
        etdc_decode(b"\x00\x00\x00\x00\x80")
    with pytest.raises(CodecError):
        etdc_decode(b"\x00")


@given(st.integers(0, MAX_INDEX))
def test_roundtrip(i):
    code = etdc_encode(i)
    assert etdc_decode(code, 0) == (i, etdc_length(i))
    assert all(b < 0x80 for b in code[:-1]) and code[-1] >= 0x80


@given(st.lists(st.integers(0, MAX_INDEX), max_size=50))
def test_self_delimiting(seq):
    data = b"".join(etdc_encode(i) for i in seq)
    assert etdc_decode_all(data) == seq


@given(st.lists(st.integers(0, 20000), min_size=1, max_size=40), st.data())
def test_skip(seq, data):
    buf = b"".join(etdc_encode(i) for i in seq)
    k = data.draw(st.integers(0, len(seq) - 1))
    off = etdc_skip(buf, 0, k)
    assert etdc_decode(buf, off)[0] == seq[k]


@given(st.integers(0, MAX_INDEX - 1))
def test_length_monotone(i):
    assert etdc_length(i) <= etdc_length(i + 1)


def popcount_prefix(bits, pos):
    return sum((bits >> i) & 1 for i in range(pos))


def test_rank_examples():
    assert block_rank1(0b1011, 4, rebuild_samples(0b1011, 4, 2), 0) == 0
    ones = (1 << 256) - 1
    assert block_rank1(ones, 256, rebuild_samples(ones, 256, 64), 200) == 200
    r = random.Random(7)
    bits = r.getrandbits(512)
    samples = rebuild_samples(bits, 512, 128)
    assert block_rank1(bits, 512, samples, 300) == popcount_prefix(bits, 300)


def test_rank_out_of_range():
    with pytest.raises(IndexError):
        block_rank1(0, 10, rebuild_samples(0, 10, 4), 11)


def test_rebuild_samples_examples():
    assert rebuild_samples(0, 0, 64).counts == []
    ones = (1 << 128) - 1
    assert rebuild_samples(ones, 128, 64).counts == [64, 64]
    bits = random.Random(3).getrandbits(200)
    counts = rebuild_samples(bits, 200, 64).counts
    assert counts == [popcount_prefix(bits >> (64 * i), 64) for i in range(3)]


@given(st.integers(1, 700), st.integers(1, 100), st.data())
def test_rank_matches_linear_oracle(nbits, period, data):
    bits = data.draw(st.integers(0, (1 << nbits) - 1))
    samples = rebuild_samples(bits, nbits, period)
    for pos in sorted({0, nbits, *data.draw(st.lists(st.integers(0, nbits), max_size=10))}):
        assert block_rank1(bits, nbits, samples, pos) == popcount_prefix(bits, pos)


@given(st.integers(1, 400), st.integers(1, 64), st.data())
def test_rank_after_single_flip_and_sample_adjust(nbits, period, data):
    bits = data.draw(st.integers(0, (1 << nbits) - 1))
    samples = rebuild_samples(bits, nbits, period)
    p = data.draw(st.integers(0, nbits - 1))
    old = (bits >> p) & 1
    bits ^= 1 << p
    j = p // period
    if j < len(samples.counts):
        samples.counts[j] += -1 if old else 1
    for pos in range(nbits + 1):
        assert block_rank1(bits, nbits, samples, pos) == popcount_prefix(bits, pos)


@given(st.integers(1, 400), st.integers(1, 64), st.data())
def test_refresh_samples_matches_rebuild(nbits, period, data):
    bits = data.draw(st.integers(0, (1 << nbits) - 1))
    stale = RankSamples(period, [999] * (nbits // period))
    start = data.draw(st.integers(0, nbits))
    fresh = rebuild_samples(bits, nbits, period)
    stale.counts[: start // period] = fresh.counts[: start // period]
    refresh_samples(bits, nbits, stale, start)
    assert stale.counts == fresh.counts
