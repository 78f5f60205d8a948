"""End-Tagged Dense Code byte codewords and sampled in-block rank.

Codewords use 8-bit chunks. Every byte but the last has its high bit clear;
the last byte has it set, so a codeword stream is self-delimiting. Within one
length class the 7-bit payload digits count up lexicographically, most
significant digit first.

Bit blocks are plain Python ints with an explicit length: bit ``i`` of a
block is ``(bits >> i) & 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MAX_CODE_BYTES = 4

# first index of each length class: 0, 128, 128 + 2**14, 128 + 2**14 + 2**21
_CLASS_START = [0]
for _n in range(1, MAX_CODE_BYTES + 1):
    _CLASS_START.append(_CLASS_START[-1] + (1 << (7 * _n)))
MAX_INDEX = _CLASS_START[-1] - 1

# precomputed 1-byte and 2-byte codewords; these cover every realistic vocabulary
_SHORT_CODES = [bytes([0x80 | i]) for i in range(128)]


class CodecError(ValueError):
    """Raised for malformed codeword streams."""


def etdc_length(index: int) -> int:
    if index < 0 or index > MAX_INDEX:
        raise IndexError(f"index {index} outside the 4-byte ETDC range")
    if index < 128:
        return 1
    if index < _CLASS_START[2]:
        return 2
    if index < _CLASS_START[3]:
        return 3
    return 4


def etdc_encode(index: int) -> bytes:
    """Return the codeword for the ``index``-th most frequent symbol."""
    if 0 <= index < 128:
        return _SHORT_CODES[index]
    n = etdc_length(index)
    x = index - _CLASS_START[n - 1]
    out = bytearray(n)
    out[n - 1] = 0x80 | (x & 0x7F)
    x >>= 7
    for i in range(n - 2, -1, -1):
        out[i] = x & 0x7F
        x >>= 7
    return bytes(out)


def etdc_decode(data, offset: int = 0) -> tuple[int, int]:
    """Decode one codeword at ``offset``; returns ``(index, bytes consumed)``."""
    x = 0
    end = min(len(data), offset + MAX_CODE_BYTES)
    i = offset
    while i < end:
        byte = data[i]
        i += 1
        if byte & 0x80:
            n = i - offset
            return _CLASS_START[n - 1] + ((x << 7) | (byte & 0x7F)), n
        x = (x << 7) | byte
    raise CodecError(f"no terminating byte within {MAX_CODE_BYTES} bytes of offset {offset}")


def etdc_decode_all(data) -> list[int]:
    out = []
    pos = 0
    n = len(data)
    while pos < n:
        idx, used = etdc_decode(data, pos)
        out.append(idx)
        pos += used
    return out


def etdc_skip(data, offset: int, count: int) -> int:
    """Byte offset reached after skipping ``count`` codewords from ``offset``."""
    pos = offset
    for _ in range(count):
        while not data[pos] & 0x80:
            pos += 1
        pos += 1
    return pos


@dataclass(slots=True)
class RankSamples:
    """Per-slice popcounts of a bit block, one per full ``period`` bits."""

    period: int
    counts: list[int] = field(default_factory=list)


def rebuild_samples(bits: int, nbits: int, period: int) -> RankSamples:
    if period <= 0:
        raise ValueError("sample period must be positive")
    samples = RankSamples(period, [])
    refresh_samples(bits, nbits, samples, 0)
    return samples


def refresh_samples(bits: int, nbits: int, samples: RankSamples, start: int) -> None:
    """Recompute the samples covering bit ``start`` onward; earlier ones are kept."""
    period = samples.period
    counts = samples.counts
    j = min(start // period, len(counts))
    del counts[j:]
    mask = (1 << period) - 1
    x = bits >> (j * period)
    for _ in range(j, nbits // period):
        counts.append((x & mask).bit_count())
        x >>= period


def block_rank1(bits: int, nbits: int, samples: RankSamples, pos: int) -> int:
    """Number of 1s in ``bits[0, pos)``: summed samples plus one partial scan."""
    if pos < 0 or pos > nbits:
        raise IndexError(f"rank position {pos} outside block of {nbits} bits")
    period = samples.period
    j = pos // period
    start = j * period
    rest = pos - start
    total = sum(samples.counts[:j]) if j else 0
    if rest:
        total += ((bits >> start) & ((1 << rest) - 1)).bit_count()
    return total


def popcount_range(bits: int, start: int, stop: int) -> int:
    return ((bits >> start) & ((1 << (stop - start)) - 1)).bit_count()
