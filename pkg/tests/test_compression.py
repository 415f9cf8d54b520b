import math
from fractions import Fraction
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdp_sim.compression import (
    CodecError,
    CompressedGradient,
    aggregate_compressed,
    compress,
    decompress,
    kept_count,
)

vectors = st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40).map(np.array)
ratios = st.floats(0.01, 1.0)


def naive_topk(g, k):
    return sorted(sorted(range(len(g)), key=lambda i: (-abs(g[i]), i))[:k])


def test_compress_example():
    cg = compress(np.array([5.0, -1.0, 3.0, 0.0]), 0.5)
    assert cg.entries == [(0, 5.0), (2, 3.0)]
    assert cg.dim == 4


def test_compress_full_ratio_keeps_everything():
    g = np.array([0.1, -7.0, 0.0, 2.5])
    cg = compress(g, 1.0)
    assert cg.indices.tolist() == [0, 1, 2, 3]
    assert np.array_equal(cg.values, g)


def test_ties_go_to_lower_index():
    cg = compress(np.array([2.0, -2.0, 2.0]), 2 / 3)
    assert cg.indices.tolist() == [0, 1]


def test_kept_count_tolerates_float_noise():
    assert kept_count(0.7, 10) == 7
    assert kept_count(0.1, 30) == 3
    assert kept_count(0.7, 11) == 8
    assert kept_count(1e-9, 5) == 1


def test_decompress_examples():
    cg = CompressedGradient(4, np.array([0, 2]), np.array([5.0, 3.0]))
    assert decompress(cg).tolist() == [5.0, 0.0, 3.0, 0.0]
    empty = CompressedGradient(3, np.array([], dtype=np.int64), np.array([]))
    assert decompress(empty).tolist() == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("idx", [[1, 1], [2, 1], [0, 4], [-1, 2]])
def test_decompress_rejects_malformed(idx):
    cg = CompressedGradient(4, np.array(idx), np.array([1.0, 2.0]))
    with pytest.raises(CodecError):
        decompress(cg)


@given(vectors, ratios)
def test_topk_laws(g, c):
    cg = compress(g, c)
    k = kept_count(c, g.size)
    assert len(cg) == k == max(1, math.ceil(round(c * g.size, 9)))
    assert cg.indices.tolist() == naive_topk(g.tolist(), k)
    assert np.array_equal(cg.values, g[cg.indices])
    dense = decompress(cg)
    assert np.linalg.norm(dense) <= np.linalg.norm(g)
    dropped = np.delete(g, cg.indices)
    if np.any(dropped != 0):
        # strict only in exact arithmetic; floats can absorb tiny coordinates
        exact = lambda v: sum(Fraction(float(x)) ** 2 for x in v)
        assert exact(dense) < exact(g)


@given(vectors)
def test_roundtrip_at_full_ratio_is_bitwise(g):
    assert np.array_equal(decompress(compress(g, 1.0)), g)


def test_aggregate_examples():
    a = compress(np.array([1.0, -4.0, 2.0]), 2 / 3)
    np.testing.assert_array_equal(aggregate_compressed([a, a]), 2 * decompress(a))
    np.testing.assert_array_equal(aggregate_compressed([a]), decompress(a))


def test_aggregate_matches_dense_sum_in_order():
    rng = np.random.default_rng(0)
    vs = [rng.normal(size=9) for _ in range(3)]
    expected = np.zeros(9)
    for v in vs:
        expected = expected + v
    got = aggregate_compressed([compress(v, 1.0) for v in vs])
    assert np.array_equal(got, expected)


def test_aggregate_dim_mismatch():
    with pytest.raises(CodecError):
        aggregate_compressed([compress(np.ones(3), 1.0), compress(np.ones(4), 1.0)])
    with pytest.raises(CodecError):
        aggregate_compressed([])


def test_wire_format_layout():
    cg = compress(np.array([5.0, -1.0, 3.0, 0.0]), 0.5)
    blob = cg.to_bytes()
    assert blob == struct.pack("<II", 4, 2) + struct.pack("<Id", 0, 5.0) + struct.pack("<Id", 2, 3.0)
    assert len(blob) == cg.nbytes() == 8 + 2 * 12


@given(vectors, ratios)
def test_wire_roundtrip(g, c):
    cg = compress(g, c)
    back, end = CompressedGradient.from_bytes(cg.to_bytes())
    assert end == cg.nbytes()
    assert back == cg


def test_wire_rejects_truncated_and_malformed():
    blob = compress(np.arange(4.0), 1.0).to_bytes()
    with pytest.raises(CodecError):
        CompressedGradient.from_bytes(blob[:-3])
    with pytest.raises(CodecError):
        CompressedGradient.from_bytes(b"\x01")
    bad = struct.pack("<II", 2, 2) + struct.pack("<Id", 1, 1.0) + struct.pack("<Id", 1, 2.0)
    with pytest.raises(CodecError):
        CompressedGradient.from_bytes(bad)
