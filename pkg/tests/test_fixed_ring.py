import numpy as np
import pytest
from hypothesis import given, strategies as st

from ppformer.fixed_ring import (RingParams, RingTensor, decode_real, encode_array, encode_real, from_signed,
                                 local_downcast, plain_truncate, ring_matmul, to_signed)


def test_encode_known_value():
    assert encode_real(-2.1, RingParams(32, 12)) == 2**32 - 8602


def test_decode_roundtrip_small():
    p = RingParams(32, 12)
    assert decode_real(encode_real(1.5, p), p) == 1.5
    assert decode_real(encode_real(-0.25, p), p) == -0.25


def test_params_validation():
    with pytest.raises(ValueError):
        RingParams(65, 10)
    with pytest.raises(ValueError):
        RingParams(16, 16)


def test_encode_overflow():
    with pytest.raises(OverflowError):
        encode_real(1e6, RingParams(16, 8))


@given(st.integers(1, 64), st.data())
def test_signed_roundtrip(ell, data):
    v = data.draw(st.lists(st.integers(-(1 << (ell - 1)), (1 << (ell - 1)) - 1), min_size=1, max_size=8))
    res = from_signed(v, ell)
    assert [int(x) for x in to_signed(res, ell)] == v


@given(st.floats(-1000, 1000, allow_nan=False), st.integers(4, 20))
def test_encode_is_floor(x, s):
    p = RingParams(48, s)
    r = encode_real(x, p)
    back = decode_real(r, p)
    assert back <= x < back + 2.0 ** -s


@given(st.integers(2, 64), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32))
def test_matmul_matches_bigint(ell, k, m, n, seed):
    rng = np.random.default_rng(seed)
    p = RingParams(ell, min(ell - 1, 8))
    a, b = RingTensor.random(p, k, m, rng), RingTensor.random(p, m, n, rng)
    got = ring_matmul(a, b)
    A = [[int(v) for v in row] for row in a.data]
    B = [[int(v) for v in row] for row in b.data]
    for i in range(k):
        for j in range(n):
            assert int(got.data[i, j]) == sum(A[i][t] * B[t][j] for t in range(m)) % (1 << ell)


@given(st.integers(0, 2**32))
def test_ring_add_sub_inverse(seed):
    rng = np.random.default_rng(seed)
    p = RingParams(64, 18)
    a, b = RingTensor.random(p, 3, 4, rng), RingTensor.random(p, 3, 4, rng)
    assert (a + b) - b == a
    assert -(-a) == a


def test_downcast_keeps_low_bits():
    p = RingParams(64, 12)
    t = RingTensor.from_real(np.array([[-3.5, 2.25]]), p)
    d = local_downcast(t, 32)
    assert d.params == RingParams(32, 12)
    np.testing.assert_array_equal(d.to_real(), [[-3.5, 2.25]])


def test_plain_truncate_is_arithmetic_shift():
    p = RingParams(32, 12)
    t = RingTensor(p, from_signed([[-4097, 4097]], 32))
    out = plain_truncate(t, 12)
    assert [int(v) for v in out.signed()[0]] == [-2, 1]


def test_encode_array_matches_scalar():
    p = RingParams(32, 12)
    vals = np.array([-2.1, 0.0, 3.3])
    assert [int(v) for v in encode_array(vals, p)[0]] == [encode_real(v, p) for v in vals]


def test_shape_mismatch():
    p = RingParams(16, 4)
    with pytest.raises(ValueError):
        RingTensor.zeros(p, 2, 2) + RingTensor.zeros(p, 2, 3)
