import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ppformer.encodings import (PackingPlan, WindowShape, pack_outputs, rowwise_encode, unpack_outputs,
                                window_decode, window_encode_left, window_encode_right)
from ppformer.fixed_ring import RingParams, RingTensor, ring_matmul
from ppformer.poly_ring import PolyParams, negacyclic_mul
from ppformer.toy_he import decrypt, encrypt, keygen


def window_product(x, w, shape, params, ring):
    z = negacyclic_mul(window_encode_left(x, shape, params), window_encode_right(w, shape, params))
    return window_decode(z, shape, ring)


def test_scalar_window():
    ring = RingParams(8, 0)
    params = PolyParams(4, 16, 8)
    shape = WindowShape(1, 1, 1)
    x, w = RingTensor(ring, np.array([[3]])), RingTensor(ring, np.array([[5]]))
    assert [int(c) for c in window_encode_left(x, shape, params).coeffs] == [3, 0, 0, 0]
    assert int(window_product(x, w, shape, params, ring).data[0, 0]) == 15


def test_window_layout(rng):
    ring = RingParams(5, 0)
    params = PolyParams(16, 16, 5)
    shape = WindowShape(2, 2, 2)
    for _ in range(50):
        x, w = RingTensor.random(ring, 2, 2, rng), RingTensor.random(ring, 2, 2, rng)
        assert window_product(x, w, shape, params, ring) == ring_matmul(x, w)
    xl = window_encode_left(RingTensor(ring, np.array([[1, 2], [3, 4]])), shape, params)
    assert [int(c) for c in xl.coeffs[:6]] == [2, 1, 0, 0, 4, 3]


def test_window_exhaustive_z16():
    ring = RingParams(4, 0)
    params = PolyParams(8, 16, 4)
    shape = WindowShape(2, 2, 2)
    # every entry value at every position, others drawn from a fixed pattern
    rng = np.random.default_rng(0)
    for pos, v in itertools.product(range(8), range(16)):
        a = rng.integers(0, 16, 8)
        a[pos] = v
        x, w = RingTensor(ring, a[:4].reshape(2, 2)), RingTensor(ring, a[4:].reshape(2, 2))
        assert window_product(x, w, shape, params, ring) == ring_matmul(x, w)


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**32))
def test_window_random_shapes(lk, lm, ln, seed):
    rng = np.random.default_rng(seed)
    shape = WindowShape(1 << lk, 1 << lm, 1 << ln)
    ring = RingParams(16, 0)
    params = PolyParams(max(1, shape.volume), 32, 16)
    x = RingTensor.random(ring, shape.k_w, shape.m_w, rng)
    w = RingTensor.random(ring, shape.m_w, shape.n_w, rng)
    assert window_product(x, w, shape, params, ring) == ring_matmul(x, w)


def test_window_too_large():
    with pytest.raises(ValueError):
        WindowShape(4, 4, 4).check(32)


def test_rowwise_encode():
    params = PolyParams(8, 16, 8)
    assert [int(c) for c in rowwise_encode([1, 2, 3], 3, params).coeffs] == [1, 2, 3, 0, 0, 0, 0, 0]
    assert [int(c) for c in rowwise_encode(range(8), 8, params).coeffs] == list(range(8))
    with pytest.raises(ValueError):
        rowwise_encode([1, 2], 3, params)


def test_packing_plan_counts():
    plan = PackingPlan(128, 768, 8192)
    assert plan.rows_per_ct == 10 and plan.ct_count == 13
    assert PackingPlan(5, 8, 8).ct_count == 5


def test_pack_two_rows(rng):
    params = PolyParams(8, 64, 8)
    ring = RingParams(8, 0)
    sk = keygen(params, seed=0)
    rows = rng.integers(0, 256, (2, 4))
    cts = [encrypt(rowwise_encode(r, 4, params), sk, rng) for r in rows]
    plan = PackingPlan(2, 4, 8)
    packed = pack_outputs(cts, plan)
    assert len(packed) == 1
    dec = [decrypt(c, sk) for c in packed]
    assert [int(c) for c in dec[0].coeffs] == list(rows[0]) + list(rows[1])
    assert np.array_equal(unpack_outputs(dec, plan, ring).data, rows.astype(np.uint64))


@given(st.integers(1, 9), st.sampled_from([1, 2, 3, 5, 8]), st.integers(0, 2**32))
def test_pack_roundtrip(k, n, seed):
    rng = np.random.default_rng(seed)
    params = PolyParams(8, 64, 8)
    ring = RingParams(8, 0)
    sk = keygen(params, seed=seed)
    rows = rng.integers(0, 256, (k, n))
    plan = PackingPlan(k, n, 8)
    packed = pack_outputs([encrypt(rowwise_encode(r, n, params), sk, rng) for r in rows], plan)
    assert len(packed) == -(-k // (8 // n))
    got = unpack_outputs([decrypt(c, sk) for c in packed], plan, ring)
    assert np.array_equal(got.data, rows.astype(np.uint64))
