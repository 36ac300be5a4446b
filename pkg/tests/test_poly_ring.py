import numpy as np
import pytest
from hypothesis import given, strategies as st

from ppformer.poly_ring import Poly, PolyParams, monomial_shift, negacyclic_mul, schoolbook_negacyclic


def test_monomial_shift_wraps_with_sign():
    p = PolyParams(4, 16, 8)
    out = monomial_shift(Poly(p, [1, 2, 3, 4]), 1)
    assert [int(c) for c in out.coeffs] == [p.q - 4, 1, 2, 3]


def test_one_plus_x_squared():
    p = PolyParams(2, 16, 8)
    a = Poly(p, [1, 1])
    assert [int(c) for c in negacyclic_mul(a, a).coeffs] == [0, 2]


@st.composite
def poly_pair(draw, max_log_n=6):
    n = 1 << draw(st.integers(0, max_log_n))
    q_bits = draw(st.sampled_from([16, 64, 128]))
    p = PolyParams(n, q_bits, 8)
    coeffs = st.lists(st.integers(0, p.q - 1), min_size=n, max_size=n)
    return p, Poly(p, draw(coeffs)), Poly(p, draw(coeffs))


@given(poly_pair())
def test_mul_commutes(pair):
    _, a, b = pair
    assert negacyclic_mul(a, b) == negacyclic_mul(b, a)


@given(poly_pair(), st.data())
def test_shift_equals_monomial_product(pair, data):
    p, a, _ = pair
    k = data.draw(st.integers(0, p.n - 1))
    mono = np.zeros(p.n, dtype=object)
    mono[k] = 1
    assert monomial_shift(a, k) == negacyclic_mul(a, Poly(p, mono))


@given(poly_pair(), st.data())
def test_full_turn_negates(pair, data):
    p, a, _ = pair
    k = data.draw(st.integers(1, p.n)) % p.n
    twice = monomial_shift(monomial_shift(a, k), (p.n - k) % p.n)
    assert twice == (a if k == 0 else Poly(p, -a.coeffs))


def test_shift_range_checked():
    p = PolyParams(4, 16, 8)
    with pytest.raises(ValueError):
        monomial_shift(Poly.zero(p), 4)
    assert monomial_shift(Poly(p, [1, 2, 3, 4]), 0) == Poly(p, [1, 2, 3, 4])


@given(poly_pair(4), st.data())
def test_associative(pair, data):
    p, a, b = pair
    c = Poly(p, data.draw(st.lists(st.integers(0, p.q - 1), min_size=p.n, max_size=p.n)))
    assert negacyclic_mul(negacyclic_mul(a, b), c) == negacyclic_mul(a, negacyclic_mul(b, c))


def test_fft_matches_schoolbook():
    rng = np.random.default_rng(0)
    p = PolyParams(512, 128, 64)
    a = Poly(p, [int(v) for v in rng.integers(0, 2**62, p.n)])
    b = Poly(p, [int(v) - 2**40 for v in rng.integers(0, 2**41, p.n)])
    ref = schoolbook_negacyclic(a.coeffs, b.coeffs, p.q)
    got = negacyclic_mul(a, b, method="fft")
    assert [int(c) for c in got.coeffs] == [int(c) % p.q for c in ref]


@given(poly_pair(4))
def test_distributes(pair):
    p, a, b = pair
    c = Poly(p, list(range(p.n)))
    assert negacyclic_mul(a + b, c) == negacyclic_mul(a, c) + negacyclic_mul(b, c)


@given(st.sampled_from([128, 256]), st.sampled_from([64, 128, 200]), st.integers(0, 2**32))
def test_fft_path_exact(n, q_bits, seed):
    rng = np.random.default_rng(seed)
    p = PolyParams(n, q_bits, 32)
    a = Poly(p, [int.from_bytes(rng.bytes(q_bits // 8 + 1), "little") for _ in range(n)])
    b = Poly(p, [int(v) for v in rng.integers(-2**31, 2**31, n)])
    assert negacyclic_mul(a, b, method="fft") == negacyclic_mul(a, b, method="schoolbook")
