import numpy as np
import pytest
from hypothesis import given, strategies as st

from ppformer.poly_ring import Poly, PolyParams, monomial_shift, negacyclic_mul
from ppformer.toy_he import (FRESH_NOISE, Ciphertext, NoiseBudgetExceeded, OpCounter, counting, decrypt,
                             deserialize_ciphertext, encrypt, he_add, he_add_plain, he_poly_mul, he_rshift,
                             he_scalar_mul, he_sub_plain, keygen, measure_noise, plaintext, serialize_ciphertext)

P = PolyParams(16, 64, 16)


def rand_plain(rng, p=P):
    return plaintext(p, rng.integers(0, p.t, p.n))


def test_keygen_deterministic_and_ternary():
    k1, k2 = keygen(P, seed=5), keygen(P, seed=5)
    assert k1.s == k2.s
    assert set(int(c) for c in k1.s.coeffs) <= {0, 1, P.q - 1}
    assert keygen(P, seed=6).s != k1.s


def test_roundtrip_and_fresh_noise(rng):
    sk = keygen(P, seed=0)
    for _ in range(200):
        m = rand_plain(rng)
        ct = encrypt(m, sk, rng)
        assert ct.noise_bound == FRESH_NOISE
        assert decrypt(ct, sk) == m
        assert measure_noise(ct, sk, m) <= FRESH_NOISE


def test_zero_ciphertext_decrypts_to_zero():
    sk = keygen(P, seed=0)
    ct = Ciphertext(Poly.zero(P), Poly.zero(P), 0)
    assert decrypt(ct, sk) == Poly.zero(P)


def test_decrypt_refuses_exhausted_budget(rng):
    sk = keygen(P, seed=0)
    ct = encrypt(rand_plain(rng), sk, rng)
    bad = Ciphertext(ct.b, ct.a, P.delta // 2)
    with pytest.raises(NoiseBudgetExceeded):
        decrypt(bad, sk)


@given(st.integers(0, 2**32))
def test_homomorphic_ops(seed):
    rng = np.random.default_rng(seed)
    sk = keygen(P, seed=seed)
    m1, m2, r = rand_plain(rng), rand_plain(rng), rand_plain(rng)
    c1, c2 = encrypt(m1, sk, rng), encrypt(m2, sk, rng)
    s = he_add(c1, c2)
    assert s.noise_bound == c1.noise_bound + c2.noise_bound
    assert decrypt(s, sk) == plaintext(P, (m1.coeffs + m2.coeffs) % P.t)
    assert decrypt(he_sub_plain(c1, r), sk) == plaintext(P, (m1.coeffs - r.coeffs) % P.t)
    assert decrypt(he_add_plain(he_sub_plain(c1, r), r), sk) == m1
    c = int(rng.integers(0, P.t))
    assert decrypt(he_scalar_mul(c, c1), sk) == plaintext(P, (m1.coeffs * c) % P.t)
    k = int(rng.integers(0, P.n))
    assert decrypt(he_rshift(c1, k), sk) == plaintext(P, monomial_shift(m1, k).coeffs % P.t)


def test_poly_mul_small_n(rng):
    p = PolyParams(4, 64, 8)
    sk = keygen(p, seed=1)
    for _ in range(50):
        m, w = rand_plain(rng, p), plaintext(p, rng.integers(0, 4, p.n))
        ct = he_poly_mul(w, encrypt(m, sk, rng))
        expect = negacyclic_mul(Poly(p, m.coeffs), Poly(p, w.coeffs)).coeffs % p.t
        assert decrypt(ct, sk) == plaintext(p, expect)
        assert ct.noise_bound >= FRESH_NOISE


def test_signed_scalar_noise_uses_magnitude(rng):
    sk = keygen(P, seed=2)
    m = rand_plain(rng)
    ct = he_scalar_mul(P.t - 3, encrypt(m, sk, rng))
    assert ct.noise_bound == 3 * FRESH_NOISE
    assert measure_noise(ct, sk, plaintext(P, (m.coeffs * (P.t - 3)) % P.t)) <= ct.noise_bound


def test_rshift_is_free_and_composes(rng):
    sk = keygen(P, seed=3)
    ct = encrypt(rand_plain(rng), sk, rng)
    a = he_rshift(he_rshift(ct, 3), 5)
    assert a.noise_bound == ct.noise_bound
    assert decrypt(a, sk) == decrypt(he_rshift(ct, 8), sk)


def test_counting_scope(rng):
    sk = keygen(P, seed=4)
    ct = encrypt(rand_plain(rng), sk, rng)
    with counting(OpCounter()) as c:
        he_scalar_mul(2, ct)
        he_poly_mul(plaintext(P, [1]), ct)
    assert c.scalar_mults == 1 and c.poly_mults == 1
    assert c.coeff_mults == P.n + P.n * P.n


def test_serialization_roundtrip(rng):
    sk = keygen(P, seed=5)
    ct = he_scalar_mul(7, encrypt(rand_plain(rng), sk, rng))
    buf = serialize_ciphertext(ct) + serialize_ciphertext(ct)
    back, end = deserialize_ciphertext(buf)
    again, end2 = deserialize_ciphertext(buf, end)
    assert back == ct and again == ct and end2 == len(buf)
    with pytest.raises(ValueError):
        deserialize_ciphertext(buf[:-1], end)


def test_check_budget_raises(rng):
    p = PolyParams(16, 24, 16)
    sk = keygen(p, seed=0)
    ct = encrypt(rand_plain(rng, p), sk, rng)
    with pytest.raises(NoiseBudgetExceeded):
        he_scalar_mul(1000, ct, check_budget=True)
