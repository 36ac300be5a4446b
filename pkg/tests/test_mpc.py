import numpy as np
import pytest
from hypothesis import given, strategies as st

from ppformer.fixed_ring import RingParams, RingTensor, from_signed
from ppformer.mpc import (Party, ProtocolError, Public, ShareTensor, TagMismatch, TransportError,
                          inproc_pair, reconstruct, reconstruct_bits, run_two_party, share, share_bits,
                          tcp_pair)
from ppformer.mpc.channel import FRAME_HEADER, encode_frame

R = RingParams(32, 12)


@given(st.integers(0, 2**32), st.integers(1, 64))
def test_share_reconstruct(seed, ell):
    rng = np.random.default_rng(seed)
    p = RingParams(ell, 0)
    x = RingTensor.random(p, 3, 5, rng)
    a, b = share(x, rng)
    assert a.party == Party.CLIENT and b.party == Party.SERVER
    assert reconstruct(a, b) == x
    bits = rng.integers(0, 2, (2, 3)).astype(np.uint8)
    assert np.array_equal(reconstruct_bits(*share_bits(bits, rng)), bits)


def test_share_linear_ops(rng):
    x = RingTensor.from_real([[1.5, -2.0]], R)
    y = RingTensor.from_real([[0.25, 4.0]], R)
    xa, xb = share(x, rng)
    ya, yb = share(y, rng)
    np.testing.assert_array_equal(reconstruct(xa + ya, xb + yb).to_real(), [[1.75, 2.0]])
    np.testing.assert_array_equal(reconstruct(xa.add_public(4096), xb.add_public(4096)).to_real(), [[2.5, -1.0]])
    np.testing.assert_array_equal(reconstruct(xa.mul_public(3), xb.mul_public(3)).to_real(), [[4.5, -6.0]])


def test_bool_ops(rng):
    bits = np.array([[0, 1, 1, 0]], dtype=np.uint8)
    a, b = share_bits(bits, rng)
    assert np.array_equal(reconstruct_bits(a.invert(), b.invert()), 1 - bits)
    c, d = share_bits(np.array([[1, 1, 0, 0]], dtype=np.uint8), rng)
    assert np.array_equal(reconstruct_bits(a ^ c, b ^ d), [[1, 0, 1, 0]])


@given(st.integers(0, 2**32), st.integers(0, 6))
def test_f_mul_matches_fixed_product(seed, trunc):
    rng = np.random.default_rng(seed)
    a = RingTensor(R, from_signed(rng.integers(-2**15, 2**15, (2, 3)), 32))
    b = RingTensor(R, from_signed(rng.integers(-2**15, 2**15, (2, 3)), 32))
    ac, as_ = share(a, rng)
    bc, bs = share(b, rng)
    res = run_two_party(lambda c: c.f_mul(ac, bc, trunc=trunc), lambda c: c.f_mul(as_, bs, trunc=trunc), seed=seed)
    got = reconstruct(res.client, res.server).signed()
    expect = (a.signed().astype(object) * b.signed().astype(object))
    expect = np.vectorize(lambda v: v >> trunc)(expect)
    assert np.array_equal(got.astype(object), expect)
    assert res.transcript.func_calls["mul"] == 1


def test_f_less_signed_and_public(rng):
    x = RingTensor.from_real([[-3.0, 0.0, 2.5, 7.0]], R)
    xc, xs = share(x, rng)
    res = run_two_party(lambda c: c.f_less(xc, Public(4096)), lambda c: c.f_less(xs, Public(4096)))
    assert reconstruct_bits(res.client, res.server).tolist() == [[1, 1, 0, 0]]
    res = run_two_party(lambda c: c.f_less(Public(0), xc), lambda c: c.f_less(Public(0), xs))
    assert reconstruct_bits(res.client, res.server).tolist() == [[0, 0, 1, 1]]


def test_b2a_embed_and_wrap(rng):
    bits = np.array([[1, 0, 1]], dtype=np.uint8)
    bc, bs = share_bits(bits, rng)
    res = run_two_party(lambda c: c.f_b2a(bc, ell=20, embed=3), lambda c: c.f_b2a(bs, ell=20, embed=3))
    out = reconstruct(res.client, res.server)
    assert out.params.ell == 20 and out.data.tolist() == [[8, 0, 8]]
    x = RingTensor(RingParams(8, 0), np.array([[200, 3]]))
    xc = ShareTensor(Party.CLIENT, RingTensor(RingParams(8, 0), np.array([[100, 1]])))
    xs = ShareTensor(Party.SERVER, x - xc.inner)
    res = run_two_party(lambda c: c.f_wrap(xc), lambda c: c.f_wrap(xs))
    # 100 + 100 = 200 (no wrap); 1 + 2 = 3 (no wrap)
    assert reconstruct_bits(res.client, res.server).tolist() == [[0, 0]]
    xs2 = ShareTensor(Party.SERVER, RingTensor(RingParams(8, 0), np.array([[200, 255]])))
    res = run_two_party(lambda c: c.f_wrap(xc), lambda c: c.f_wrap(xs2))
    assert reconstruct_bits(res.client, res.server).tolist() == [[1, 1]]


def test_f_recip():
    x = RingTensor.from_real([[2.0, 0.5, 3.0]], R)
    xc, xs = share(x, np.random.default_rng(0))
    res = run_two_party(lambda c: c.f_recip(xc, out_scale=12), lambda c: c.f_recip(xs, out_scale=12))
    np.testing.assert_allclose(reconstruct(res.client, res.server).to_real(), [[0.5, 2.0, 1 / 3]], atol=2**-12)


def ping_pong(ctx):
    if ctx.party == Party.CLIENT:
        ctx.send(1, b"hello")
        return ctx.recv(2)
    got = ctx.recv(1)
    ctx.send(2, got[::-1] + b"!")
    return got


@pytest.mark.parametrize("transport", ["inproc", "tcp"])
def test_messages_and_rounds(transport):
    res = run_two_party(ping_pong, ping_pong, transport=transport)
    assert res.client == b"olleh!" and res.server == b"hello"
    tr = res.transcript
    assert tr.rounds == 2
    assert tr.channel_bytes == len(b"hello") + len(b"olleh!")
    assert [m.tag for m in tr.messages] == [1, 2]


def test_parallel_sends_are_one_round():
    def f(ctx):
        ctx.send(5, b"x" * 10)
        return ctx.recv(5)
    res = run_two_party(f, f)
    assert res.transcript.rounds == 1
    assert res.transcript.bytes_from(Party.CLIENT) == res.transcript.bytes_from(Party.SERVER)


def test_transport_signatures_agree():
    a = run_two_party(ping_pong, ping_pong, transport="inproc")
    b = run_two_party(ping_pong, ping_pong, transport="tcp")
    assert a.transcript.signature() == b.transcript.signature()


def test_tag_mismatch_surfaces():
    def client(ctx):
        ctx.send(1, b"a")

    def server(ctx):
        ctx.recv(9)

    with pytest.raises(TagMismatch):
        run_two_party(client, server, timeout=5)


def test_func_mismatch_detected(rng):
    x = RingTensor.from_real([[1.0]], R)
    xc, xs = share(x, rng)
    with pytest.raises(ProtocolError):
        run_two_party(lambda c: c.f_wrap(xc), lambda c: c.f_less(xs, Public(0)), timeout=5)


def test_error_in_one_party_propagates():
    def client(ctx):
        raise KeyError("boom")

    def server(ctx):
        ctx.recv(1)

    with pytest.raises(KeyError):
        run_two_party(client, server, timeout=5)


@pytest.mark.parametrize("make", [inproc_pair, tcp_pair])
def test_channel_framing(make):
    a, b = make()
    try:
        payloads = [b"", b"\x00" * 3, bytes(range(256)) * 40]
        for i, p in enumerate(payloads):
            a.send(i, p)
        for i, p in enumerate(payloads):
            assert b.recv(i) == p
        a.send(3, b"zz")
        with pytest.raises(TagMismatch):
            b.recv(4)
    finally:
        a.close()
        b.close()


def test_frame_layout():
    frame = encode_frame(7, b"abc")
    assert FRAME_HEADER.unpack_from(frame) == (3, 7) and frame[FRAME_HEADER.size:] == b"abc"
    with pytest.raises(ValueError):
        encode_frame(1 << 16, b"")


def test_closed_channel_raises():
    a, b = inproc_pair(timeout=1)
    a.close()
    with pytest.raises(TransportError):
        b.recv(1)


def test_deterministic_runs(rng):
    x = RingTensor.from_real([[1.0, -2.0, 0.5]], R)
    xc, xs = share(x, rng)
    runs = [run_two_party(lambda c: c.f_mul(xc, xc, trunc=12), lambda c: c.f_mul(xs, xs, trunc=12), seed=3)
            for _ in range(2)]
    assert runs[0].client == runs[1].client and runs[0].server == runs[1].server
