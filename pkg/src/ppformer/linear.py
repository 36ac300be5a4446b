"""HE-based secure matrix multiplication: SIP and COP, plus the weight store.

Both protocols compute additive shares of ``Z = X @ W`` where ``X`` (k x m)
is secret-shared and ``W`` (m x n) belongs to the server.

* SIP: the client owns the HE key, sends encrypted window-encoded input
  shares, and the server returns masked window products (two rounds).
* COP: the server owns the HE key and ships its encrypted weight rows once,
  at setup. Online, the client multiplies plaintext shares into those rows,
  packs, masks and sends the result; the server decrypts (one round, no
  input ciphertexts).
"""
from __future__ import annotations

import concurrent.futures
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encodings import (
    PackingPlan,
    WindowShape,
    pack_outputs,
    rowwise_encode,
    unpack_outputs,
    window_decode,
    window_encode_left,
    window_encode_right,
)
from .fixed_ring import RingParams, RingTensor, ring_matmul
from .mpc import Party, PartyContext, ProtocolRun, ShareTensor, run_two_party
from .poly_ring import Poly, PolyParams
from .toy_he import (
    FRESH_NOISE,
    Ciphertext,
    SecretKey,
    decrypt,
    deserialize_ciphertext,
    encrypt,
    he_add,
    he_add_plain,
    he_poly_mul,
    he_scalar_mul,
    he_sub_plain,
    keygen,
    serialize_ciphertext,
)

__all__ = [
    "LinearLayerSpec",
    "WeightStore",
    "LinearResult",
    "required_q_bits",
    "cop_q_bits",
    "sip_q_bits",
    "cop_setup",
    "cop_client",
    "cop_server",
    "cop_matmul",
    "transfer_store",
    "sip_client",
    "sip_server",
    "sip_matmul",
    "sip_counts",
    "cop_counts",
    "PRESETS",
    "TAG_SETUP",
    "TAG_COP_OUT",
    "TAG_SIP_IN",
    "TAG_SIP_OUT",
]

TAG_SETUP = 0x10
TAG_COP_OUT = 0x11
TAG_SIP_IN = 0x20
TAG_SIP_OUT = 0x21

MIN_Q_BITS = 128

# BERT-base linear layers at sequence length 128: (k, m, n)
PRESETS: dict[str, tuple[int, int, int]] = {
    "qkv": (128, 768, 2304),
    "o": (128, 768, 768),
    "h1": (128, 768, 3072),
    "h2": (128, 3072, 768),
}


def required_q_bits(t_bits: int, noise_bound: int, floor: int = MIN_Q_BITS) -> int:
    """Smallest power-of-two modulus width with ``noise_bound < delta / 2``."""
    return max(floor, t_bits + int(noise_bound).bit_length() + 1)


@dataclass(frozen=True)
class LinearLayerSpec:
    k: int
    m: int
    n: int
    ell: int = 64
    scale: int = 18
    poly_n: int = 1024

    def __post_init__(self):
        if min(self.k, self.m, self.n) < 1:
            raise ValueError("layer dimensions must be positive")

    @classmethod
    def preset(cls, name: str, **kw) -> "LinearLayerSpec":
        k, m, n = PRESETS[name]
        return cls(k, m, n, **kw)

    @property
    def ring(self) -> RingParams:
        return RingParams(self.ell, self.scale)

    @property
    def packing(self) -> PackingPlan:
        return PackingPlan(self.k, self.n, self.poly_n)

    def cop_params(self) -> PolyParams:
        return PolyParams(self.poly_n, cop_q_bits(self), self.ell)

    def sip_params(self, shape: WindowShape) -> PolyParams:
        return PolyParams(self.poly_n, sip_q_bits(self, shape), self.ell)


def cop_q_bits(spec: LinearLayerSpec) -> int:
    # m scalar products of magnitude <= 2^(ell-1), then rows_per_ct packed sums
    bound = FRESH_NOISE * spec.m * (1 << (spec.ell - 1)) * spec.packing.rows_per_ct
    return required_q_bits(spec.ell, bound)


def sip_q_bits(spec: LinearLayerSpec, shape: WindowShape) -> int:
    bound = FRESH_NOISE * spec.poly_n * (1 << (spec.ell - 1)) * math.ceil(spec.m / shape.m_w)
    return required_q_bits(spec.ell, bound)


def cop_counts(spec: LinearLayerSpec) -> dict[str, int]:
    return {"ct_in": 0, "ct_out": spec.packing.ct_count, "client_coeff_mults": spec.k * spec.m * spec.poly_n}


def sip_counts(spec: LinearLayerSpec, shape: WindowShape) -> dict[str, int]:
    kb, mb, nb = (math.ceil(a / b) for a, b in ((spec.k, shape.k_w), (spec.m, shape.m_w), (spec.n, shape.n_w)))
    return {"ct_in": kb * mb, "ct_out": kb * nb, "server_poly_mults": kb * mb * nb}


# --- weight store -------------------------------------------------------------

_MAGIC = b"NIMBWSTR"
_VERSION = 1
_STORE_HEADER = struct.Struct("<8sHIIIHHIH")


@dataclass
class WeightStore:
    """Encrypted weight rows Enc(w_beta), beta < m, for one layer."""

    spec: LinearLayerSpec
    cts: list[Ciphertext]
    path: Path | None = None
    loaded: bool = True

    def __post_init__(self):
        if len(self.cts) != self.spec.m:
            raise ValueError(f"store holds {len(self.cts)} ciphertexts, layer needs m={self.spec.m}")

    def __len__(self) -> int:
        return len(self.cts)

    def __getitem__(self, beta: int) -> Ciphertext:
        return self.cts[beta]

    @property
    def params(self) -> PolyParams:
        return self.cts[0].params

    def to_bytes(self) -> bytes:
        s = self.spec
        head = _STORE_HEADER.pack(_MAGIC, _VERSION, s.k, s.m, s.n, s.ell, s.scale, s.poly_n, self.params.q_bits)
        return head + b"".join(serialize_ciphertext(ct) for ct in self.cts)

    @classmethod
    def from_bytes(cls, buf: bytes, path: Path | None = None) -> "WeightStore":
        if len(buf) < _STORE_HEADER.size:
            raise ValueError("weight store is truncated")
        magic, version, k, m, n, ell, scale, poly_n, q_bits = _STORE_HEADER.unpack_from(buf)
        if magic != _MAGIC:
            raise ValueError("not a weight store (bad magic)")
        if version != _VERSION:
            raise ValueError(f"unsupported weight store version {version}")
        spec = LinearLayerSpec(k, m, n, ell, scale, poly_n)
        pos = _STORE_HEADER.size
        cts = []
        for _ in range(m):
            ct, pos = deserialize_ciphertext(buf, pos)
            if ct.params.q_bits != q_bits or ct.params.n != poly_n:
                raise ValueError("ciphertext parameters disagree with the store header")
            cts.append(ct)
        if pos != len(buf):
            raise ValueError("trailing bytes after the last ciphertext")
        return cls(spec, cts, path)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        self.path = path
        return path

    @classmethod
    def load(cls, path) -> "WeightStore":
        path = Path(path)
        return cls.from_bytes(path.read_bytes(), path)

    @classmethod
    def load_async(cls, path, executor: concurrent.futures.Executor | None = None) -> concurrent.futures.Future:
        """Prefetch a store on a background thread; the future yields the loaded store."""
        if executor is None:
            executor = concurrent.futures.ThreadPoolExecutor(max_workers=1, thread_name_prefix="store-prefetch")
            fut = executor.submit(cls.load, path)
            executor.shutdown(wait=False)
            return fut
        return executor.submit(cls.load, path)


def cop_setup(w: RingTensor, sk: SecretKey, spec: LinearLayerSpec, rng: np.random.Generator) -> WeightStore:
    """Server side of the setup phase: encrypt every weight row."""
    if w.shape != (spec.m, spec.n):
        raise ValueError(f"W must be {spec.m}x{spec.n}, got {w.shape}")
    if spec.n > spec.poly_n:
        raise ValueError(f"n={spec.n} exceeds N={spec.poly_n}")
    params = sk.params
    if params != spec.cop_params():
        raise ValueError("secret key parameters do not match the layer")
    cts = [encrypt(rowwise_encode(w.data[beta], spec.n, params), sk, rng) for beta in range(spec.m)]
    return WeightStore(spec, cts)


def transfer_store(store: WeightStore, *, transport: str = "inproc", seed: int = 0) -> tuple[WeightStore, ProtocolRun]:
    """Setup-phase message: server ships the serialized store to the client."""

    def server(ctx: PartyContext):
        with ctx.in_phase("setup"):
            ctx.send(TAG_SETUP, store.to_bytes(), ciphertexts=len(store), ct_kind="weights")

    def client(ctx: PartyContext):
        with ctx.in_phase("setup"):
            return WeightStore.from_bytes(ctx.recv(TAG_SETUP))

    run = run_two_party(client, server, transport=transport, seed=seed)
    return run.client, run


# --- COP ----------------------------------------------------------------------

def _out_params(xp: RingParams, wp: RingParams) -> RingParams:
    return RingParams(xp.ell, min(xp.scale + wp.scale, xp.ell - 1))


def _uniform_plain(rng: np.random.Generator, params: PolyParams) -> Poly:
    """Plaintext polynomial with coefficients uniform over Z_t."""
    cb = (params.t_bits + 7) // 8
    buf = rng.bytes(params.n * cb)
    mask = params.t - 1
    return Poly(params, [int.from_bytes(buf[i * cb:(i + 1) * cb], "little") & mask for i in range(params.n)])


def _serialize_all(cts: list[Ciphertext]) -> bytes:
    return b"".join(serialize_ciphertext(ct) for ct in cts)


def _deserialize_all(buf: bytes, count: int) -> list[Ciphertext]:
    out, pos = [], 0
    for _ in range(count):
        ct, pos = deserialize_ciphertext(buf, pos)
        out.append(ct)
    if pos != len(buf):
        raise ValueError("trailing bytes in ciphertext batch")
    return out


def cop_client(ctx: PartyContext, store: WeightStore, xc: ShareTensor, w_scale: int) -> ShareTensor:
    spec = store.spec
    if xc.shape != (spec.k, spec.m):
        raise ValueError(f"X share must be {spec.k}x{spec.m}, got {xc.shape}")
    params = store.params
    plan = spec.packing
    rows = []
    data = xc.inner.data
    for alpha in range(spec.k):
        acc = None
        for beta in range(spec.m):
            term = he_scalar_mul(int(data[alpha, beta]), store[beta])
            acc = term if acc is None else he_add(acc, term)
        rows.append(acc)
    packed = pack_outputs(rows, plan)

    # mask every coefficient of every packed ciphertext; valid slots form R
    out_ring = _out_params(xc.params, RingParams(spec.ell, w_scale))
    masks = [_uniform_plain(ctx.rng, params) for _ in packed]
    masked = [he_sub_plain(ct, r) for ct, r in zip(packed, masks)]
    ctx.send(TAG_COP_OUT, _serialize_all(masked), ciphertexts=len(masked), ct_kind="out")
    r = unpack_outputs(masks, plan, out_ring)
    return ShareTensor(Party.CLIENT, r)


def cop_server(ctx: PartyContext, sk: SecretKey, w: RingTensor, xs: ShareTensor, spec: LinearLayerSpec) -> ShareTensor:
    plan = spec.packing
    cts = _deserialize_all(ctx.recv(TAG_COP_OUT), plan.ct_count)
    plain = [decrypt(ct, sk) for ct in cts]
    out_ring = _out_params(xs.params, w.params)
    masked = unpack_outputs(plain, plan, out_ring)
    local = ring_matmul(xs.inner, w)
    return ShareTensor(Party.SERVER, RingTensor(out_ring, (masked + local).data))


@dataclass
class LinearResult:
    yc: ShareTensor
    ys: ShareTensor
    run: ProtocolRun
    setup: ProtocolRun | None = None
    extras: dict = field(default_factory=dict)

    def reconstruct(self) -> RingTensor:
        from .mpc import reconstruct

        return reconstruct(self.yc, self.ys)


def cop_matmul(
    xc: ShareTensor,
    xs: ShareTensor,
    w: RingTensor,
    spec: LinearLayerSpec,
    *,
    seed: int = 0,
    transport: str = "inproc",
    store: WeightStore | None = None,
    sk: SecretKey | None = None,
    with_setup: bool = True,
) -> LinearResult:
    """Run setup (unless a store and key are supplied) and the online COP phase."""
    setup_run = None
    if store is None or sk is None:
        sk = keygen(spec.cop_params(), seed=np.random.SeedSequence([seed, 10]))
        store = cop_setup(w, sk, spec, np.random.default_rng([seed, 11]))
    if with_setup:
        client_store, setup_run = transfer_store(store, transport=transport, seed=seed)
    else:
        client_store = store
    run = run_two_party(
        lambda ctx: cop_client(ctx, client_store, xc, w.params.scale),
        lambda ctx: cop_server(ctx, sk, w, xs, spec),
        transport=transport,
        seed=seed,
    )
    return LinearResult(run.client, run.server, run, setup_run)


# --- SIP ----------------------------------------------------------------------

def _pad(t: RingTensor, rows: int, cols: int) -> RingTensor:
    out = np.zeros((rows, cols), dtype=np.uint64)
    out[: t.rows, : t.cols] = t.data
    return RingTensor(t.params, out)


def _block(t: RingTensor, r0: int, c0: int, h: int, w: int) -> RingTensor:
    return RingTensor(t.params, t.data[r0:r0 + h, c0:c0 + w])


def sip_client(ctx: PartyContext, sk: SecretKey, xc: ShareTensor, spec: LinearLayerSpec,
               shape: WindowShape, w_scale: int) -> ShareTensor:
    params = sk.params
    kb, mb, nb = (math.ceil(a / b) for a, b in ((spec.k, shape.k_w), (spec.m, shape.m_w), (spec.n, shape.n_w)))
    x = _pad(xc.inner, kb * shape.k_w, mb * shape.m_w)
    cts = [
        encrypt(window_encode_left(_block(x, i * shape.k_w, b * shape.m_w, shape.k_w, shape.m_w), shape, params),
                sk, ctx.rng)
        for i in range(kb)
        for b in range(mb)
    ]
    ctx.send(TAG_SIP_IN, _serialize_all(cts), ciphertexts=len(cts), ct_kind="in")
    outs = _deserialize_all(ctx.recv(TAG_SIP_OUT), kb * nb)
    out_ring = _out_params(xc.params, RingParams(spec.ell, w_scale))
    z = np.zeros((kb * shape.k_w, nb * shape.n_w), dtype=np.uint64)
    for idx, ct in enumerate(outs):
        i, j = divmod(idx, nb)
        blk = window_decode(decrypt(ct, sk), shape, out_ring)
        z[i * shape.k_w:(i + 1) * shape.k_w, j * shape.n_w:(j + 1) * shape.n_w] = blk.data
    return ShareTensor(Party.CLIENT, RingTensor(out_ring, z[: spec.k, : spec.n]))


def sip_server(ctx: PartyContext, w: RingTensor, xs: ShareTensor, spec: LinearLayerSpec,
               shape: WindowShape, params: PolyParams) -> ShareTensor:
    kb, mb, nb = (math.ceil(a / b) for a, b in ((spec.k, shape.k_w), (spec.m, shape.m_w), (spec.n, shape.n_w)))
    cts = _deserialize_all(ctx.recv(TAG_SIP_IN), kb * mb)
    x = _pad(xs.inner, kb * shape.k_w, mb * shape.m_w)
    wp = _pad(w, mb * shape.m_w, nb * shape.n_w)
    # fold in the server's input share: ciphertexts now encrypt windows of X
    cts = [
        he_add_plain(cts[i * mb + b],
                     window_encode_left(_block(x, i * shape.k_w, b * shape.m_w, shape.k_w, shape.m_w), shape, params))
        for i in range(kb)
        for b in range(mb)
    ]
    w_polys = [
        [window_encode_right(_block(wp, b * shape.m_w, j * shape.n_w, shape.m_w, shape.n_w), shape, params)
         for j in range(nb)]
        for b in range(mb)
    ]
    out_ring = _out_params(xs.params, w.params)
    outs = []
    ys = np.zeros((kb * shape.k_w, nb * shape.n_w), dtype=np.uint64)
    for i in range(kb):
        for j in range(nb):
            acc = None
            for b in range(mb):
                term = he_poly_mul(w_polys[b][j], cts[i * mb + b])
                acc = term if acc is None else he_add(acc, term)
            # uniform mask on all N coefficients; the server keeps the decoded slots
            r = _uniform_plain(ctx.rng, params)
            outs.append(he_sub_plain(acc, r))
            ys[i * shape.k_w:(i + 1) * shape.k_w, j * shape.n_w:(j + 1) * shape.n_w] = \
                window_decode(r, shape, out_ring).data
    ctx.send(TAG_SIP_OUT, _serialize_all(outs), ciphertexts=len(outs), ct_kind="out")
    return ShareTensor(Party.SERVER, RingTensor(out_ring, ys[: spec.k, : spec.n]))


def sip_matmul(
    xc: ShareTensor,
    xs: ShareTensor,
    w: RingTensor,
    spec: LinearLayerSpec,
    shape: WindowShape,
    *,
    seed: int = 0,
    transport: str = "inproc",
    sk: SecretKey | None = None,
) -> LinearResult:
    shape.check(spec.poly_n)
    params = spec.sip_params(shape)
    if sk is None:
        sk = keygen(params, seed=np.random.SeedSequence([seed, 20]))
    run = run_two_party(
        lambda ctx: sip_client(ctx, sk, xc, spec, shape, w.params.scale),
        lambda ctx: sip_server(ctx, w, xs, spec, shape, params),
        transport=transport,
        seed=seed,
    )
    return LinearResult(run.client, run.server, run)
