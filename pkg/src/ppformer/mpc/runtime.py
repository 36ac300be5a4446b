"""Two-party execution: one thread per party, a shared dealer, one channel."""
from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..toy_he import OpCounter, counting
from .channel import Channel, TransportError, inproc_pair, tcp_pair
from .dealer import Dealer, ProtocolAborted, Public
from .sharing import BoolShare, Party, ShareTensor
from .transcript import CostTable, PartyLog, Transcript, merge_logs

__all__ = ["PartyContext", "ProtocolRun", "run_two_party", "open_channels"]


def _elements(x) -> int:
    if isinstance(x, ShareTensor):
        return int(np.prod(x.shape))
    if isinstance(x, BoolShare):
        return int(x.bits.size)
    return 0


@dataclass
class PartyContext:
    party: Party
    channel: Channel
    dealer: Dealer
    rng: np.random.Generator
    log: PartyLog
    counter: OpCounter
    phase: str = "online"

    # --- messaging -------------------------------------------------------
    def send(self, tag: int, payload: bytes, ciphertexts: int = 0, ct_kind: str = ""):
        self.log.send(tag, payload, self.phase, ciphertexts, ct_kind)
        self.channel.send(tag, payload)

    def recv(self, tag: int) -> bytes:
        payload = self.channel.recv(tag)
        self.log.recv(tag, payload, self.phase)
        return payload

    @contextlib.contextmanager
    def in_phase(self, phase: str):
        old, self.phase = self.phase, phase
        try:
            yield
        finally:
            self.phase = old

    # --- functionalities -------------------------------------------------
    def _call(self, name: str, inputs: tuple, ring_bits: int, label: str = "", **params):
        elements = max(_elements(x) for x in inputs)
        seq = self.log.func(name, label, ring_bits, elements, self.phase)
        return self.dealer.call(self.party, seq, name, inputs, params)

    def f_mul(self, a: ShareTensor, b: ShareTensor, trunc: int = 0, label: str = "") -> ShareTensor:
        return self._call("mul", (a, b), a.params.ell, label, trunc=trunc)

    def f_less(self, a, b, label: str = "") -> BoolShare:
        """Shares of 1{a < b} (signed); either side may be a ``Public`` constant."""
        ell = next(x.params.ell for x in (a, b) if isinstance(x, ShareTensor))
        return self._call("less", (a, b), ell, label)

    def f_b2a(self, bits: BoolShare, ell: int, scale: int = 0, embed: int = 0, label: str = "") -> ShareTensor:
        return self._call("b2a", (bits,), ell, label, ell=ell, scale=scale, embed=embed)

    def f_wrap(self, a: ShareTensor, label: str = "") -> BoolShare:
        return self._call("wrap", (a,), a.params.ell, label)

    def f_recip(self, a: ShareTensor, out_scale: int, label: str = "") -> ShareTensor:
        return self._call("recip", (a,), a.params.ell, label, out_scale=out_scale)


@dataclass
class ProtocolRun:
    client: Any
    server: Any
    transcript: Transcript
    logs: dict[Party, PartyLog]
    counters: dict[Party, OpCounter] = field(default_factory=dict)


def open_channels(transport: str = "inproc", timeout: float = 600.0) -> tuple[Channel, Channel]:
    if transport == "inproc":
        return inproc_pair(timeout)
    if transport.startswith("tcp"):
        _, _, port = transport.partition(":")
        return tcp_pair(port=int(port) if port else 0, timeout=timeout)
    raise ValueError(f"unknown transport {transport!r}")


def run_two_party(
    client_fn: Callable[[PartyContext], Any],
    server_fn: Callable[[PartyContext], Any],
    *,
    transport: str = "inproc",
    seed: int = 0,
    costs: CostTable | None = None,
    timeout: float = 600.0,
) -> ProtocolRun:
    """Run both party programs concurrently and merge their logs.

    Randomness is derived from ``seed`` per role, so a run is reproducible
    regardless of thread scheduling or transport.
    """
    ch_c, ch_s = open_channels(transport, timeout)
    dealer = Dealer(np.random.SeedSequence([seed, 2]))
    ctxs = {
        p: PartyContext(p, ch, dealer, np.random.default_rng([seed, int(p)]), PartyLog(p), OpCounter())
        for p, ch in ((Party.CLIENT, ch_c), (Party.SERVER, ch_s))
    }
    results: dict[Party, Any] = {}
    errors: dict[Party, BaseException] = {}

    def body(p: Party, fn):
        ctx = ctxs[p]
        try:
            with counting(ctx.counter):
                results[p] = fn(ctx)
        except BaseException as e:  # noqa: BLE001 - propagated below
            errors[p] = e
            dealer.abort(e)
            ctx.channel.close()

    threads = [
        threading.Thread(target=body, args=(Party.CLIENT, client_fn), name="client", daemon=True),
        threading.Thread(target=body, args=(Party.SERVER, server_fn), name="server", daemon=True),
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    ch_c.close()
    ch_s.close()
    if errors:
        # report the root cause rather than the peer's knock-on failure
        primary = [e for e in errors.values() if not isinstance(e, (ProtocolAborted, TransportError))]
        raise (primary or list(errors.values()))[0]
    transcript = merge_logs(ctxs[Party.CLIENT].log, ctxs[Party.SERVER].log, costs)
    return ProtocolRun(
        results[Party.CLIENT],
        results[Party.SERVER],
        transcript,
        {p: c.log for p, c in ctxs.items()},
        {p: c.counter for p, c in ctxs.items()},
    )


__all__ += ["Public"]
