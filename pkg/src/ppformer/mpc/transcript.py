"""Per-party event logs and the merged communication transcript.

Each party appends its sends, receives and functionality calls in program
order. Merging replays both logs causally: a message sits one round after its
sender's current depth, a receive lifts the receiver to at least that depth,
and a functionality call synchronises both parties and then adds its round
cost. The total round count is the deepest point reached. The logs do not
depend on the transport, so in-process and socket runs give equal transcripts.
"""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field

from .sharing import Party

__all__ = [
    "FuncCost",
    "CostTable",
    "Event",
    "PartyLog",
    "Message",
    "Transcript",
    "merge_logs",
    "ProtocolError",
]


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class FuncCost:
    """Communication of one ideal functionality: ``bits_factor * ell`` bits per element."""

    bits_factor: float
    rounds: int

    def nbytes(self, ell: int, elements: int) -> int:
        return -(-int(round(self.bits_factor * ell * elements)) // 8)


def _default_costs() -> dict[str, FuncCost]:
    return {
        "mul": FuncCost(2.0, 1),
        "less": FuncCost(4.0, 2),
        "b2a": FuncCost(2.0, 1),
        "wrap": FuncCost(4.0, 2),
        "recip": FuncCost(8.0, 4),
    }


@dataclass
class CostTable:
    costs: dict[str, FuncCost] = field(default_factory=_default_costs)

    def __getitem__(self, name: str) -> FuncCost:
        try:
            return self.costs[name]
        except KeyError:
            raise KeyError(f"no cost entry for functionality {name!r}") from None


@dataclass
class Event:
    kind: str  # "send", "recv" or "func"
    tag: int = 0
    nbytes: int = 0
    digest: str = ""
    phase: str = "online"
    ciphertexts: int = 0
    ct_kind: str = ""
    name: str = ""
    label: str = ""
    ell: int = 0
    elements: int = 0
    seq: int = -1


@dataclass
class PartyLog:
    party: Party
    events: list[Event] = field(default_factory=list)
    _func_seq: int = 0

    def send(self, tag: int, payload: bytes, phase: str, ciphertexts: int = 0, ct_kind: str = ""):
        digest = hashlib.sha256(payload).hexdigest()
        self.events.append(Event("send", tag, len(payload), digest, phase, ciphertexts, ct_kind))

    def recv(self, tag: int, payload: bytes, phase: str):
        self.events.append(Event("recv", tag, len(payload), hashlib.sha256(payload).hexdigest(), phase))

    def func(self, name: str, label: str, ell: int, elements: int, phase: str) -> int:
        seq = self._func_seq
        self._func_seq += 1
        self.events.append(Event("func", phase=phase, name=name, label=label, ell=ell, elements=elements, seq=seq))
        return seq


@dataclass(frozen=True)
class Message:
    sender: Party
    tag: int
    nbytes: int
    digest: str
    phase: str
    ciphertexts: int
    ct_kind: str
    depth: int


@dataclass
class Transcript:
    messages: list[Message] = field(default_factory=list)
    rounds: int = 0
    func_calls: Counter = field(default_factory=Counter)
    func_calls_by_label: Counter = field(default_factory=Counter)
    func_bytes: int = 0

    @property
    def channel_bytes(self) -> int:
        return sum(m.nbytes for m in self.messages)

    @property
    def bytes(self) -> int:
        return self.channel_bytes + self.func_bytes

    def bytes_from(self, sender: Party) -> int:
        return sum(m.nbytes for m in self.messages if m.sender == sender)

    def phase_bytes(self, phase: str) -> int:
        return sum(m.nbytes for m in self.messages if m.phase == phase)

    def ciphertexts(self, kind: str | None = None, sender: Party | None = None) -> int:
        return sum(
            m.ciphertexts
            for m in self.messages
            if (kind is None or m.ct_kind == kind) and (sender is None or m.sender == sender)
        )

    @property
    def ct_in(self) -> int:
        """Ciphertexts that encrypt (shares of) the layer input."""
        return self.ciphertexts("in")

    @property
    def ct_out(self) -> int:
        """Ciphertexts that encrypt (masked) layer outputs."""
        return self.ciphertexts("out")

    def signature(self) -> list[tuple]:
        """Transport-independent fingerprint used to compare two runs."""
        return [(int(m.sender), m.tag, m.nbytes, m.digest, m.depth) for m in self.messages]


def merge_logs(client: PartyLog, server: PartyLog, costs: CostTable | None = None) -> Transcript:
    costs = costs or CostTable()
    logs = {Party.CLIENT: client.events, Party.SERVER: server.events}
    ptr = {Party.CLIENT: 0, Party.SERVER: 0}
    depth = {Party.CLIENT: 0, Party.SERVER: 0}
    sent: dict[Party, list[int]] = {Party.CLIENT: [], Party.SERVER: []}
    received = {Party.CLIENT: 0, Party.SERVER: 0}
    out = Transcript()
    msgs: list[tuple[int, Message]] = []
    order = 0

    def current(p: Party) -> Event | None:
        return logs[p][ptr[p]] if ptr[p] < len(logs[p]) else None

    while current(Party.CLIENT) is not None or current(Party.SERVER) is not None:
        progressed = False
        for p in (Party.CLIENT, Party.SERVER):
            while (ev := current(p)) is not None:
                if ev.kind == "send":
                    d = depth[p] + 1
                    sent[p].append(d)
                    msgs.append((order, Message(p, ev.tag, ev.nbytes, ev.digest, ev.phase, ev.ciphertexts, ev.ct_kind, d)))
                    order += 1
                elif ev.kind == "recv":
                    idx = received[p]
                    if idx >= len(sent[p.other]):
                        break
                    depth[p] = max(depth[p], sent[p.other][idx])
                    received[p] += 1
                elif ev.kind == "func":
                    other = current(p.other)
                    if other is None or other.kind != "func" or other.seq != ev.seq:
                        break
                    if (other.name, other.ell, other.elements) != (ev.name, ev.ell, ev.elements):
                        raise ProtocolError(f"functionality mismatch at call {ev.seq}: {ev.name} vs {other.name}")
                    c = costs[ev.name]
                    d = max(depth[p], depth[p.other]) + c.rounds
                    depth[p] = depth[p.other] = d
                    out.func_calls[ev.name] += 1
                    out.func_calls_by_label[(ev.name, ev.label)] += 1
                    out.func_bytes += c.nbytes(ev.ell, ev.elements)
                    ptr[p.other] += 1
                else:
                    raise ProtocolError(f"unknown event kind {ev.kind!r}")
                ptr[p] += 1
                progressed = True
        if not progressed:
            raise ProtocolError("party logs are inconsistent (deadlock while merging)")

    for p in (Party.CLIENT, Party.SERVER):
        if received[p] != len(sent[p.other]):
            raise ProtocolError(f"{p.name.lower()} left {len(sent[p.other]) - received[p]} messages unread")
    out.messages = [m for _, m in msgs]
    out.rounds = max(depth.values())
    return out
