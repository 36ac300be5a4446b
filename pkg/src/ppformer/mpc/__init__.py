"""Two-party runtime: sharing, dealer functionalities, channels and transcripts."""
from .channel import TagMismatch, TransportError, inproc_pair, tcp_pair
from .dealer import Dealer, ProtocolAborted, Public, ideal
from .runtime import PartyContext, ProtocolRun, run_two_party
from .sharing import BoolShare, Party, ShareTensor, reconstruct, reconstruct_bits, share, share_bits
from .transcript import CostTable, FuncCost, ProtocolError, Transcript, merge_logs

__all__ = [
    "BoolShare",
    "CostTable",
    "Dealer",
    "FuncCost",
    "Party",
    "PartyContext",
    "ProtocolAborted",
    "ProtocolError",
    "ProtocolRun",
    "Public",
    "ShareTensor",
    "TagMismatch",
    "Transcript",
    "TransportError",
    "ideal",
    "inproc_pair",
    "merge_logs",
    "reconstruct",
    "reconstruct_bits",
    "run_two_party",
    "share",
    "share_bits",
    "tcp_pair",
]
