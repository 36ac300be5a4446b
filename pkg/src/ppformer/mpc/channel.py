"""Message channels between the two parties.

Frames are ``<u32 payload length><u16 tag><payload>`` (little endian) on every
transport, so the in-process queue and the TCP socket carry identical bytes.
"""
from __future__ import annotations

import queue
import socket
import struct
import threading

__all__ = [
    "TransportError",
    "TagMismatch",
    "Channel",
    "InProcChannel",
    "TcpChannel",
    "inproc_pair",
    "tcp_pair",
    "encode_frame",
    "FRAME_HEADER",
]

FRAME_HEADER = struct.Struct("<IH")
DEFAULT_TIMEOUT = 600.0


class TransportError(RuntimeError):
    pass


class TagMismatch(TransportError):
    pass


def encode_frame(tag: int, payload: bytes) -> bytes:
    if not 0 <= tag < 1 << 16:
        raise ValueError(f"tag {tag} does not fit in 16 bits")
    return FRAME_HEADER.pack(len(payload), tag) + payload


class Channel:
    """Ordered, reliable byte-frame channel to the peer."""

    timeout: float = DEFAULT_TIMEOUT

    def _send_frame(self, frame: bytes):
        raise NotImplementedError

    def _recv_frame(self) -> tuple[int, bytes]:
        raise NotImplementedError

    def send(self, tag: int, payload: bytes):
        self._send_frame(encode_frame(tag, bytes(payload)))

    def recv(self, tag: int) -> bytes:
        got, payload = self._recv_frame()
        if got != tag:
            raise TagMismatch(f"expected frame tag {tag}, got {got}")
        return payload

    def close(self):
        pass


class InProcChannel(Channel):
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, timeout: float = DEFAULT_TIMEOUT):
        self.inbox = inbox
        self.outbox = outbox
        self.timeout = timeout
        self._closed = threading.Event()

    def _send_frame(self, frame: bytes):
        if self._closed.is_set():
            raise TransportError("channel closed")
        self.outbox.put(frame)

    def _recv_frame(self) -> tuple[int, bytes]:
        try:
            frame = self.inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError(f"no frame within {self.timeout}s") from None
        if frame is None:
            raise TransportError("peer closed the channel")
        n, tag = FRAME_HEADER.unpack_from(frame)
        if len(frame) != FRAME_HEADER.size + n:
            raise TransportError("malformed frame")
        return tag, frame[FRAME_HEADER.size:]

    def close(self):
        if not self._closed.is_set():
            self._closed.set()
            self.outbox.put(None)


def inproc_pair(timeout: float = DEFAULT_TIMEOUT) -> tuple[InProcChannel, InProcChannel]:
    a, b = queue.Queue(), queue.Queue()
    return InProcChannel(a, b, timeout), InProcChannel(b, a, timeout)


class TcpChannel(Channel):
    def __init__(self, sock: socket.socket, timeout: float = DEFAULT_TIMEOUT):
        self.sock = sock
        self.timeout = timeout
        sock.settimeout(timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def _send_frame(self, frame: bytes):
        try:
            self.sock.sendall(frame)
        except OSError as e:
            raise TransportError(f"send failed: {e}") from e

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(min(n - len(buf), 1 << 20))
            except OSError as e:
                raise TransportError(f"receive failed: {e}") from e
            if not chunk:
                raise TransportError("peer closed the connection")
            buf += chunk
        return bytes(buf)

    def _recv_frame(self) -> tuple[int, bytes]:
        n, tag = FRAME_HEADER.unpack(self._read_exact(FRAME_HEADER.size))
        return tag, self._read_exact(n)

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def tcp_pair(host: str = "127.0.0.1", port: int = 0, timeout: float = DEFAULT_TIMEOUT) -> tuple[TcpChannel, TcpChannel]:
    """Loopback connection; returns (client end, server end)."""
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        listener.bind((host, port))
        listener.listen(1)
        listener.settimeout(timeout)
        addr = listener.getsockname()
        client = socket.create_connection(addr, timeout=timeout)
        server, _ = listener.accept()
    except OSError as e:
        raise TransportError(f"could not open loopback connection: {e}") from e
    finally:
        listener.close()
    return TcpChannel(client, timeout), TcpChannel(server, timeout)
