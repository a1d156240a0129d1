"""Length-prefixed messages over a stream socket: 4-byte big-endian length, then the body."""

from __future__ import annotations

import socket
import struct

_HEADER = struct.Struct("!I")
MAX_MESSAGE = 1 << 30


class FramingError(ConnectionError):
    pass


def send_message(sock: socket.socket, body: bytes) -> None:
    if len(body) > MAX_MESSAGE:
        raise FramingError(f"message of {len(body)} bytes exceeds limit")
    sock.sendall(_HEADER.pack(len(body)) + body)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise FramingError(f"connection closed after {len(buf)} of {n} bytes")
        buf += chunk
    return bytes(buf)


def recv_message(sock: socket.socket) -> bytes:
    (n,) = _HEADER.unpack(_recv_exact(sock, _HEADER.size))
    if n > MAX_MESSAGE:
        raise FramingError(f"announced length {n} exceeds limit")
    return _recv_exact(sock, n)
