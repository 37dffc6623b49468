"""Minimal WebSocket (RFC 6455) framing over blocking sockets, plus a tiny
static-file HTTP fallback on the same port.

Only what a browser and our own Python client need: the upgrade handshake,
text/close/ping/pong frames, client-side masking, and continuation
reassembly. Messages are length-delimited UTF-8 by construction.
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
from pathlib import Path

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT, OP_TEXT, OP_BIN, OP_CLOSE, OP_PING, OP_PONG = 0x0, 0x1, 0x2, 0x8, 0x9, 0xA


class SocketClosed(ConnectionError):
    pass


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise SocketClosed("peer closed")
        buf += chunk
    return buf


def read_http_request(sock: socket.socket) -> tuple:
    """(request line, headers dict) of one HTTP request."""
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise SocketClosed("peer closed during handshake")
        data += chunk
        if len(data) > 65536:
            raise ValueError("oversized HTTP request")
    head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = head.split("\r\n")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    return lines[0], headers


def accept_key(key: str) -> str:
    return base64.b64encode(hashlib.sha1((key + WS_GUID).encode()).digest()).decode()


def server_handshake(sock: socket.socket):
    """Returns ("ws", path) after upgrading, or ("http", request_line) with
    the request left for the static handler."""
    request, headers = read_http_request(sock)
    parts = request.split()
    path = parts[1] if len(parts) >= 2 else "/"
    if headers.get("upgrade", "").lower() == "websocket" and "sec-websocket-key" in headers:
        resp = ("HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept_key(headers['sec-websocket-key'])}\r\n\r\n")
        sock.sendall(resp.encode("latin-1"))
        return "ws", path
    return "http", (request, headers, path)


def client_handshake(sock: socket.socket, host: str, path: str = "/ws"):
    key = base64.b64encode(os.urandom(16)).decode()
    req = (f"GET {path} HTTP/1.1\r\nHost: {host}\r\nUpgrade: websocket\r\n"
           f"Connection: Upgrade\r\nSec-WebSocket-Key: {key}\r\n"
           "Sec-WebSocket-Version: 13\r\n\r\n")
    sock.sendall(req.encode("latin-1"))
    status, headers = read_http_request(sock)
    if "101" not in status:
        raise ConnectionError(f"websocket upgrade refused: {status}")
    if headers.get("sec-websocket-accept") != accept_key(key):
        raise ConnectionError("bad Sec-WebSocket-Accept")


def encode_frame(payload: bytes, opcode: int = OP_TEXT, mask: bool = False) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 65536:
        head += bytes([mask_bit | 126]) + struct.pack(">H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        masked = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return head + key + masked
    return head + payload


def read_frame(sock: socket.socket):
    """One raw frame: (fin, opcode, payload)."""
    b0, b1 = _read_exact(sock, 2)
    fin = bool(b0 & 0x80)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        n = struct.unpack(">H", _read_exact(sock, 2))[0]
    elif n == 127:
        n = struct.unpack(">Q", _read_exact(sock, 8))[0]
    key = _read_exact(sock, 4) if masked else None
    payload = _read_exact(sock, n) if n else b""
    if key:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return fin, opcode, payload


def read_message(sock: socket.socket):
    """One whole message, reassembling continuations and answering pings.

    Returns (opcode, payload) where opcode is OP_TEXT/OP_BIN/OP_CLOSE.
    """
    buffer = b""
    first_op = None
    while True:
        fin, opcode, payload = read_frame(sock)
        if opcode == OP_PING:
            sock.sendall(encode_frame(payload, OP_PONG))
            continue
        if opcode == OP_PONG:
            continue
        if opcode == OP_CLOSE:
            return OP_CLOSE, payload
        if opcode in (OP_TEXT, OP_BIN):
            first_op = opcode
            buffer = payload
        elif opcode == OP_CONT:
            buffer += payload
        if fin:
            return first_op if first_op is not None else opcode, buffer


CONTENT_TYPES = {".html": "text/html; charset=utf-8", ".js": "text/javascript",
                 ".mjs": "text/javascript", ".css": "text/css",
                 ".json": "application/json", ".png": "image/png",
                 ".svg": "image/svg+xml", ".map": "application/json",
                 ".ico": "image/x-icon"}


def serve_static(sock: socket.socket, path: str, roots, extra_routes=None):
    """One-shot static file response from the first root containing path."""
    clean = path.split("?", 1)[0]
    if clean in ("", "/"):
        clean = "/index.html"
    if extra_routes and clean in extra_routes:
        body = extra_routes[clean]()
        ctype = CONTENT_TYPES.get(Path(clean).suffix, "application/octet-stream")
        _respond(sock, 200, ctype, body)
        return
    rel = clean.lstrip("/")
    for root in roots:
        candidate = (Path(root) / rel).resolve()
        try:
            candidate.relative_to(Path(root).resolve())
        except ValueError:
            continue
        if candidate.is_file():
            ctype = CONTENT_TYPES.get(candidate.suffix, "application/octet-stream")
            _respond(sock, 200, ctype, candidate.read_bytes())
            return
    _respond(sock, 404, "text/plain; charset=utf-8", b"not found")


def _respond(sock, status: int, ctype: str, body: bytes):
    reason = {200: "OK", 404: "Not Found"}.get(status, "")
    head = (f"HTTP/1.1 {status} {reason}\r\nContent-Type: {ctype}\r\n"
            f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n")
    sock.sendall(head.encode("latin-1") + body)
