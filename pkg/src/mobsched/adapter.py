"""Line-delimited execution protocol for external target harnesses.

Request: 4-byte little-endian length followed by the raw input bytes.
Reply: one line of JSON::

    {"edges": [..], "exec_cost_us": int, "stack_bytes": int, "cmp_matched": int}

The harness runs as a child process speaking over stdin/stdout
(``cmd:<command line>``) or listens on a local socket
(``tcp:<host>:<port>`` / ``unix:<path>``).
"""

from __future__ import annotations

import json
import logging
import os
import select
import shlex
import socket
import struct
import subprocess
import time
from typing import Optional

from .kernels import MAP_SIZE
from .simtarget import ExecutionRecord

log = logging.getLogger(__name__)

MAX_LINE = 1 << 22


class ExecutionError(RuntimeError):
    pass


class ProtocolError(ExecutionError):
    pass


class RecordValidationError(ExecutionError):
    pass


class AdapterConnection:
    """Framed request/reply channel over a pair of file descriptors."""

    def __init__(self, read_fd: int, write_fd: int, timeout: float = 5.0, closer=None) -> None:
        self.read_fd = read_fd
        self.write_fd = write_fd
        self.timeout = timeout
        self._buf = b""
        self._closer = closer

    def _write_all(self, payload: bytes) -> None:
        view = memoryview(payload)
        while view:
            try:
                n = os.write(self.write_fd, view)
            except (BrokenPipeError, OSError) as exc:
                raise ExecutionError(f"harness write failed: {exc}") from None
            view = view[n:]

    def _read_line(self) -> bytes:
        deadline = time.monotonic() + self.timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ExecutionError("harness reply timed out")
            ready, _, _ = select.select([self.read_fd], [], [], remaining)
            if not ready:
                raise ExecutionError("harness reply timed out")
            chunk = os.read(self.read_fd, 65536)
            if not chunk:
                raise ExecutionError("harness closed the connection")
            self._buf += chunk
            if len(self._buf) > MAX_LINE:
                raise ProtocolError("reply line too long")
        line, _, self._buf = self._buf.partition(b"\n")
        return line

    def request(self, data: bytes) -> bytes:
        self._write_all(struct.pack("<I", len(data)) + bytes(data))
        return self._read_line()

    def close(self) -> None:
        if self._closer is not None:
            self._closer()
            self._closer = None


def _spawn(command: str, timeout: float) -> AdapterConnection:
    proc = subprocess.Popen(shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE)

    def closer():
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
        proc.stdout.close()

    conn = AdapterConnection(proc.stdout.fileno(), proc.stdin.fileno(), timeout, closer)
    conn.process = proc
    return conn


def _socket(family, address, timeout: float) -> AdapterConnection:
    sock = socket.socket(family, socket.SOCK_STREAM)
    sock.settimeout(timeout)
    sock.connect(address)
    sock.setblocking(True)
    conn = AdapterConnection(sock.fileno(), sock.fileno(), timeout, sock.close)
    conn.socket = sock
    return conn


def connect(address: str, timeout: float = 5.0) -> AdapterConnection:
    """Open a harness connection from ``cmd:...``, ``tcp:host:port`` or ``unix:path``."""
    kind, _, rest = address.partition(":")
    if kind == "cmd" and rest:
        return _spawn(rest, timeout)
    if kind == "tcp":
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp adapter address {address!r}")
        return _socket(socket.AF_INET, (host, int(port)), timeout)
    if kind == "unix" and rest:
        return _socket(socket.AF_UNIX, rest, timeout)
    raise ValueError(f"unsupported adapter address {address!r}; use cmd:, tcp: or unix:")


def parse_reply(line: bytes, cmp_total: Optional[int] = None,
                map_size: int = MAP_SIZE) -> ExecutionRecord:
    try:
        reply = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"malformed JSON reply: {exc}") from None
    if not isinstance(reply, dict):
        raise ProtocolError("reply must be a JSON object")
    for key in ("edges", "exec_cost_us", "stack_bytes", "cmp_matched"):
        if key not in reply:
            raise ProtocolError(f"reply is missing {key!r}")
    edges = reply["edges"]
    if not isinstance(edges, list) or not all(
            isinstance(e, int) and not isinstance(e, bool) for e in edges):
        raise ProtocolError("edges must be a list of integers")
    for key in ("exec_cost_us", "stack_bytes", "cmp_matched"):
        v = reply[key]
        if not isinstance(v, int) or isinstance(v, bool):
            raise ProtocolError(f"{key} must be an integer")
    if any(e < 0 or e >= map_size for e in edges):
        raise RecordValidationError(f"edge id outside [0, {map_size})")
    if reply["exec_cost_us"] <= 0:
        raise RecordValidationError("exec_cost_us must be positive")
    if reply["stack_bytes"] < 0 or reply["cmp_matched"] < 0:
        raise RecordValidationError("stack_bytes and cmp_matched must be non-negative")
    if cmp_total is not None and reply["cmp_matched"] > cmp_total:
        raise RecordValidationError(
            f"cmp_matched {reply['cmp_matched']} exceeds declared total {cmp_total}")
    return ExecutionRecord(tuple(edges), reply["exec_cost_us"], reply["stack_bytes"],
                           reply["cmp_matched"])


def adapter_execute(conn: AdapterConnection, data: bytes,
                    cmp_total: Optional[int] = None) -> ExecutionRecord:
    if not data:
        raise ValueError("cannot execute an empty input")
    return parse_reply(conn.request(data), cmp_total)


class AdapterTarget:
    """Executor over a harness connection: one retry, then the input is skipped."""

    def __init__(self, conn: AdapterConnection, cmp_total: Optional[int] = None) -> None:
        self.conn = conn
        self.cmp_total = cmp_total
        self.skipped = 0
        self.failures = 0

    def execute(self, data: bytes) -> Optional[ExecutionRecord]:
        for attempt in range(2):
            try:
                return adapter_execute(self.conn, data, self.cmp_total)
            except ExecutionError as exc:
                self.failures += 1
                log.warning("harness execution failed (attempt %d): %s", attempt + 1, exc)
        self.skipped += 1
        return None

    def run(self, data: bytes):
        """Kernel-style tuple, or ``None`` when the input was skipped."""
        rec = self.execute(data)
        if rec is None:
            return None
        return rec.edges, rec.exec_cost, rec.stack_bytes, rec.cmp_matched

    def close(self) -> None:
        self.conn.close()
