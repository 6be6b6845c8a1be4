"""Reference harness: serves a synthetic target over the adapter protocol.

    python3 -m mobsched.harness --target cmp-heavy          # stdin/stdout
    python3 -m mobsched.harness --target cmp-heavy --unix /tmp/h.sock

Useful for exercising ``--adapter`` end to end.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import struct
import sys

from .simtarget import execute, load_target_spec


def _read_exact(read, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = read(n - len(buf))
        if not chunk:
            return b""
        buf += chunk
    return buf


def serve(spec, read, write) -> int:
    """Answer requests until EOF; returns the number served."""
    served = 0
    while True:
        header = _read_exact(read, 4)
        if not header:
            return served
        (length,) = struct.unpack("<I", header)
        data = _read_exact(read, length)
        rec = execute(spec, data)
        reply = {"edges": list(rec.edges), "exec_cost_us": rec.exec_cost,
                 "stack_bytes": rec.stack_bytes, "cmp_matched": rec.cmp_matched}
        write(json.dumps(reply).encode() + b"\n")
        served += 1


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="mobsched-harness", description=__doc__.splitlines()[0])
    p.add_argument("--target", required=True)
    p.add_argument("--unix", help="listen on this unix socket instead of stdio")
    args = p.parse_args(argv)
    spec = load_target_spec(args.target)
    if args.unix is None:
        stdin, stdout = sys.stdin.buffer, sys.stdout.buffer

        def write(b):
            stdout.write(b)
            stdout.flush()

        serve(spec, stdin.read, write)
        return 0
    if os.path.exists(args.unix):
        os.unlink(args.unix)
    srv = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    srv.bind(args.unix)
    srv.listen(1)
    conn, _ = srv.accept()
    with conn:
        serve(spec, conn.recv, conn.sendall)
    srv.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
