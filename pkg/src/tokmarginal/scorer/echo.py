"""Reference scorer that answers every request with zero log-probabilities.

Run as ``python -m tokmarginal.scorer.echo``.  Options let tests exercise
out-of-order delivery and malformed output.
"""

from __future__ import annotations

import argparse
import json
import queue
import socketserver
import sys
import threading
from typing import IO


def echo_loop(rfile: IO[bytes], wfile: IO[bytes], reverse: bool = False,
              malformed_every: int = 0, wrong_length_every: int = 0) -> None:
    """Serve requests until ``rfile`` hits EOF.

    With ``reverse`` every burst of requests that is already waiting is
    answered last-first.
    """
    inbox: queue.Queue = queue.Queue()

    def read():
        for raw in rfile:
            inbox.put(raw)
        inbox.put(None)

    threading.Thread(target=read, daemon=True).start()
    served = 0
    done = False
    while not done:
        burst = [inbox.get()]
        while True:
            try:
                burst.append(inbox.get_nowait())
            except queue.Empty:
                break
        if None in burst:
            done = True
            burst = burst[:burst.index(None)]
        if reverse:
            burst.reverse()
        for raw in burst:
            req = json.loads(raw)
            served += 1
            n = len(req["tokens"])
            if malformed_every and served % malformed_every == 0:
                line = "this is not json"
            else:
                if wrong_length_every and served % wrong_length_every == 0:
                    n += 1
                line = json.dumps({"id": req["id"], "logprobs": [0.0] * n})
            wfile.write((line + "\n").encode("utf-8"))
        wfile.flush()


def make_tcp_server(host: str = "127.0.0.1", port: int = 0, **opts) -> socketserver.ThreadingTCPServer:
    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            echo_loop(self.rfile, self.wfile, **opts)

    server = socketserver.ThreadingTCPServer((host, port), Handler)
    server.daemon_threads = True
    return server


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reverse", action="store_true")
    ap.add_argument("--malformed-every", type=int, default=0)
    ap.add_argument("--wrong-length-every", type=int, default=0)
    ap.add_argument("--tcp", type=int, default=None, metavar="PORT")
    args = ap.parse_args(argv)
    opts = dict(reverse=args.reverse, malformed_every=args.malformed_every,
                wrong_length_every=args.wrong_length_every)
    if args.tcp is not None:
        with make_tcp_server(port=args.tcp, **opts) as srv:
            srv.serve_forever()
    else:
        echo_loop(sys.stdin.buffer, sys.stdout.buffer, **opts)


if __name__ == "__main__":
    main()
