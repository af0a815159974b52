"""Client for external scorers speaking newline-delimited JSON.

Request:  ``{"id": int, "tokens": [str, ...]}``
Response: ``{"id": int, "logprobs": [float, ...]}`` with one entry per token.

Transport is either the stdio of a child process or a TCP socket.  Responses
may come back in any order and are matched to requests by id.
"""

from __future__ import annotations

import itertools
import json
import math
import shlex
import socket
import subprocess
import threading
from concurrent.futures import Future
from concurrent.futures import TimeoutError as _FutureTimeout
from dataclasses import dataclass
from typing import IO, Callable, Optional, Sequence

from .ngram import EOS


class ScorerError(RuntimeError):
    pass


class Timeout(ScorerError):
    pass


class ProtocolError(ScorerError):
    def __init__(self, line: str, reason: str = ""):
        super().__init__(f"bad scorer response ({reason}): {line[:200]!r}")
        self.line = line


class ScorerCrashed(ScorerError):
    pass


@dataclass(frozen=True)
class ScoreRequest:
    id: int
    tokens: tuple[str, ...]

    def to_line(self) -> bytes:
        return (json.dumps({"id": self.id, "tokens": list(self.tokens)}, ensure_ascii=False)
                + "\n").encode("utf-8")


@dataclass(frozen=True)
class ScoreResponse:
    id: int
    logprobs: tuple[float, ...]


def parse_response(line: str) -> ScoreResponse:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        raise ProtocolError(line, "not JSON") from None
    if not isinstance(obj, dict) or set(obj) != {"id", "logprobs"}:
        raise ProtocolError(line, "expected keys id, logprobs")
    rid, lps = obj["id"], obj["logprobs"]
    if not isinstance(rid, int) or isinstance(rid, bool):
        raise ProtocolError(line, "id must be an integer")
    if not isinstance(lps, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) and not math.isnan(x)
            for x in lps):
        raise ProtocolError(line, "logprobs must be a list of numbers")
    return ScoreResponse(rid, tuple(float(x) for x in lps))


class ExternalScorer:
    """Multiplexes requests over one line-oriented byte stream pair.

    At most ``max_in_flight`` requests are outstanding at once.  Several
    threads may call :meth:`roundtrip` concurrently.
    """

    def __init__(self, rfile: IO[bytes], wfile: IO[bytes], max_in_flight: int = 64,
                 timeout: float = 60.0, append_eos: bool = True,
                 closer: Optional[Callable[[], None]] = None):
        self._rfile = rfile
        self._wfile = wfile
        self.timeout = timeout
        self.append_eos = append_eos
        self._closer = closer
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._pending: dict[int, tuple[Future, int]] = {}
        self._ids = itertools.count()
        self._dead: Optional[ScorerError] = None
        self.peak_in_flight = 0
        self._after_reader: Optional[Callable[[], None]] = None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    @classmethod
    def spawn(cls, command: str | Sequence[str], **kw) -> "ExternalScorer":
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)

        def close():
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
            proc.stdout.close()

        client = cls(proc.stdout, proc.stdin, closer=close, **kw)
        client.process = proc
        return client

    @classmethod
    def connect(cls, host: str, port: int, **kw) -> "ExternalScorer":
        sock = socket.create_connection((host, port))
        rfile = sock.makefile("rb")
        wfile = sock.makefile("wb")

        def close():
            # shut down first so a blocked reader sees EOF and releases its buffer lock
            try:
                wfile.flush()
            except OSError:
                pass
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass

        def after_reader():
            for f in (wfile, rfile):
                try:
                    f.close()
                except OSError:
                    pass
            sock.close()

        client = cls(rfile, wfile, closer=close, **kw)
        client._after_reader = after_reader
        return client

    def _release(self, rid: int) -> Optional[tuple[Future, int]]:
        with self._lock:
            entry = self._pending.pop(rid, None)
        if entry is not None:
            self._slots.release()
        return entry

    def _fail_all(self, exc: ScorerError) -> None:
        with self._lock:
            ids = list(self._pending)
        for rid in ids:
            entry = self._release(rid)
            if entry is not None and not entry[0].done():
                entry[0].set_exception(exc)

    def _read_loop(self) -> None:
        try:
            for raw in self._rfile:
                line = raw.decode("utf-8", errors="replace").rstrip("\r\n")
                if not line:
                    continue
                try:
                    resp = parse_response(line)
                except ProtocolError as exc:
                    self._fail_all(exc)
                    continue
                entry = self._release(resp.id)
                if entry is None:
                    self._fail_all(ProtocolError(line, f"unknown id {resp.id}"))
                    continue
                fut, expected = entry
                if len(resp.logprobs) != expected:
                    fut.set_exception(ProtocolError(
                        line, f"expected {expected} logprobs, got {len(resp.logprobs)}"))
                else:
                    fut.set_result(resp)
        except (OSError, ValueError):
            pass
        self._dead = ScorerCrashed("scorer closed its output stream")
        self._fail_all(self._dead)

    def submit(self, request: ScoreRequest) -> Future:
        if self._dead is not None:
            raise self._dead
        if not self._slots.acquire(timeout=self.timeout):
            raise Timeout(f"no free request slot within {self.timeout}s")
        fut: Future = Future()
        with self._lock:
            if request.id in self._pending:
                self._slots.release()
                raise ValueError(f"request id {request.id} already in flight")
            self._pending[request.id] = (fut, len(request.tokens))
            self.peak_in_flight = max(self.peak_in_flight, len(self._pending))
        if self._dead is not None:
            self._release(request.id)
            raise self._dead
        try:
            with self._write_lock:
                self._wfile.write(request.to_line())
                self._wfile.flush()
        except (OSError, ValueError) as exc:
            self._release(request.id)
            raise ScorerCrashed(f"cannot write to scorer: {exc}") from exc
        return fut

    def _wait(self, rid: int, fut: Future) -> ScoreResponse:
        try:
            return fut.result(timeout=self.timeout)
        except _FutureTimeout:
            self._release(rid)
            raise Timeout(f"no response for request {rid} within {self.timeout}s") from None

    def roundtrip(self, requests: Sequence[ScoreRequest]) -> list[ScoreResponse]:
        """Send a batch; responses are returned in request order."""
        ids = [r.id for r in requests]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate request ids in batch")
        futures = [(r.id, self.submit(r)) for r in requests]
        return [self._wait(rid, fut) for rid, fut in futures]

    def score_batch(self, batch: Sequence[Sequence[str]]) -> list[list[float]]:
        reqs = [ScoreRequest(next(self._ids), tuple(toks)) for toks in batch]
        return [list(r.logprobs) for r in self.roundtrip(reqs)]

    def score(self, tokens: Sequence[str]) -> list[float]:
        return self.score_batch([tokens])[0]

    def score_document(self, tokens: Sequence[str]) -> float:
        """Sum of token log-probs; with ``append_eos`` an EOS token is scored last."""
        toks = list(tokens) + [EOS] if self.append_eos else list(tokens)
        return math.fsum(self.score(toks))

    def close(self) -> None:
        if self._closer is not None:
            self._closer()
            self._closer = None
        self._reader.join(timeout=5)
        if self._after_reader is not None:
            self._after_reader()
            self._after_reader = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_scorer_roundtrip(client: ExternalScorer,
                              requests: Sequence[ScoreRequest]) -> list[ScoreResponse]:
    return client.roundtrip(requests)
