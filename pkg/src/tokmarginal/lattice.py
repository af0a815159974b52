"""Segmentation lattices over whitespace-delimited text.

Nodes are character positions ``0..n`` of the document (Unicode code points,
not bytes).  Token edges never cross a word boundary; whitespace characters
are bridged by score-0 epsilon links so forward/backward recursions run over
one chain for the whole document.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._logmath import NEG_INF, logsumexp
from .vocab import Vocab, coverage_check, word_spans

EPSILON = -1


class Uncoverable(ValueError):
    def __init__(self, positions: Sequence[int]):
        super().__init__(f"text has no segmentation; blocking positions {list(positions)}")
        self.positions = list(positions)


class NotAPath(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    start: int
    end: int
    token_id: int
    score: float  # tokeniser score already divided by the temperature


@dataclass(frozen=True)
class Tokenisation:
    token_ids: tuple[int, ...]
    pieces: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]
    log_q_joint: float
    log_q_cond: float

    @property
    def ends(self) -> tuple[int, ...]:
        return tuple(e for _, e in self.spans)

    def __len__(self) -> int:
        return len(self.token_ids)


class Lattice:
    """All segmentations of ``text`` under ``vocab`` at a given temperature.

    Treat as immutable once built; use :func:`build_lattice`.
    """

    def __init__(self, text: str, vocab: Vocab, temperature: float, edges: list[Edge]):
        self.text = text
        self.vocab = vocab
        self.temperature = temperature
        self.num_positions = len(text) + 1
        self.word_spans = word_spans(text)
        self.edges = edges

        n = len(text)
        in_word = [False] * n
        for s, e in self.word_spans:
            for c in range(s, e):
                in_word[c] = True
        incoming: list[list[Edge]] = [[] for _ in range(n + 1)]
        outgoing: list[list[Edge]] = [[] for _ in range(n + 1)]
        for i in range(n):
            if not in_word[i]:
                eps = Edge(i, i + 1, EPSILON, 0.0)
                incoming[i + 1].append(eps)
                outgoing[i].append(eps)
        for e in edges:
            incoming[e.end].append(e)
            outgoing[e.start].append(e)
        for lst in incoming:
            lst.sort(key=lambda e: e.start)
        for lst in outgoing:
            lst.sort(key=lambda e: e.end)
        self._incoming = incoming
        self._outgoing = outgoing
        self._by_span = {(e.start, e.end): e for e in edges}

        alpha = np.full(n + 1, NEG_INF)
        alpha[0] = 0.0
        for i in range(1, n + 1):
            alpha[i] = logsumexp(alpha[e.start] + e.score for e in incoming[i])
        beta = np.full(n + 1, NEG_INF)
        beta[n] = 0.0
        for j in range(n - 1, -1, -1):
            beta[j] = logsumexp(e.score + beta[e.end] for e in outgoing[j])
        self.alpha = alpha
        self.beta = beta

    @property
    def n(self) -> int:
        return self.num_positions - 1

    @property
    def log_normalizer(self) -> float:
        """log Q(D): total (tempered) score mass over all paths."""
        return float(self.alpha[self.n])

    def incoming(self, i: int) -> list[Edge]:
        return self._incoming[i]

    def outgoing(self, j: int) -> list[Edge]:
        return self._outgoing[j]

    def edge(self, start: int, end: int) -> Edge | None:
        return self._by_span.get((start, end))

    def edge_log_posterior(self, e: Edge) -> float:
        """log of the right-to-left transition probability of ``e`` at node ``e.end``."""
        return float(self.alpha[e.start] + e.score - self.alpha[e.end])

    def tokenisation_from_edges(self, edges: Sequence[Edge]) -> Tokenisation:
        """Build a Tokenisation from token edges given left to right."""
        joint = 0.0
        for e in edges:
            joint += e.score
        toks = self.vocab.tokens
        return Tokenisation(
            token_ids=tuple(e.token_id for e in edges),
            pieces=tuple(toks[e.token_id] for e in edges),
            spans=tuple((e.start, e.end) for e in edges),
            log_q_joint=joint,
            log_q_cond=joint - self.log_normalizer,
        )

    def path_from_ends(self, ends: Sequence[int]) -> Tokenisation:
        """Tokenisation whose token spans end at ``ends`` (whitespace skipped)."""
        edges = []
        pos = 0
        spans = iter(self.word_spans)
        word = next(spans, None)
        for end in ends:
            while word is not None and pos >= word[1]:
                word = next(spans, None)
            if word is not None and pos < word[0]:
                pos = word[0]
            e = self.edge(pos, end)
            if e is None:
                raise NotAPath(f"no edge {pos}->{end}")
            edges.append(e)
            pos = end
        tok = self.tokenisation_from_edges(edges)
        _check_tiling(self, tok)
        return tok

    def render(self, tok: Tokenisation) -> str:
        """Place token surfaces at their spans, keeping the original whitespace."""
        out = [c if c.isspace() else "\0" for c in self.text]
        for piece, (s, e) in zip(tok.pieces, tok.spans):
            out[s:e] = self.vocab.surface(piece)
        return "".join(out)

    def to_json(self) -> str:
        toks = self.vocab.tokens
        return json.dumps({
            "text": self.text,
            "temperature": self.temperature,
            "nodes": self.num_positions,
            "edges": [{"start": e.start, "end": e.end, "token": toks[e.token_id], "score": e.score}
                      for e in self.edges],
            "alpha": [float(a) for a in self.alpha],
            "beta": [float(b) for b in self.beta],
        }, ensure_ascii=False)


def build_lattice(text: str, vocab: Vocab, temperature: float = 1.0) -> Lattice:
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    maxlen = vocab.max_surface_len
    edges = []
    for s, e in word_spans(text):
        for j in range(s, e):
            for i in range(j + 1, min(e, j + maxlen) + 1):
                tid = vocab.match(text[j:i], j == s)
                if tid is not None:
                    edges.append(Edge(j, i, tid, vocab.entries[vocab.tokens[tid]] / temperature))
    lat = Lattice(text, vocab, temperature, edges)
    if lat.log_normalizer == NEG_INF:
        raise Uncoverable(coverage_check(vocab, text))
    return lat


def _check_tiling(lattice: Lattice, tok: Tokenisation) -> None:
    expected = iter(lattice.word_spans)
    spans = list(tok.spans)
    k = 0
    for s, e in expected:
        pos = s
        while pos < e:
            if k >= len(spans) or spans[k][0] != pos or spans[k][1] > e:
                raise NotAPath(f"spans do not tile word {lattice.text[s:e]!r}")
            pos = spans[k][1]
            k += 1
    if k != len(spans):
        raise NotAPath("extra spans beyond the last word")


def score_tokenisation(lattice: Lattice, tok: Tokenisation) -> tuple[float, float]:
    """(log Q(T, D), log Q(T | D)) of ``tok`` under ``lattice``."""
    _check_tiling(lattice, tok)
    joint = 0.0
    for tid, (s, e) in zip(tok.token_ids, tok.spans):
        edge = lattice.edge(s, e)
        if edge is None or edge.token_id != tid:
            raise NotAPath(f"no edge {s}->{e} for token id {tid}")
        joint += edge.score
    return joint, joint - lattice.log_normalizer


def _best_completion(lattice: Lattice) -> list[float]:
    n = lattice.n
    h = [NEG_INF] * (n + 1)
    h[n] = 0.0
    for j in range(n - 1, -1, -1):
        best = NEG_INF
        for e in lattice.outgoing(j):
            v = e.score + h[e.end]
            if v > best:
                best = v
        h[j] = best
    return h


def viterbi_nbest(lattice: Lattice, n: int) -> list[Tokenisation]:
    """The ``n`` highest-scoring paths, best first.

    A* search from node 0 with the exact best-completion score as heuristic.
    Equal scores are ordered by the lexicographic order of span end positions.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    h = _best_completion(lattice)
    final = lattice.n
    # heap entries: (-priority, ends, node, tiebreak, g, edges)
    heap = [(-h[0], (), 0, 0, 0.0, ())]
    pushed = 0
    done: list[tuple[float, tuple[int, ...], tuple[Edge, ...]]] = []
    cutoff = None
    while heap:
        negf, ends, node, _, g, edges = heapq.heappop(heap)
        if cutoff is not None and -negf < cutoff:
            break
        if node == final:
            done.append((g, ends, edges))
            if len(done) == n:
                # keep draining near-ties that rounding may have ordered late
                cutoff = g - 1e-9 * (1.0 + abs(g))
            continue
        for e in lattice.outgoing(node):
            if h[e.end] == NEG_INF:
                continue
            g2 = g + e.score
            new_edges = edges if e.token_id == EPSILON else edges + (e,)
            new_ends = ends if e.token_id == EPSILON else ends + (e.end,)
            pushed += 1
            heapq.heappush(heap, (-(g2 + h[e.end]), new_ends, e.end, pushed, g2, new_edges))
    done.sort(key=lambda d: (-d[0], d[1]))
    return [lattice.tokenisation_from_edges(edges) for _, _, edges in done[:n]]


def lattice_entropy(lattice: Lattice, bits: bool = False) -> float:
    """Shannon entropy of Q(T | D) over complete paths.

    ``H_i = sum_w p(w) (H_j - log p(w))`` over edges ``w: j -> i`` with
    ``p(w) = exp(alpha[j] + score(w) - alpha[i])``; returns ``H_n``.
    """
    alpha = lattice.alpha
    n = lattice.n
    H = [0.0] * (n + 1)
    for i in range(1, n + 1):
        if alpha[i] == NEG_INF:
            continue
        acc = 0.0
        for e in lattice.incoming(i):
            if alpha[e.start] == NEG_INF:
                continue
            logp = alpha[e.start] + e.score - alpha[i]
            acc += math.exp(logp) * (H[e.start] - logp)
        H[i] = acc
    out = max(float(H[n]), 0.0)
    return out / math.log(2) if bits else out
