"""Drawing tokenisations from a segmentation lattice.

Every sampler walks the lattice right to left.  At node ``i`` the incoming
edge ``w: j -> i`` is taken with probability ``exp(alpha[j] + score(w) -
alpha[i])``; the product of these along a path is exactly Q(T | D).

Sampling without replacement is stochastic beam search over that locally
normalised tree.  A child's perturbed score is drawn from a Gumbel with
location ``log Q(prefix)`` truncated so that the maximum over siblings equals
the parent's perturbed score::

    v = T - g + log(1 - exp(g - Z))
    G = T - softplus(v) = T - max(v, 0) - log1p(exp(-|v|))

where ``T`` is the parent's key, ``g`` the child's untruncated Gumbel draw and
``Z`` the max of the sibling draws.  This is ``-log(exp(-T) - exp(-Z) +
exp(-g))`` rearranged to avoid cancellation.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from ._logmath import NEG_INF, log1mexp
from .lattice import EPSILON, Edge, Lattice, Tokenisation, build_lattice, viterbi_nbest
from .vocab import Vocab, word_spans

SeedLike = Union[int, np.random.Generator]


class Mode(str, Enum):
    WR = "wr"
    WOR = "wor"
    WOR_1BEST = "wor1best"


def make_rng(seed: int, doc_id: int = 0, stream: str = "") -> np.random.Generator:
    """Generator keyed by (seed, document id, stream name).

    Independent of worker scheduling, so parallel runs reproduce serial ones.
    """
    key = [seed & 0xFFFFFFFFFFFFFFFF, doc_id & 0xFFFFFFFFFFFFFFFF, zlib.crc32(stream.encode())]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def _as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(int(seed))


@dataclass(frozen=True)
class SampleSet:
    samples: tuple[tuple[Tokenisation, Optional[float]], ...]
    mode: Mode
    kappa: Optional[float]
    contains_best: bool
    exhausted: bool
    seed: Optional[int]
    temperature: float

    @property
    def tokenisations(self) -> list[Tokenisation]:
        return [t for t, _ in self.samples]

    @property
    def keys(self) -> list[Optional[float]]:
        return [g for _, g in self.samples]

    def __len__(self) -> int:
        return len(self.samples)


def _seed_value(seed: SeedLike) -> Optional[int]:
    return None if isinstance(seed, np.random.Generator) else int(seed)


def _live_incoming(lattice: Lattice, i: int) -> list[Edge]:
    alpha = lattice.alpha
    return [e for e in lattice.incoming(i) if alpha[e.start] != NEG_INF]


def sample_wr(lattice: Lattice, k: int, seed: SeedLike) -> SampleSet:
    """``k`` i.i.d. ancestral samples from Q(T | D)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = _as_rng(seed)
    alpha = lattice.alpha
    cdf_cache: dict[int, tuple[list[Edge], np.ndarray]] = {}
    out = []
    for _ in range(k):
        i = lattice.n
        rev: list[Edge] = []
        while i > 0:
            if i not in cdf_cache:
                inc = _live_incoming(lattice, i)
                p = np.exp([alpha[e.start] + e.score - alpha[i] for e in inc])
                cdf_cache[i] = (inc, np.cumsum(p) / p.sum())
            inc, cdf = cdf_cache[i]
            if len(inc) == 1:
                e = inc[0]
            else:
                e = inc[min(int(np.searchsorted(cdf, rng.random(), side="right")), len(inc) - 1)]
            if e.token_id != EPSILON:
                rev.append(e)
            i = e.start
        out.append((lattice.tokenisation_from_edges(rev[::-1]), None))
    return SampleSet(tuple(out), Mode.WR, None, False, False, _seed_value(seed),
                     lattice.temperature)


def _truncated_gumbel(parent: float, draws: np.ndarray) -> np.ndarray:
    z = draws.max()
    out = np.empty_like(draws)
    for idx, g in enumerate(draws):
        v = parent - g + log1mexp(min(g - z, 0.0))
        if v == NEG_INF:
            out[idx] = parent
        else:
            out[idx] = parent - max(v, 0.0) - math.log1p(math.exp(-abs(v)))
    return out


def stochastic_beam(lattice: Lattice, width: int, seed: SeedLike) -> list[tuple[Tokenisation, float]]:
    """Top-``width`` complete paths under Gumbel-perturbed log Q(T | D).

    Returned in decreasing order of perturbed score.  The frontier always
    forms a cut of the search tree, so pruning it to the ``width`` largest
    keys never drops a member of the global top ``width``.
    """
    rng = _as_rng(seed)
    alpha = lattice.alpha
    # hypothesis: (key, node, log_q_prefix, edges left to right)
    frontier = [(float(rng.gumbel()), lattice.n, 0.0, ())]
    while True:
        open_nodes = [h[1] for h in frontier if h[1] > 0]
        if not open_nodes:
            break
        node = max(open_nodes)
        keep = [h for h in frontier if h[1] != node]
        for key, i, logq, edges in (h for h in frontier if h[1] == node):
            inc = _live_incoming(lattice, i)
            logps = [alpha[e.start] + e.score - alpha[i] for e in inc]
            if len(inc) == 1:
                keys = [key]
            else:
                phis = logq + np.asarray(logps)
                keys = _truncated_gumbel(key, phis + rng.gumbel(size=len(inc)))
            for e, lp, g in zip(inc, logps, keys):
                new_edges = edges if e.token_id == EPSILON else (e,) + edges
                keep.append((float(g), e.start, logq + lp, new_edges))
        keep.sort(key=lambda h: -h[0])
        frontier = keep[:width]
    return [(lattice.tokenisation_from_edges(edges), key) for key, _, _, edges in frontier]


def sample_wor(lattice: Lattice, k: int, seed: SeedLike) -> SampleSet:
    """``k`` distinct paths via Gumbel-top-k; kappa is the (k+1)th key."""
    if k < 1:
        raise ValueError("k must be >= 1")
    beam = stochastic_beam(lattice, k + 2, seed)
    if len(beam) <= k:
        return SampleSet(tuple(beam), Mode.WOR, None, False, True, _seed_value(seed),
                         lattice.temperature)
    return SampleSet(tuple(beam[:k]), Mode.WOR, beam[k][1], False, False,
                     _seed_value(seed), lattice.temperature)


def sample_wor_with_best(lattice: Lattice, k: int, seed: SeedLike) -> SampleSet:
    """The 1-best path plus ``k`` distinct non-best paths.

    Takes ``k+1`` WOR draws from Q; drops the 1-best if drawn, otherwise the
    last draw.  kappa is the (k+2)th key if the 1-best was among the first
    ``k+1`` draws, else the (k+1)th.  The 1-best is stored first with no key.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    best = viterbi_nbest(lattice, 1)[0]
    beam = stochastic_beam(lattice, k + 2, seed)
    is_best = [t.spans == best.spans for t, _ in beam]
    head = ((best, None),)
    if len(beam) <= k + 1:
        rest = tuple(s for s, b in zip(beam, is_best) if not b)
        return SampleSet(head + rest, Mode.WOR_1BEST, None, True, True, _seed_value(seed),
                         lattice.temperature)
    if any(is_best[:k + 1]):
        rest = tuple(s for s, b in zip(beam[:k + 1], is_best) if not b)
        kappa = beam[k + 1][1]
    else:
        rest = tuple(beam[:k])
        kappa = beam[k][1]
    return SampleSet(head + rest, Mode.WOR_1BEST, kappa, True, False, _seed_value(seed),
                     lattice.temperature)


def draw(lattice: Lattice, mode: Union[Mode, str], k: int, seed: SeedLike) -> SampleSet:
    mode = Mode(mode)
    if mode is Mode.WR:
        return sample_wr(lattice, k, seed)
    if mode is Mode.WOR:
        return sample_wor(lattice, k, seed)
    return sample_wor_with_best(lattice, k, seed)


@dataclass(frozen=True)
class ConsistentProposal:
    """One lattice over the unique word types of a document.

    ``lattice`` covers the types joined by single spaces in first-occurrence
    order, so any path through it picks one tokenisation per type.
    :meth:`expand` copies that choice onto every occurrence in the document.
    """

    text: str
    types: tuple[str, ...]
    lattice: Lattice
    occurrences: tuple[tuple[int, int], ...]  # (type index, document offset) per word

    def expand(self, tok: Tokenisation) -> Tokenisation:
        type_spans = self.lattice.word_spans
        per_type: list[list[int]] = [[] for _ in self.types]
        t = 0
        for idx, (s, e) in enumerate(tok.spans):
            while s >= type_spans[t][1]:
                t += 1
            per_type[t].append(idx)
        ids, pieces, spans = [], [], []
        for t, offset in self.occurrences:
            shift = offset - type_spans[t][0]
            for idx in per_type[t]:
                s, e = tok.spans[idx]
                ids.append(tok.token_ids[idx])
                pieces.append(tok.pieces[idx])
                spans.append((s + shift, e + shift))
        return Tokenisation(tuple(ids), tuple(pieces), tuple(spans),
                            tok.log_q_joint, tok.log_q_cond)

    def expand_samples(self, samples: SampleSet) -> SampleSet:
        return SampleSet(tuple((self.expand(t), g) for t, g in samples.samples), samples.mode,
                         samples.kappa, samples.contains_best, samples.exhausted, samples.seed,
                         samples.temperature)


def build_consistent_proposal(document: str, vocab: Vocab, temperature: float = 1.0) -> ConsistentProposal:
    spans = word_spans(document)
    index: dict[str, int] = {}
    occ = []
    for s, e in spans:
        w = document[s:e]
        occ.append((index.setdefault(w, len(index)), s))
    types = tuple(index)
    lat = build_lattice(" ".join(types), vocab, temperature)
    return ConsistentProposal(document, types, lat, tuple(occ))

