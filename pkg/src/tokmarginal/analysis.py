"""Diagnostics: caching study, entropy/gap correlation, sample-contribution
curves and temperature sweeps."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .estimators import DocumentResult, ScoredSample, perplexity
from .evaluation import EvalConfig, evaluate_corpus
from .lattice import Tokenisation
from .vocab import Vocab, word_spans


class DegenerateInput(ValueError):
    pass


class CacheClass(str, Enum):
    FIRST = "FIRST"
    SAME_TOK = "SAME_TOK"
    DIFF_TOK = "DIFF_TOK"


@dataclass(frozen=True)
class CachingRecord:
    word: str
    doc_id: int
    sample: int
    position: int
    cls: CacheClass
    loss: float
    multi_token: bool


def word_token_sequences(text: str, tok: Tokenisation) -> list[tuple[int, ...]]:
    """Indices of the tokens making up each whitespace word of ``text``."""
    spans = word_spans(text)
    out: list[list[int]] = [[] for _ in spans]
    w = 0
    for idx, (s, _) in enumerate(tok.spans):
        while s >= spans[w][1]:
            w += 1
        out[w].append(idx)
    return [tuple(x) for x in out]


def classify_occurrences(text: str, tok: Tokenisation) -> list[CacheClass]:
    """FIRST / SAME_TOK / DIFF_TOK for every word of one sampled tokenisation."""
    spans = word_spans(text)
    seen: dict[str, list[tuple[str, ...]]] = defaultdict(list)
    out = []
    for (s, e), idxs in zip(spans, word_token_sequences(text, tok)):
        word = text[s:e]
        seq = tuple(tok.pieces[i] for i in idxs)
        prior = seen[word]
        if not prior:
            out.append(CacheClass.FIRST)
        elif seq in prior:
            out.append(CacheClass.SAME_TOK)
        else:
            out.append(CacheClass.DIFF_TOK)
        prior.append(seq)
    return out


def caching_records(documents: Sequence[str], samples: Sequence[Sequence[Tokenisation]],
                    scorer) -> list[CachingRecord]:
    """Word-level losses ``-log P(w_k | w_<k)`` with their cache class.

    A word's loss is the summed token losses of the tokens spelling it.
    No importance weights are applied.
    """
    records = []
    for doc_id, (text, toks) in enumerate(zip(documents, samples)):
        spans = word_spans(text)
        for si, tok in enumerate(toks):
            lps = scorer.score(list(tok.pieces))
            classes = classify_occurrences(text, tok)
            groups = word_token_sequences(text, tok)
            for k, ((s, e), cls, idxs) in enumerate(zip(spans, classes, groups)):
                loss = -math.fsum(lps[i] for i in idxs)
                records.append(CachingRecord(text[s:e], doc_id, si, k, cls, loss, len(idxs) > 1))
    return records


@dataclass(frozen=True)
class CachingCell:
    mean_loss: Optional[float]
    count: int


def caching_table(records: Sequence[CachingRecord]) -> dict[tuple[str, CacheClass], CachingCell]:
    """Microaveraged loss per class for all words and for multi-token words.

    Empty classes get ``mean_loss=None``.
    """
    table = {}
    for subset in ("all", "multi_token"):
        for cls in CacheClass:
            losses = [r.loss for r in records
                      if r.cls is cls and (subset == "all" or r.multi_token)]
            table[(subset, cls)] = CachingCell(
                math.fsum(losses) / len(losses) if losses else None, len(losses))
    return table


def caching_analysis(documents: Sequence[str], samples: Sequence[Sequence[Tokenisation]],
                     scorer) -> dict[tuple[str, CacheClass], CachingCell]:
    return caching_table(caching_records(documents, samples, scorer))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("length mismatch")
    if len(x) < 3:
        raise DegenerateInput("need at least 3 points")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInput("a variable is constant")
    return float(stats.spearmanr(x, y).statistic)


@dataclass(frozen=True)
class Correlation:
    r: float
    pairs: list[tuple[float, float]]


def entropy_gap_correlation(results: Sequence[DocumentResult], estimator: str) -> Correlation:
    """Spearman r between entropy per word and marginal gap per word."""
    pairs = [(r.entropy_per_token, r.marginal_gap_per_token[estimator]) for r in results]
    if len(pairs) < 3:
        raise DegenerateInput("need at least 3 documents")
    xs, ys = zip(*pairs)
    return Correlation(spearman(xs, ys), pairs)


def sample_contribution_curve(samples: Sequence[Sequence[ScoredSample]],
                              word_counts: Sequence[int], order: str = "by_q") -> np.ndarray:
    """Corpus perplexity of the n-best sum over the first ``m`` samples of each document.

    ``order`` re-sorts each document's samples by tokeniser probability
    (``by_q``) or by model probability (``by_p``) before summing.
    Entry ``m - 1`` is the perplexity using ``m`` samples per document.
    """
    if order not in ("by_q", "by_p"):
        raise ValueError("order must be 'by_q' or 'by_p'")
    words = sum(word_counts)
    n = max(len(s) for s in samples)
    per_doc = []
    for doc in samples:
        key = (lambda s: -s.log_q_cond) if order == "by_q" else (lambda s: -s.log_p)
        lp = [s.log_p for s in sorted(doc, key=key)]
        acc = np.logaddexp.accumulate(np.asarray(lp))
        per_doc.append(np.concatenate([acc, np.full(n - len(acc), acc[-1])]))
    total = np.sum(per_doc, axis=0)
    return np.exp(-total / words)


@dataclass(frozen=True)
class SweepRow:
    temperature: float
    perplexity: float
    nbest_perplexity: float

    @property
    def percent_difference(self) -> float:
        return 100.0 * (self.perplexity - self.nbest_perplexity) / self.nbest_perplexity


def temperature_sweep(documents: Sequence[str], vocab: Vocab, scorer,
                      temperatures: Sequence[float], mode: str = "wor1best", k: int = 16,
                      consistent: bool = False, seed: int = 0, workers: int = 1) -> list[SweepRow]:
    """Perplexity of a sampling estimator at each temperature against the n-best baseline.

    The n-best baseline scores as many tokenisations as the sampler does
    (``k + 1`` for ``wor1best`` since it adds the 1-best).
    """
    if any(not t > 0 for t in temperatures):
        raise ValueError("temperatures must be positive")
    n_match = k + 1 if mode == "wor1best" else k
    base = evaluate_corpus(documents, vocab, scorer,
                           EvalConfig("nbest", n_match, 1.0, consistent, seed), workers)
    base_ppl = perplexity([e.result for e in base], "nbest")
    rows = []
    for tau in temperatures:
        evs = evaluate_corpus(documents, vocab, scorer,
                              EvalConfig(mode, k, tau, consistent, seed), workers)
        rows.append(SweepRow(tau, perplexity([e.result for e in evs], mode), base_ppl))
    return rows


def nbest_curve_inputs(evaluations) -> tuple[list[list[ScoredSample]], list[int]]:
    """Scored samples and word counts from n-best evaluations, for the contribution curve."""
    samples = [[ScoredSample(t, lp, t.log_q_cond) for t, lp in zip(ev.tokenisations, ev.log_p)]
               for ev in evaluations]
    return samples, [ev.result.whitespace_token_count for ev in evaluations]


__all__ = [
    "CacheClass", "CachingCell", "CachingRecord", "Correlation", "DegenerateInput", "SweepRow",
    "caching_analysis", "caching_records", "caching_table", "classify_occurrences",
    "entropy_gap_correlation", "nbest_curve_inputs", "sample_contribution_curve",
    "spearman", "temperature_sweep", "word_token_sequences",
]
