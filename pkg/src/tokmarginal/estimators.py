"""Marginal-likelihood estimators, perplexity and the marginal gap.

Everything is accumulated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp as _lse

from ._logmath import NEG_INF, logsumexp
from .lattice import Tokenisation
from .sampler import Mode, SampleSet

ONE_BEST = "one-best"
ESTIMATORS = ("wr", "wor", "wor1best", "nbest")


class ModeMismatch(ValueError):
    pass


def log_q_kappa(log_q: float, kappa: Optional[float]) -> float:
    """log P(Gumbel(log_q) > kappa) = log(1 - exp(-exp(log_q - kappa)))."""
    if kappa is None or kappa == NEG_INF:
        return 0.0
    x = log_q - kappa
    if x < -30.0:
        # log(1 - exp(-e)) = log(e) - e/2 + O(e^2) with e = exp(x)
        return x - 0.5 * math.exp(x)
    return math.log(-math.expm1(-math.exp(x)))


def q_kappa(log_q: float, kappa: Optional[float]) -> float:
    """Inclusion probability of a WOR sample with log-probability ``log_q``."""
    if kappa is None or kappa == NEG_INF:
        return 1.0
    return -math.expm1(-math.exp(log_q - kappa))


@dataclass(frozen=True)
class ScoredSample:
    tokenisation: Tokenisation
    log_p: float
    log_q_cond: float
    q_kappa: Optional[float] = None


def score_sample_set(samples: SampleSet, log_p: Sequence[float]) -> list[ScoredSample]:
    if len(log_p) != len(samples):
        raise ValueError("one model score per sample required")
    out = []
    for (tok, _), lp in zip(samples.samples, log_p):
        q = None
        if samples.mode is not Mode.WR:
            q = 1.0 if samples.exhausted else q_kappa(tok.log_q_cond, samples.kappa)
        out.append(ScoredSample(tok, float(lp), tok.log_q_cond, q))
    return out


def est_wr_iwae(log_p: Sequence[float], log_q: Sequence[float]) -> float:
    """log of the mean importance weight P(T, D) / Q(T | D)."""
    lw = np.asarray(log_p, dtype=float) - np.asarray(log_q, dtype=float)
    if lw.size == 0:
        raise ValueError("need at least one sample")
    return float(_lse(lw) - math.log(lw.size))


def est_jensen(log_p: Sequence[float], log_q: Sequence[float]) -> float:
    """Mean log importance weight; a looser lower bound kept for diagnostics."""
    return float(np.mean(np.asarray(log_p, dtype=float) - np.asarray(log_q, dtype=float)))


def est_wor(samples: SampleSet, log_p: Sequence[float]) -> float:
    """log sum_i P(T_i, D) / q_kappa(T_i); the exact sum when exhausted."""
    if samples.mode is not Mode.WOR:
        raise ModeMismatch(f"expected WOR samples, got {samples.mode.value}")
    lp = np.asarray(log_p, dtype=float)
    if samples.exhausted:
        # order-independent, so every seed gives the same bits
        return logsumexp(lp.tolist())
    lq = [log_q_kappa(t.log_q_cond, samples.kappa) for t in samples.tokenisations]
    return float(_lse(lp - np.asarray(lq)))


def est_wor_1best(samples: SampleSet, log_p: Sequence[float]) -> float:
    """P(T*, D) plus the WOR estimate of the remaining mass.

    ``samples`` holds the 1-best first; the others were drawn without
    replacement from Q with the 1-best excluded.
    """
    if samples.mode is not Mode.WOR_1BEST or not samples.contains_best:
        raise ModeMismatch(f"expected WOR+1-best samples, got {samples.mode.value}")
    lp = np.asarray(log_p, dtype=float)
    if samples.exhausted or len(lp) == 1:
        return logsumexp(lp.tolist())
    rest = lp[1:] - np.asarray([log_q_kappa(t.log_q_cond, samples.kappa)
                                for t in samples.tokenisations[1:]])
    return float(np.logaddexp(lp[0], _lse(rest)))


def est_nbest(log_p: Sequence[float]) -> float:
    """log sum of model probabilities over the n-best list (a lower bound)."""
    lp = [float(x) for x in log_p]
    if not lp:
        raise ValueError("need at least one tokenisation")
    # exactly rounded sum keeps prefix sums monotone
    return logsumexp(lp)


def estimate(estimator: str, samples: SampleSet | None, log_p: Sequence[float]) -> float:
    """Dispatch by estimator id (``wr``, ``wor``, ``wor1best``, ``nbest``, ``jensen``)."""
    if estimator == "nbest":
        return est_nbest(log_p)
    if samples is None:
        raise ValueError(f"estimator {estimator!r} needs a SampleSet")
    if estimator in ("wr", "jensen"):
        if samples.mode is not Mode.WR:
            raise ModeMismatch(f"expected WR samples, got {samples.mode.value}")
        log_q = [t.log_q_cond for t in samples.tokenisations]
        return est_wr_iwae(log_p, log_q) if estimator == "wr" else est_jensen(log_p, log_q)
    if estimator == "wor":
        return est_wor(samples, log_p)
    if estimator == "wor1best":
        return est_wor_1best(samples, log_p)
    raise ValueError(f"unknown estimator {estimator!r}")


@dataclass
class DocumentResult:
    doc_id: int
    log_p_best: float
    log_p_marginal: dict[str, float]
    entropy_nats: float
    whitespace_token_count: int
    provenance: dict = field(default_factory=dict)

    @property
    def marginal_gap_per_token(self) -> dict[str, float]:
        return {k: (v - self.log_p_best) / self.whitespace_token_count
                for k, v in self.log_p_marginal.items()}

    @property
    def entropy_per_token(self) -> float:
        return self.entropy_nats / self.whitespace_token_count

    def log_p(self, which: str) -> float:
        return self.log_p_best if which == ONE_BEST else self.log_p_marginal[which]

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "log_p_best": self.log_p_best,
            "log_p_marginal": dict(sorted(self.log_p_marginal.items())),
            "entropy_nats": self.entropy_nats,
            "whitespace_token_count": self.whitespace_token_count,
            "marginal_gap_per_token": dict(sorted(self.marginal_gap_per_token.items())),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DocumentResult":
        return cls(d["doc_id"], d["log_p_best"], dict(d["log_p_marginal"]), d["entropy_nats"],
                   d["whitespace_token_count"], dict(d.get("provenance", {})))


def perplexity(results: Sequence[DocumentResult], which: str = ONE_BEST) -> float:
    """exp(-total log-likelihood / total whitespace-delimited words), base e."""
    if not results:
        raise ValueError("no results")
    total = math.fsum(r.log_p(which) for r in results)
    words = sum(r.whitespace_token_count for r in results)
    if words < 1:
        raise ValueError("word count must be positive")
    return math.exp(-total / words)
