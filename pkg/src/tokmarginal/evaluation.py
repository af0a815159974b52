"""Per-document marginal-likelihood evaluation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

from .estimators import DocumentResult, est_jensen, est_nbest, estimate
from .lattice import Tokenisation, build_lattice, lattice_entropy, viterbi_nbest
from .sampler import Mode, SampleSet, build_consistent_proposal, draw, make_rng
from .vocab import Vocab, count_words

MODES = ("wr", "wor", "wor1best", "nbest")


@dataclass(frozen=True)
class EvalConfig:
    mode: str = "nbest"
    k: int = 128
    temperature: float = 1.0
    consistent: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass
class DocumentEvaluation:
    result: DocumentResult
    tokenisations: list[Tokenisation]
    log_p: list[float]
    sample_set: Optional[SampleSet]


def score_documents(scorer, batch: Sequence[Sequence[str]]) -> list[float]:
    fn = getattr(scorer, "score_documents", None)
    if fn is not None:
        return list(fn(batch))
    return [scorer.score_document(toks) for toks in batch]


def evaluate_document(doc_id: int, text: str, vocab: Vocab, scorer,
                      config: EvalConfig) -> DocumentEvaluation:
    base = build_lattice(text, vocab, 1.0)
    best = viterbi_nbest(base, 1)[0]
    log_p_best = score_documents(scorer, [best.pieces])[0]
    entropy = lattice_entropy(base)
    tau = config.temperature

    if config.consistent:
        prop = build_consistent_proposal(text, vocab, tau)
        lat, expand = prop.lattice, prop.expand
    else:
        lat = base if tau == 1.0 else build_lattice(text, vocab, tau)
        expand = None

    sample_set = None
    diagnostics = {}
    if config.mode == "nbest":
        toks = viterbi_nbest(lat, config.k)
        if expand is not None:
            toks = [expand(t) for t in toks]
        log_p = score_documents(scorer, [t.pieces for t in toks])
        est = est_nbest(log_p)
        exhausted = len(toks) < config.k
    else:
        rng = make_rng(config.seed, doc_id, config.mode)
        sample_set = draw(lat, Mode(config.mode), config.k, rng)
        if config.consistent:
            sample_set = prop.expand_samples(sample_set)
        toks = sample_set.tokenisations
        log_p = score_documents(scorer, [t.pieces for t in toks])
        est = estimate(config.mode, sample_set, log_p)
        exhausted = sample_set.exhausted
        if config.mode == "wr":
            diagnostics["jensen"] = est_jensen(log_p, [t.log_q_cond for t in toks])

    prov = dict(asdict(config), exhausted=exhausted, n_samples=len(toks))
    if diagnostics:
        prov["diagnostics"] = diagnostics
    result = DocumentResult(doc_id, log_p_best, {config.mode: est}, entropy,
                            count_words(text), prov)
    return DocumentEvaluation(result, list(toks), list(log_p), sample_set)


def evaluate_corpus(documents: Sequence[str], vocab: Vocab, scorer, config: EvalConfig,
                    workers: int = 1) -> list[DocumentEvaluation]:
    """Evaluate every document; output order follows document index."""
    def one(i):
        return evaluate_document(i, documents[i], vocab, scorer, config)

    if workers <= 1:
        return [one(i) for i in range(len(documents))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        out = list(pool.map(one, range(len(documents))))
    return sorted(out, key=lambda ev: ev.result.doc_id)
