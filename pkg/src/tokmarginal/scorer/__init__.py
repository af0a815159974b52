"""Token-sequence scorers: built-in n-gram models and an external-process client.

A scorer is anything with ``score(tokens) -> list[float]`` (per-token
conditional log-probabilities) and ``score_document(tokens) -> float``
(including the terminal EOS prediction).
"""

from .external import (ExternalScorer, ProtocolError, ScoreRequest, ScoreResponse,
                       ScorerCrashed, ScorerError, Timeout, external_scorer_roundtrip)
from .ngram import BOS, EOS, CacheNGram, EmptyCorpus, NGramModel, UniformScorer, UnknownToken, train_ngram


def score_tokens(scorer, tokens):
    return scorer.score(tokens)


__all__ = [
    "BOS", "EOS", "CacheNGram", "EmptyCorpus", "ExternalScorer", "NGramModel", "ProtocolError",
    "ScoreRequest", "ScoreResponse", "ScorerCrashed", "ScorerError", "Timeout", "UniformScorer",
    "UnknownToken", "external_scorer_roundtrip", "score_tokens", "train_ngram",
]
