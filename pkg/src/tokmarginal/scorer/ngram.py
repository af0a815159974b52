"""Interpolated absolute-discounting token n-gram model.

    P_m(t | h) = max(c(h, t) - d, 0) / c(h) + d * N1+(h .) / c(h) * P_{m-1}(t | h')

with ``h'`` the context minus its oldest token, backing off to a uniform
distribution over the vocabulary (tokeniser tokens plus EOS).  Contexts with
no counts fall straight through to the lower order.  BOS only ever appears
as context padding.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from typing import Iterable, Sequence

BOS = "<s>"
EOS = "</s>"


class EmptyCorpus(ValueError):
    pass


class UnknownToken(KeyError):
    pass


class NGramModel:
    def __init__(self, order: int, discount: float, vocab: Sequence[str],
                 counts: list[dict[tuple, dict[str, int]]]):
        if order < 1:
            raise ValueError("order must be >= 1")
        if not 0 < discount < 1:
            raise ValueError("discount must lie in (0, 1)")
        self.order = order
        self.discount = discount
        self.vocab = tuple(dict.fromkeys(list(vocab) + [EOS]))
        self._vocab_set = frozenset(self.vocab)
        self.counts = counts
        self._totals = [{h: sum(c.values()) for h, c in level.items()} for level in counts]

    def _prob(self, token: str, context: tuple) -> float:
        p = 1.0 / len(self.vocab)
        d = self.discount
        for m in range(1, self.order + 1):
            h = context[len(context) - (m - 1):] if m > 1 else ()
            level = self.counts[m - 1].get(h)
            if not level:
                continue
            total = self._totals[m - 1][h]
            c = level.get(token, 0)
            p = max(c - d, 0.0) / total + d * len(level) / total * p
        return p

    def _context(self, history: Sequence[str]) -> tuple:
        if self.order == 1:
            return ()
        padded = [BOS] * (self.order - 1) + list(history)
        return tuple(padded[-(self.order - 1):])

    def prob(self, token: str, history: Sequence[str] = ()) -> float:
        if token not in self._vocab_set:
            raise UnknownToken(token)
        return self._prob(token, self._context(history))

    def logprob(self, token: str, history: Sequence[str] = ()) -> float:
        return math.log(self.prob(token, history))

    def score(self, tokens: Sequence[str]) -> list[float]:
        """Per-token conditional log-probabilities (nats)."""
        out = []
        for i, t in enumerate(tokens):
            if t not in self._vocab_set or t == EOS:
                raise UnknownToken(t)
            out.append(math.log(self._prob(t, self._context(tokens[:i]))))
        return out

    def score_document(self, tokens: Sequence[str]) -> float:
        """log P(tokens, EOS): the per-token sum plus the terminal EOS prediction."""
        return math.fsum(self.score(tokens)) + math.log(self._prob(EOS, self._context(tokens)))

    def score_batch(self, batch: Sequence[Sequence[str]]) -> list[list[float]]:
        return [self.score(t) for t in batch]

    def to_json(self) -> str:
        return json.dumps({
            "format_version": 1,
            "order": self.order,
            "discount": self.discount,
            "vocab": [t for t in self.vocab if t != EOS],
            "counts": [[[list(h), c] for h, c in sorted(level.items())] for level in self.counts],
        }, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "NGramModel":
        d = json.loads(text)
        counts = [{tuple(h): dict(c) for h, c in level} for level in d["counts"]]
        return cls(d["order"], d["discount"], d["vocab"], counts)


def train_ngram(corpus: Iterable[Sequence[str]], order: int, discount: float,
                vocab: Iterable[str]) -> NGramModel:
    """Count n-grams over token sequences; every document ends in EOS."""
    if not 0 < discount < 1:
        raise ValueError("discount must lie in (0, 1)")
    vocab = list(vocab)
    known = set(vocab)
    counts: list[dict] = [defaultdict(Counter) for _ in range(order)]
    n_docs = 0
    for doc in corpus:
        n_docs += 1
        seq = [BOS] * (order - 1) + list(doc) + [EOS]
        for i in range(order - 1, len(seq)):
            t = seq[i]
            if t not in known and t != EOS:
                raise UnknownToken(t)
            for m in range(1, order + 1):
                h = tuple(seq[i - m + 1:i])
                counts[m - 1][h][t] += 1
    if n_docs == 0:
        raise EmptyCorpus("no documents")
    return NGramModel(order, discount, vocab, [{h: dict(c) for h, c in lv.items()} for lv in counts])


class CacheNGram:
    """N-gram model mixed with a document-level unigram cache.

    ``P(t | h) = (1 - lam) P_ngram(t | h) + lam * count_h(t) / |h|``; the
    cache term is dropped before the first token.
    """

    def __init__(self, model: NGramModel, lam: float = 0.1):
        self.model = model
        self.lam = lam

    def _mix(self, p: float, token: str, cache: Counter, seen: int) -> float:
        if seen == 0:
            return p
        return (1 - self.lam) * p + self.lam * cache[token] / seen

    def score(self, tokens: Sequence[str]) -> list[float]:
        cache: Counter = Counter()
        out = []
        for i, t in enumerate(tokens):
            p = self.model.prob(t, tokens[:i])
            out.append(math.log(self._mix(p, t, cache, i)))
            cache[t] += 1
        return out

    def score_document(self, tokens: Sequence[str]) -> float:
        cache = Counter(tokens)
        p_eos = self._mix(self.model.prob(EOS, tokens), EOS, cache, len(tokens))
        return math.fsum(self.score(tokens)) + math.log(p_eos)

    def score_batch(self, batch: Sequence[Sequence[str]]) -> list[list[float]]:
        return [self.score(t) for t in batch]


class UniformScorer:
    """Every token (and EOS) gets probability 1/size."""

    def __init__(self, size: int):
        self.size = size

    def score(self, tokens: Sequence[str]) -> list[float]:
        return [-math.log(self.size)] * len(tokens)

    def score_document(self, tokens: Sequence[str]) -> float:
        return -math.log(self.size) * (len(tokens) + 1)

    def score_batch(self, batch):
        return [self.score(t) for t in batch]
