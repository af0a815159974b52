"""Brute-force reference computations for short texts.

Deliberately shares no code with :mod:`tokmarginal.lattice`: segmentations
are enumerated by depth-first search over substrings and combined across
words by a cross product.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .vocab import Vocab

MAX_PATHS = 10**6


class TooManyPaths(RuntimeError):
    pass


@dataclass(frozen=True)
class EnumeratedPath:
    pieces: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]
    log_q_joint: float

    @property
    def ends(self) -> tuple[int, ...]:
        return tuple(e for _, e in self.spans)


@dataclass(frozen=True)
class EnumeratedLattice:
    text: str
    temperature: float
    paths: tuple[EnumeratedPath, ...]
    log_normalizer: float

    def log_q_cond(self, path: EnumeratedPath) -> float:
        return path.log_q_joint - self.log_normalizer

    @property
    def probabilities(self) -> list[float]:
        return [math.exp(p.log_q_joint - self.log_normalizer) for p in self.paths]

    def sorted_paths(self) -> list[EnumeratedPath]:
        """Paths by descending score, ties by lexicographic end positions."""
        return sorted(self.paths, key=lambda p: (-p.log_q_joint, p.ends))


def _words(text: str) -> list[tuple[int, str]]:
    out = []
    start = None
    for i, ch in enumerate(text + " "):
        if ch.isspace():
            if start is not None:
                out.append((start, text[start:i]))
                start = None
        elif start is None:
            start = i
    return out


def _token_for(vocab: Vocab, piece: str, initial: bool) -> str | None:
    marker = vocab.word_boundary_marker
    marked = bool(marker) and any(t.startswith(marker) for t in vocab.entries)
    if not marked:
        return piece if piece in vocab.entries else None
    if initial:
        cand = marker + piece
        return cand if cand in vocab.entries else None
    if piece.startswith(marker):
        return None
    return piece if piece in vocab.entries else None


def _segment_word(vocab: Vocab, word: str,
                  limit: int = MAX_PATHS) -> list[list[tuple[str, int, int]]]:
    results = []

    def rec(pos: int, acc: list):
        if pos == len(word):
            results.append(list(acc))
            if len(results) > limit:
                raise TooManyPaths(f"more than {limit} segmentations of {word!r}")
            return
        for end in range(pos + 1, len(word) + 1):
            tok = _token_for(vocab, word[pos:end], pos == 0)
            if tok is not None:
                acc.append((tok, pos, end))
                rec(end, acc)
                acc.pop()

    rec(0, [])
    return results


def enumerate_paths(text: str, vocab: Vocab, temperature: float = 1.0,
                    max_paths: int = MAX_PATHS) -> EnumeratedLattice:
    per_word = []
    total = 1
    for offset, word in _words(text):
        segs = _segment_word(vocab, word, max_paths // max(total, 1))
        total *= len(segs)
        if total > max_paths:
            raise TooManyPaths(f"more than {max_paths} paths")
        per_word.append([[(tok, offset + s, offset + e) for tok, s, e in seg] for seg in segs])
    paths = []
    for combo in itertools.product(*per_word):
        toks = [t for seg in combo for t in seg]
        score = 0.0
        for tok, _, _ in toks:
            score += vocab.entries[tok] / temperature
        paths.append(EnumeratedPath(tuple(t for t, _, _ in toks),
                                    tuple((s, e) for _, s, e in toks), score))
    if paths:
        m = max(p.log_q_joint for p in paths)
        z = m + math.log(sum(math.exp(p.log_q_joint - m) for p in paths))
    else:
        z = float("-inf")
    return EnumeratedLattice(text, temperature, tuple(paths), z)


def exact_marginal(enum: EnumeratedLattice,
                   log_p: Callable[[EnumeratedPath], float]) -> float:
    """log sum_T P(T, D) for a scorer given as a function of the path."""
    vals = [log_p(p) for p in enum.paths]
    m = max(vals)
    if m == float("-inf"):
        return m
    return m + math.log(sum(math.exp(v - m) for v in vals))


def exact_entropy(enum: EnumeratedLattice) -> float:
    return -sum(p * math.log(p) for p in enum.probabilities if p > 0)


def exact_expectation(enum: EnumeratedLattice,
                      f: Callable[[EnumeratedPath], float]) -> float:
    return sum(q * f(p) for q, p in zip(enum.probabilities, enum.paths))


def path_probabilities(enum: EnumeratedLattice) -> dict[tuple[int, ...], float]:
    """Q(T | D) keyed by span end positions."""
    return {p.ends: q for p, q in zip(enum.paths, enum.probabilities)}


def word_segmentation_counts(text: str, vocab: Vocab) -> Sequence[int]:
    return [len(_segment_word(vocab, w)) for _, w in _words(text)]
