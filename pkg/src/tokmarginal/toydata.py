"""Synthetic morphology corpora for desk-scale experiments.

Words are built from stems, prefixes and suffixes.  The in-domain corpus
uses a fixed set of frequent combinations; the out-of-domain text recombines
the same morphemes in ways the in-domain data rarely or never shows, so the
tokeniser's 1-best becomes less reliable there.

The lexicon is a frequency-derived unigram vocabulary (morphemes, frequent
whole words, and every single character), not an EM-trained one.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .vocab import BOUNDARY_MARKER, Vocab

_CONS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class ToyLanguage:
    stems: tuple[str, ...]
    prefixes: tuple[str, ...]
    suffixes: tuple[str, ...]
    words: tuple[tuple[str, ...], ...]  # in-domain word types as morpheme tuples
    word_probs: np.ndarray
    transitions: np.ndarray  # word-bigram matrix over word types


def _syllable(rng) -> str:
    return rng.choice(list(_CONS)) + rng.choice(list(_VOWELS))


def _morphemes(rng, count: int, syllables: tuple[int, int], taken: set) -> list[str]:
    out = []
    while len(out) < count:
        m = "".join(_syllable(rng) for _ in range(rng.integers(syllables[0], syllables[1] + 1)))
        if m not in taken:
            taken.add(m)
            out.append(m)
    return out


def make_language(seed: int = 0, n_stems: int = 60, n_words: int = 200) -> ToyLanguage:
    rng = np.random.default_rng(seed)
    taken: set = set()
    stems = _morphemes(rng, n_stems, (1, 3), taken)
    prefixes = _morphemes(rng, 6, (1, 1), taken)
    suffixes = _morphemes(rng, 8, (1, 1), taken)
    words = set()
    while len(words) < n_words:
        shape = rng.random()
        stem = stems[int(rng.zipf(1.3)) % n_stems]
        if shape < 0.45:
            w = (stem,)
        elif shape < 0.8:
            w = (stem, suffixes[rng.integers(len(suffixes))])
        else:
            w = (prefixes[rng.integers(len(prefixes))], stem)
        words.add(w)
    words = tuple(sorted(words))
    ranks = rng.permutation(len(words)) + 1
    probs = 1.0 / ranks ** 1.05
    probs /= probs.sum()
    trans = rng.dirichlet(np.full(len(words), 0.05), size=len(words))
    trans = 0.7 * trans + 0.3 * probs[None, :]
    return ToyLanguage(tuple(stems), tuple(prefixes), tuple(suffixes), words, probs, trans)


def in_domain_documents(lang: ToyLanguage, n_docs: int, seed: int = 1,
                        doc_len: tuple[int, int] = (15, 40)) -> list[list[tuple[str, ...]]]:
    """Documents as lists of words, each word a tuple of morphemes."""
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(n_docs):
        length = rng.integers(doc_len[0], doc_len[1] + 1)
        w = rng.choice(len(lang.words), p=lang.word_probs)
        doc = [lang.words[w]]
        for _ in range(length - 1):
            w = rng.choice(len(lang.words), p=lang.transitions[w])
            doc.append(lang.words[w])
        docs.append(doc)
    return docs


def out_of_domain_documents(lang: ToyLanguage, n_docs: int, seed: int = 2,
                            doc_len: tuple[int, int] = (10, 25)) -> list[str]:
    """Texts mixing in-domain words with novel compounds and affix stacks."""
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(n_docs):
        words = []
        for _ in range(rng.integers(doc_len[0], doc_len[1] + 1)):
            r = rng.random()
            if r < 0.4:
                words.append("".join(lang.words[rng.choice(len(lang.words), p=lang.word_probs)]))
            elif r < 0.7:
                a, b = rng.choice(len(lang.stems), size=2)
                words.append(lang.stems[a] + lang.stems[b])
            else:
                words.append(lang.prefixes[rng.integers(len(lang.prefixes))]
                             + lang.stems[rng.integers(len(lang.stems))]
                             + lang.suffixes[rng.integers(len(lang.suffixes))])
        docs.append(" ".join(words))
    return docs


def render(doc: list[tuple[str, ...]]) -> str:
    return " ".join("".join(w) for w in doc)


def build_vocab(lang: ToyLanguage, docs: list[list[tuple[str, ...]]],
                whole_words: int = 80, char_count: float = 2.0) -> Vocab:
    """Unigram lexicon with log relative-frequency scores.

    Counts come from the generator's own morpheme segmentation; the most
    frequent whole words are added as single tokens, and every character gets
    a small pseudo-count (word-initial and internal forms) so any text over
    the alphabet is segmentable.
    """
    counts: Counter = Counter()
    word_counts: Counter = Counter()
    for doc in docs:
        for w in doc:
            word_counts[w] += 1
            for i, m in enumerate(w):
                counts[(BOUNDARY_MARKER + m) if i == 0 else m] += 1
    for w, c in word_counts.most_common(whole_words):
        if len(w) > 1:
            counts[BOUNDARY_MARKER + "".join(w)] += c
            first = BOUNDARY_MARKER + w[0]
            counts[first] -= c
            counts[w[1]] -= c
    for ch in _CONS + _VOWELS:
        counts[BOUNDARY_MARKER + ch] += char_count
        counts[ch] += char_count
    counts = Counter({t: c for t, c in counts.items() if c > 0})
    total = sum(counts.values())
    return Vocab({t: math.log(c / total) for t, c in sorted(counts.items())})
