import math

import numpy as np

from tokmarginal.vocab import BOUNDARY_MARKER, Vocab

AB = {"a": math.log(0.5), "b": math.log(0.5), "ab": math.log(0.25)}
AAA = {"a": math.log(0.4), "aa": math.log(0.2)}


def ab_vocab() -> Vocab:
    return Vocab(AB)


def aaa_vocab() -> Vocab:
    return Vocab(AAA)


def random_fixture(rng: np.random.Generator, max_chars: int = 12, max_tokens: int = 12):
    """A short text and a small vocab that segments it.

    Every single character of the alphabet is in the vocab, so the text is
    always coverable.  About a third of fixtures use boundary-marked tokens.
    """
    alphabet = "abc"[: rng.integers(1, 4)]
    length = int(rng.integers(1, max_chars + 1))
    chars = [alphabet[rng.integers(len(alphabet))] if rng.random() > 0.2 else " "
             for _ in range(length)]
    text = "".join(chars)
    if not text.strip():
        text = alphabet[0] + text[1:]
    marked = rng.random() < 0.35
    entries = {}
    for ch in alphabet:
        entries[ch] = float(rng.uniform(-4, -0.1))
        if marked:
            entries[BOUNDARY_MARKER + ch] = float(rng.uniform(-4, -0.1))
    tries = 0
    while len(entries) < max_tokens and tries < 40:
        tries += 1
        piece = "".join(alphabet[rng.integers(len(alphabet))] for _ in range(rng.integers(2, 5)))
        if marked and rng.random() < 0.5:
            piece = BOUNDARY_MARKER + piece
        entries.setdefault(piece, float(rng.uniform(-4, -0.1)))
        if rng.random() < 0.15:
            break
    return text, Vocab(entries)


def random_fixtures(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [random_fixture(rng) for _ in range(n)]


def toy_log_p_table(enum, seed: int = 0, low: float = -6.0, high: float = -1.0):
    """Fixed model scores log P(T, D) keyed by span end positions."""
    rng = np.random.default_rng(seed)
    return {p.ends: float(rng.uniform(low, high)) for p in enum.paths}
