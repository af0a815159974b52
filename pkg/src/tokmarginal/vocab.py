"""Unigram lexicon: token strings with (unnormalised) log-probability scores."""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Union

BOUNDARY_MARKER = "▁"

_WORD_RE = re.compile(r"\S+")


class VocabError(ValueError):
    pass


class MalformedLine(VocabError):
    def __init__(self, line_no: int, line: str = ""):
        super().__init__(f"line {line_no}: expected 'token<TAB>score', got {line!r}")
        self.line_no = line_no


class DuplicateToken(VocabError):
    def __init__(self, token: str):
        super().__init__(f"duplicate token {token!r}")
        self.token = token


class NonFiniteScore(VocabError):
    def __init__(self, token: str):
        super().__init__(f"non-finite score for token {token!r}")
        self.token = token


def word_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of the whitespace-delimited words of ``text``."""
    return [m.span() for m in _WORD_RE.finditer(text)]


def count_words(text: str) -> int:
    return len(word_spans(text))


@dataclass(frozen=True)
class Vocab:
    """Immutable token -> score table.

    Token ids are positions in insertion order.  If no token carries the
    boundary marker the vocab is *marker-free*: every token may match at any
    position inside a word.  Otherwise only marker-prefixed tokens match at
    word-initial positions and only unmarked tokens match word-internally.
    """

    entries: Mapping[str, float]
    word_boundary_marker: str = BOUNDARY_MARKER
    tokens: tuple[str, ...] = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False, compare=False)
    _marked: bool = field(init=False, repr=False, compare=False)
    _max_len: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        toks = tuple(self.entries)
        for t in toks:
            if not t:
                raise VocabError("empty token string")
            if not math.isfinite(self.entries[t]):
                raise NonFiniteScore(t)
        object.__setattr__(self, "entries", dict(self.entries))
        object.__setattr__(self, "tokens", toks)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(toks)})
        m = self.word_boundary_marker
        object.__setattr__(self, "_marked", bool(m) and any(t.startswith(m) for t in toks))
        object.__setattr__(self, "_max_len", max((len(self.surface(t)) for t in toks), default=0))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def score(self, token: str) -> float:
        return self.entries[token]

    def token_id(self, token: str) -> int:
        return self._index[token]

    def id_to_token(self, token_id: int) -> str:
        return self.tokens[token_id]

    @property
    def uses_marker(self) -> bool:
        return self._marked

    @property
    def max_surface_len(self) -> int:
        return self._max_len

    def surface(self, token: str) -> str:
        """The characters a token covers in running text (marker stripped)."""
        m = self.word_boundary_marker
        if m and token.startswith(m):
            return token[len(m):]
        return token

    def match(self, piece: str, word_initial: bool) -> int | None:
        """Token id matching the text ``piece`` at the given word position."""
        if self._marked:
            if word_initial:
                return self._index.get(self.word_boundary_marker + piece)
            if piece.startswith(self.word_boundary_marker):
                return None
        return self._index.get(piece)


def _parse_lines(lines: Iterable[str]) -> dict[str, float]:
    entries: dict[str, float] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        if line.count("\t") != 1:
            raise MalformedLine(line_no, line)
        token, score_s = line.split("\t")
        if not token:
            raise MalformedLine(line_no, line)
        try:
            score = float(score_s)
        except ValueError:
            raise MalformedLine(line_no, line) from None
        if token in entries:
            raise DuplicateToken(token)
        if not math.isfinite(score):
            raise NonFiniteScore(token)
        entries[token] = score
    return entries


def load_vocab(source: Union[IO[bytes], IO[str], bytes, str, Path],
               word_boundary_marker: str = BOUNDARY_MARKER) -> Vocab:
    """Load a ``token<TAB>score`` TSV vocabulary.

    ``source`` may be a binary or text stream, raw ``bytes``, or a path.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return load_vocab(fh, word_boundary_marker)
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return Vocab(_parse_lines(data.split("\n")), word_boundary_marker)


def loads_vocab(text: str, word_boundary_marker: str = BOUNDARY_MARKER) -> Vocab:
    return Vocab(_parse_lines(text.split("\n")), word_boundary_marker)


def dump_vocab(vocab: Vocab) -> str:
    return "".join(f"{t}\t{vocab.entries[t]!r}\n" for t in vocab.tokens)


def _segmentable_prefix(vocab: Vocab, word: str) -> tuple[int, list[bool]]:
    """Furthest node reachable from the word start, and the reachability map."""
    n = len(word)
    maxlen = vocab.max_surface_len
    reach = [False] * (n + 1)
    reach[0] = True
    for j in range(n):
        if not reach[j]:
            continue
        for i in range(j + 1, min(n, j + maxlen) + 1):
            if vocab.match(word[j:i], j == 0) is not None:
                reach[i] = True
    furthest = max(i for i in range(n + 1) if reach[i])
    return furthest, reach


def coverage_check(vocab: Vocab, text: str) -> list[int]:
    """Character positions that block segmentation of some word.

    Reports every character that no matching token covers.  If all
    characters of a word are covered yet the pieces do not chain into a full
    segmentation, the position where left-to-right segmentation gets stuck
    is reported instead.  An empty result means every word has at least one
    segmentation.
    """
    bad: list[int] = []
    maxlen = vocab.max_surface_len
    for start, end in word_spans(text):
        word = text[start:end]
        n = len(word)
        covered = [False] * n
        for j in range(n):
            for i in range(j + 1, min(n, j + maxlen) + 1):
                if vocab.match(word[j:i], j == 0) is not None:
                    for c in range(j, i):
                        covered[c] = True
        holes = [start + c for c in range(n) if not covered[c]]
        if holes:
            bad.extend(holes)
            continue
        furthest, reach = _segmentable_prefix(vocab, word)
        if not reach[n]:
            bad.append(start + furthest)
    return bad
