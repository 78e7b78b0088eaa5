"""Token normalization: tokenize, drop stopwords, lemmatize, stem."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

from ..ingest import CleanPost
from .lemmatize import DEFAULT_EXCEPTIONS, lemmatize, load_exceptions
from .porter import porter_stem

__all__ = [
    "PipelineConfig",
    "TokenDoc",
    "default_preserve_terms",
    "default_stopwords",
    "lemmatize",
    "load_exceptions",
    "porter_stem",
    "read_term_file",
    "remove_stopwords",
    "run_pipeline",
    "tokenize",
]

_SPLIT_RE = re.compile(r"[^\W_]+")


def _parse_term_lines(text: str) -> frozenset[str]:
    terms = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.add(line.lower())
    return frozenset(terms)


def read_term_file(path: str) -> frozenset[str]:
    """One term per line, ``#`` comment lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return _parse_term_lines(fh.read())


def _bundled(name: str) -> frozenset[str]:
    return _parse_term_lines(resources.files("setagger.data").joinpath(name).read_text("utf-8"))


def default_stopwords() -> frozenset[str]:
    return _bundled("stopwords_smart.txt")


def default_preserve_terms() -> frozenset[str]:
    return _bundled("preserve_terms.txt")


@dataclass(frozen=True)
class TokenDoc:
    id: int
    tokens: tuple[str, ...]
    tags: tuple[str, ...]


@dataclass(frozen=True)
class PipelineConfig:
    stopword_list: frozenset[str] = field(default_factory=default_stopwords)
    preserve_terms: frozenset[str] = field(default_factory=default_preserve_terms)
    enable_stemming: bool = True
    enable_lemmatization: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stopword_list", frozenset(self.stopword_list))
        object.__setattr__(self, "preserve_terms", frozenset(t.lower() for t in self.preserve_terms))
        clash = self.preserve_terms & self.stopword_list
        if clash:
            raise ValueError(f"terms both preserved and stopped: {sorted(clash)}")

    @property
    def preserve_pattern(self) -> re.Pattern | None:
        return _preserve_pattern(self.preserve_terms)


_PATTERN_CACHE: dict[frozenset[str], re.Pattern | None] = {}


def _preserve_pattern(terms: frozenset[str]) -> re.Pattern | None:
    if terms not in _PATTERN_CACHE:
        if not terms:
            _PATTERN_CACHE[terms] = None
        else:
            alternatives = []
            # Longest first so the regex alternation prefers the longest match.
            for term in sorted(terms, key=lambda t: (-len(t), t)):
                left = r"(?<![^\W_])" if _is_word_char(term[0]) else ""
                right = r"(?![^\W_])" if _is_word_char(term[-1]) else ""
                alternatives.append(left + re.escape(term) + right)
            _PATTERN_CACHE[terms] = re.compile("|".join(alternatives))
    return _PATTERN_CACHE[terms]


def _is_word_char(ch: str) -> bool:
    return ch.isalnum()


def _split(segment: str, preserve: frozenset[str]) -> list[str]:
    out = []
    for tok in _SPLIT_RE.findall(segment):
        if tok.isdigit():
            continue
        if len(tok) == 1 and tok not in preserve:
            continue
        out.append(tok)
    return out


def tokenize(text: str, config: PipelineConfig) -> list[str]:
    """Lowercase, keep preserve terms whole, split the rest on non-alphanumerics.

    A preserve term must sit on a word boundary only at those of its ends that
    are alphanumeric, so ``c++`` matches inside ``c++11`` while ``c++`` does
    not match inside ``abc++``. Pure-digit and single-character tokens are
    dropped.
    """
    text = text.lower()
    pattern = config.preserve_pattern
    if pattern is None:
        return _split(text, config.preserve_terms)
    tokens: list[str] = []
    pos = 0
    for match in pattern.finditer(text):
        tokens.extend(_split(text[pos : match.start()], config.preserve_terms))
        tokens.append(match.group())
        pos = match.end()
    tokens.extend(_split(text[pos:], config.preserve_terms))
    return tokens


def remove_stopwords(tokens: Iterable[str], config: PipelineConfig) -> list[str]:
    stop = config.stopword_list
    return [t for t in tokens if t not in stop]


def run_pipeline(post: CleanPost, config: PipelineConfig, exceptions=DEFAULT_EXCEPTIONS) -> TokenDoc:
    tokens = remove_stopwords(tokenize(post.text, config), config)
    preserve = config.preserve_terms
    if config.enable_lemmatization:
        tokens = [t if t in preserve else lemmatize(t, exceptions) for t in tokens]
    if config.enable_stemming:
        tokens = [t if t in preserve else porter_stem(t) for t in tokens]
    if config.enable_lemmatization or config.enable_stemming:
        # A normalized form can collide with a stopword ("using" -> "us").
        tokens = [t for t in remove_stopwords(tokens, config) if t]
    return TokenDoc(post.id, tuple(tokens), post.tags)
