"""Augmented-tf / log-idf weighting and the sparse document-term matrix.

Weights follow

    tf(t, d)  = 0.5 + 0.5 * f(t, d) / max_w f(w, d)      (t present in d)
    idf(t, D) = ln(N / df(t))
    w(t, d)   = tf(t, d) * idf(t, D)

Terms absent from a document get weight 0 rather than the 0.5 floor, which
keeps rows sparse. Filtering uses document-frequency bounds.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .textpipe import TokenDoc

__all__ = [
    "FilterPolicy",
    "TfIdfModel",
    "VectorizeError",
    "Vocabulary",
    "build_matrix",
    "fit",
    "read_matrix",
    "term_frequency",
    "transform",
    "write_matrix",
]


class VectorizeError(ValueError):
    pass


@dataclass(frozen=True)
class FilterPolicy:
    min_doc_freq: int = 2
    max_doc_ratio: float = 0.95

    def __post_init__(self):
        if self.min_doc_freq < 1:
            raise VectorizeError(f"min_doc_freq must be >= 1, got {self.min_doc_freq}")
        if not 0.0 < self.max_doc_ratio <= 1.0:
            raise VectorizeError(f"max_doc_ratio must lie in (0, 1], got {self.max_doc_ratio}")


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    @property
    def term_to_index(self) -> dict[str, int]:
        return self._index

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self._index


@dataclass(frozen=True)
class TfIdfModel:
    vocabulary: Vocabulary
    idf: np.ndarray
    filter_policy: FilterPolicy

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)

    def to_text(self) -> str:
        """Plain-text export; reals use 17 significant digits."""
        v = self.vocabulary
        lines = [
            "# setagger tfidf-model 1",
            f"n_docs {v.n_docs}",
            f"min_doc_freq {self.filter_policy.min_doc_freq}",
            f"max_doc_ratio {self.filter_policy.max_doc_ratio:.17g}",
            f"n_terms {len(v)}",
        ]
        for i, term in enumerate(v.terms):
            lines.append(f"{i}\t{term}\t{v.doc_freq[i]}\t{self.idf[i]:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TfIdfModel":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        header = dict(ln.split(" ", 1) for ln in lines[:4])
        terms, dfs, idf = [], [], []
        for ln in lines[4:]:
            _, term, df, weight = ln.split("\t")
            terms.append(term)
            dfs.append(int(df))
            idf.append(float(weight))
        vocab = Vocabulary(tuple(terms), tuple(dfs), int(header["n_docs"]))
        policy = FilterPolicy(int(header["min_doc_freq"]), float(header["max_doc_ratio"]))
        return cls(vocab, np.array(idf, dtype=np.float64), policy)


def fit(corpus: Sequence[TokenDoc], policy: FilterPolicy = FilterPolicy()) -> TfIdfModel:
    """Fit vocabulary and idf weights.

    Column indices follow first occurrence over the corpus scan, so repeated
    fits of the same corpus give identical models.
    """
    n_docs = len(corpus)
    if n_docs == 0:
        raise VectorizeError("cannot fit tf-idf on an empty corpus")
    df: Counter[str] = Counter()
    order: dict[str, None] = {}
    for doc in corpus:
        for term in dict.fromkeys(doc.tokens):
            df[term] += 1
            order.setdefault(term, None)
    terms = [
        t for t in order
        if df[t] >= policy.min_doc_freq and df[t] / n_docs <= policy.max_doc_ratio
    ]
    if not terms:
        raise VectorizeError(
            f"vocabulary is empty after filtering with min_doc_freq={policy.min_doc_freq}, "
            f"max_doc_ratio={policy.max_doc_ratio}"
        )
    doc_freq = tuple(df[t] for t in terms)
    idf = np.array([math.log(n_docs / d) for d in doc_freq], dtype=np.float64)
    return TfIdfModel(Vocabulary(tuple(terms), doc_freq, n_docs), idf, policy)


def term_frequency(term: str, doc: TokenDoc | Sequence[str]) -> float:
    tokens = doc.tokens if isinstance(doc, TokenDoc) else doc
    if not tokens:
        raise VectorizeError("term frequency is undefined for an empty document")
    counts = Counter(tokens)
    f = counts.get(term, 0)
    if f == 0:
        return 0.0
    return 0.5 + 0.5 * f / max(counts.values())


def _row_entries(tokens: Sequence[str], model: TfIdfModel) -> tuple[list[int], list[float]]:
    if not tokens:
        return [], []
    counts = Counter(tokens)
    max_f = max(counts.values())
    index = model.vocabulary.term_to_index
    cols, vals = [], []
    for term, f in counts.items():
        col = index.get(term)
        if col is None:
            continue
        weight = (0.5 + 0.5 * f / max_f) * model.idf[col]
        if weight != 0.0:
            cols.append(col)
            vals.append(weight)
    order = np.argsort(cols, kind="stable")
    return [cols[i] for i in order], [vals[i] for i in order]


def transform(doc: TokenDoc, model: TfIdfModel) -> sp.csr_matrix:
    """One document as a 1 x n_features sparse row; zero weights are not stored."""
    cols, vals = _row_entries(doc.tokens, model)
    return sp.csr_matrix(
        (np.array(vals, dtype=np.float64), (np.zeros(len(cols), dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(1, model.n_features),
    )


def build_matrix(corpus: Iterable[TokenDoc], model: TfIdfModel) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in corpus:
        cols, vals = _row_entries(doc.tokens, model)
        indices.extend(cols)
        data.extend(vals)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, model.n_features),
    )


def write_matrix(matrix: sp.spmatrix, fh) -> None:
    """``n_rows n_cols nnz`` header then ``row col weight`` triples."""
    coo = sp.csr_matrix(matrix).tocoo()
    fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
    for r, c, v in zip(coo.row, coo.col, coo.data):
        fh.write(f"{r} {c} {v:.17g}\n")


def read_matrix(fh) -> sp.csr_matrix:
    n_rows, n_cols, nnz = (int(x) for x in fh.readline().split())
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for i in range(nnz):
        r, c, v = fh.readline().split()
        rows[i], cols[i], vals[i] = int(r), int(c), float(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))
