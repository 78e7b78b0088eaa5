"""Truncated SVD of the document-term matrix and projection into concept space.

Large problems use a seeded randomized range finder followed by subspace
(power) iterations until the leading Ritz triplets have small residuals.
Small problems, or requests that need nearly the whole spectrum anyway, go
through a dense LAPACK factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm

__all__ = [
    "SvdConvergenceError",
    "SvdError",
    "SvdModel",
    "choose_rank",
    "fit_lsa",
    "project",
    "project_rows",
    "truncated_svd",
]

DENSE_LIMIT = 64


class SvdError(ValueError):
    pass


class SvdConvergenceError(SvdError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"subspace iteration did not converge after {iterations} steps "
                         f"(relative residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SvdModel:
    """Leading singular values and right singular vectors (one per column)."""

    singular_values: np.ndarray
    right_vectors: np.ndarray
    source_dims: tuple[int, int]
    retained_variance: float
    spectrum: np.ndarray = field(repr=False, default=None)

    @property
    def rank(self) -> int:
        return int(self.singular_values.shape[0])

    @property
    def n_terms(self) -> int:
        return int(self.right_vectors.shape[0])

    def truncate(self, k: int, total_variance: float | None = None) -> "SvdModel":
        if not 1 <= k <= self.rank:
            raise SvdError(f"cannot truncate rank-{self.rank} model to {k}")
        s = self.singular_values[:k]
        total = total_variance if total_variance is not None else float(np.sum(self.spectrum ** 2))
        return SvdModel(
            s.copy(),
            np.ascontiguousarray(self.right_vectors[:, :k]),
            self.source_dims,
            float(np.sum(s ** 2) / total),
            self.spectrum,
        )

    def to_text(self) -> str:
        """Dims, rank, singular values, then V_k column-major; 17 significant digits."""
        m, n = self.source_dims
        lines = [
            "# setagger svd-model 1",
            f"source_dims {m} {n}",
            f"rank {self.rank}",
            f"retained_variance {self.retained_variance:.17g}",
            "singular_values " + " ".join(f"{x:.17g}" for x in self.singular_values),
            "spectrum " + " ".join(f"{x:.17g}" for x in self.spectrum),
        ]
        for j in range(self.rank):
            lines.append(" ".join(f"{x:.17g}" for x in self.right_vectors[:, j]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SvdModel":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        m, n = (int(x) for x in lines[0].split()[1:])
        rank = int(lines[1].split()[1])
        retained = float(lines[2].split()[1])
        s = np.array([float(x) for x in lines[3].split()[1:]])
        spectrum = np.array([float(x) for x in lines[4].split()[1:]])
        v = np.empty((n, rank))
        for j in range(rank):
            v[:, j] = [float(x) for x in lines[5 + j].split()]
        return cls(s, v, (m, n), retained, spectrum)


def _fix_signs(vt: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each vector positive; argmax keeps the lowest index on ties.
    idx = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def _dense_svd(matrix) -> tuple[np.ndarray, np.ndarray]:
    dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=np.float64)
    _, s, vt = np.linalg.svd(dense, full_matrices=False)
    return s, vt


def _randomized_svd(matrix, width: int, rank: int, n_power_iter: int, tol: float,
                    max_iter: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    m, n = matrix.shape
    omega = rng.standard_normal((n, width))
    q, _ = np.linalg.qr(matrix @ omega)
    residual = np.inf
    for it in range(1, max_iter + 1):
        z, _ = np.linalg.qr(matrix.T @ q)
        q, _ = np.linalg.qr(matrix @ z)
        if it < n_power_iter:
            continue
        b = np.asarray((matrix.T @ q).T)
        ub, s, vt = np.linalg.svd(b, full_matrices=False)
        # B = Q^T M, so M^T u_i = s_i v_i holds exactly; check M v_i = s_i u_i.
        mv = np.asarray(matrix @ vt[:rank].T)
        r = mv - (q @ ub[:, :rank]) * s[:rank]
        residual = float(np.max(np.linalg.norm(r, axis=0)) / s[0]) if s[0] > 0 else 0.0
        if residual <= tol:
            return s, vt
    raise SvdConvergenceError(residual, max_iter)


def truncated_svd(
    matrix,
    max_rank: int,
    seed: int = 0,
    *,
    oversample: int = 10,
    n_power_iter: int = 4,
    tol: float = 1e-10,
    max_iter: int = 300,
    method: str = "auto",
) -> SvdModel:
    """Top ``max_rank`` singular values and right singular vectors of ``matrix``.

    ``method`` is ``"auto"``, ``"dense"`` or ``"randomized"``. Components whose
    singular value is numerically zero are dropped, so the model rank can be
    lower than ``max_rank`` for rank-deficient input. ``spectrum`` keeps every
    computed value, including the oversampled tail, for rank selection.
    """
    m, n = matrix.shape
    if not 1 <= max_rank <= min(m, n):
        raise SvdError(f"max_rank must lie in [1, {min(m, n)}], got {max_rank}")
    frob = sparse_norm(matrix) if sp.issparse(matrix) else np.linalg.norm(matrix)
    if frob == 0.0:
        raise SvdError("cannot factorize an all-zero matrix")
    if sp.issparse(matrix):
        matrix = sp.csr_matrix(matrix, dtype=np.float64)
    else:
        matrix = np.asarray(matrix, dtype=np.float64)
    width = min(max_rank + oversample, min(m, n))
    if method == "auto":
        method = "dense" if min(m, n) <= DENSE_LIMIT or width >= min(m, n) else "randomized"
    if method == "dense":
        s, vt = _dense_svd(matrix)
    elif method == "randomized":
        rng = np.random.default_rng(seed)
        s, vt = _randomized_svd(matrix, width, max_rank, n_power_iter, tol, max_iter, rng)
    else:
        raise SvdError(f"unknown method {method!r}")
    vt = _fix_signs(vt[:max_rank])
    cutoff = s[0] * max(m, n) * np.finfo(np.float64).eps
    keep = int(np.sum(s[:max_rank] > cutoff))
    spectrum = s.copy()
    singular_values = s[:keep].copy()
    right = np.ascontiguousarray(vt[:keep].T)
    retained = float(np.sum(singular_values ** 2) / frob ** 2)
    return SvdModel(singular_values, right, (m, n), min(retained, 1.0), spectrum)


def choose_rank(singular_values, target_variance: float, total_variance: float | None = None) -> int:
    """Smallest k whose leading values carry ``target_variance`` of the squared sum.

    ``total_variance`` replaces the denominator when the values do not cover
    the whole spectrum (pass the squared Frobenius norm of the matrix).
    """
    values = np.asarray(singular_values, dtype=np.float64)
    if values.size == 0:
        raise SvdError("cannot choose a rank from an empty spectrum")
    if not 0.0 < target_variance <= 1.0:
        raise SvdError(f"target_variance must lie in (0, 1], got {target_variance}")
    values = np.sort(values)[::-1]
    energy = values ** 2
    total = float(np.sum(energy)) if total_variance is None else float(total_variance)
    positive = int(np.sum(values > 0))
    if target_variance >= 1.0:
        return max(positive, 1)
    cumulative = np.cumsum(energy) / total
    k = int(np.searchsorted(cumulative, target_variance, side="left")) + 1
    return min(max(k, 1), max(positive, 1))


def fit_lsa(matrix, variance_target: float = 0.9, rank_cap: int = 3000, seed: int = 0) -> SvdModel:
    """Factorize with the cap, then keep the rank that reaches ``variance_target``."""
    m, n = matrix.shape
    cap = max(1, min(m, n, rank_cap))
    model = truncated_svd(matrix, cap, seed)
    frob2 = float(sparse_norm(matrix) ** 2 if sp.issparse(matrix) else np.linalg.norm(matrix) ** 2)
    k = choose_rank(model.singular_values, variance_target, total_variance=frob2)
    return model.truncate(min(k, model.rank), total_variance=frob2)


def project(row, model: SvdModel) -> np.ndarray:
    """Concept coordinates ``x V_k`` of a single row."""
    if sp.issparse(row):
        if row.shape != (1, model.n_terms):
            raise SvdError(f"expected a 1 x {model.n_terms} row, got {row.shape}")
        return np.asarray(row @ model.right_vectors).ravel()
    x = np.asarray(row, dtype=np.float64)
    if x.shape != (model.n_terms,):
        raise SvdError(f"expected a vector of length {model.n_terms}, got shape {x.shape}")
    return x @ model.right_vectors


def project_rows(matrix, model: SvdModel) -> np.ndarray:
    """Concept coordinates of every row of ``matrix`` (n_docs x rank)."""
    if matrix.shape[1] != model.n_terms:
        raise SvdError(f"matrix has {matrix.shape[1]} columns, model expects {model.n_terms}")
    return np.asarray(matrix @ model.right_vectors)
