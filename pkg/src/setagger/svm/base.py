"""Kernels, configuration and result containers shared by the solvers."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np

KERNELS = ("linear", "rbf", "polynomial", "sigmoid")
LOSSES = ("hinge", "squared_hinge")


class SvmError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Kernel function and its parameters.

    ``gamma=None`` means "use 1 / n_features", resolved by :meth:`resolve`
    once the feature dimension is known.
    """

    kind: str = "rbf"
    gamma: float | None = None
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise SvmError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if self.gamma is not None and not self.gamma > 0:
            raise SvmError(f"gamma must be positive, got {self.gamma}")
        if self.degree < 1:
            raise SvmError(f"degree must be >= 1, got {self.degree}")

    def resolve(self, n_features: int) -> "KernelSpec":
        if self.gamma is not None:
            return self
        return replace(self, gamma=1.0 / max(n_features, 1))

    @property
    def label(self) -> str:
        if self.kind == "polynomial":
            return f"poly{self.degree}"
        return self.kind

    @classmethod
    def from_label(cls, label: str, **kwargs) -> "KernelSpec":
        """``rbf``, ``linear``, ``sigmoid``, ``poly2``, ``poly3``, ..."""
        label = label.strip().lower()
        if label.startswith("poly"):
            digits = label[len("polynomial"):] if label.startswith("polynomial") else label[4:]
            degree = int(digits) if digits else 3
            return cls("polynomial", degree=degree, **kwargs)
        return cls(label, **kwargs)


def _check_dims(x: np.ndarray, z: np.ndarray) -> None:
    if x.shape[-1] != z.shape[-1]:
        raise SvmError(f"dimension mismatch: {x.shape[-1]} vs {z.shape[-1]}")


def kernel_eval(x, z, spec: KernelSpec) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    _check_dims(x, z)
    spec = spec.resolve(x.shape[-1])
    if spec.kind == "linear":
        return float(x @ z)
    if spec.kind == "rbf":
        d = x - z
        return float(np.exp(-spec.gamma * (d @ d)))
    if spec.kind == "polynomial":
        return float((spec.gamma * (x @ z) + spec.coef0) ** spec.degree)
    return float(np.tanh(spec.gamma * (x @ z) + spec.coef0))


def kernel_matrix(a: np.ndarray, b: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """K[i, j] = K(a_i, b_j) for row sets ``a`` and ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    _check_dims(a, b)
    spec = spec.resolve(a.shape[1])
    dots = a @ b.T
    if spec.kind == "linear":
        return dots
    if spec.kind == "rbf":
        sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * dots
        return np.exp(-spec.gamma * np.maximum(sq, 0.0))
    if spec.kind == "polynomial":
        return (spec.gamma * dots + spec.coef0) ** spec.degree
    return np.tanh(spec.gamma * dots + spec.coef0)


class GramWorkspace:
    """Kernel rows of a fixed training set, computed on demand and cached.

    Small training sets get the full matrix up front. One workspace can be
    shared by every one-vs-rest member trained on the same rows.
    """

    def __init__(self, features, spec: KernelSpec, full_limit: int = 3000, cache_rows: int = 2048):
        self.x = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
        self.spec = spec.resolve(self.x.shape[1])
        n = self.x.shape[0]
        self.full = kernel_matrix(self.x, self.x, self.spec) if n <= full_limit else None
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._cache_rows = cache_rows
        if self.full is not None:
            self.diag = np.ascontiguousarray(np.diag(self.full))
        else:
            self.diag = np.array([kernel_eval(r, r, self.spec) for r in self.x])

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        cached = self._cache.get(i)
        if cached is not None:
            self._cache.move_to_end(i)
            return cached
        r = kernel_matrix(self.x[i : i + 1], self.x, self.spec)[0]
        self._cache[i] = r
        if len(self._cache) > self._cache_rows:
            self._cache.popitem(last=False)
        return r


@dataclass(frozen=True)
class TrainConfig:
    c: float = 1.0
    max_iterations: int = 10000
    tolerance: float = 1e-3
    loss: str = "hinge"
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise SvmError(f"C must be positive, got {self.c}")
        if not self.tolerance > 0:
            raise SvmError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise SvmError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.loss not in LOSSES:
            raise SvmError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")


@dataclass
class TrainingDiagnostics:
    iterations_used: int
    converged: bool
    dual_objective: float
    primal_objective: float
    slacks: np.ndarray = field(repr=False)
    kkt_violation: float


def check_features(features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise SvmError(f"features must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise SvmError("features contain non-finite values")
    return x


def check_binary_labels(labels, n: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).ravel()
    if y.shape[0] != n:
        raise SvmError(f"{n} feature rows but {y.shape[0]} labels")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise SvmError("binary labels must be +1 or -1")
    if np.all(y == 1.0) or np.all(y == -1.0):
        raise SvmError("both classes must be present")
    return y
