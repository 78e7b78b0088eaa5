"""Crammer-Singer multiclass linear SVM.

Dual:

    min_a  1/2 sum_m ||w_m||^2 + sum_i sum_m e_i^m a_i^m
    s.t.   sum_m a_i^m = 0,   a_i^m <= C [y_i = m],

with w_m = sum_i a_i^m x_i and e_i^m = 1 - [y_i = m]. Examples are visited
one at a time and each per-example block is minimized exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import SvmError, TrainConfig, TrainingDiagnostics, check_features

__all__ = ["CsModel", "cs_objectives", "cs_scores", "solve_cs_subproblem", "train_crammer_singer"]


@dataclass(frozen=True)
class CsModel:
    class_weights: np.ndarray  # (n_classes, n_features)
    classes: tuple

    @property
    def n_features(self) -> int:
        return self.class_weights.shape[1]

    def scores(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise SvmError(f"expected {self.n_features} features, got {x.shape[1]}")
        return x @ self.class_weights.T

    def predict(self, features) -> np.ndarray:
        # argmax returns the first maximum, i.e. the lowest class index.
        return np.argmax(self.scores(features), axis=1)


def cs_scores(x, model: CsModel) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SvmError("cs_scores takes a single feature vector")
    return model.scores(x[None, :])[0]


def solve_cs_subproblem(a: float, b: np.ndarray, yi: int, c: float) -> np.ndarray:
    """argmin_v 1/2 a ||v||^2 + b.v  s.t. sum(v) = 0, v_m <= c [m = yi].

    Sorting-based solution: v_m = min(bound_m, (beta - b_m) / a) with beta
    fixed by the equality constraint.
    """
    d = b.copy()
    d[yi] += a * c
    d = np.sort(d)[::-1]
    beta = d[0] - a * c
    r = 1
    while r < d.shape[0] and beta < r * d[r]:
        beta += d[r]
        r += 1
    beta /= r
    v = np.minimum(0.0, (beta - b) / a)
    v[yi] = min(c, (beta - b[yi]) / a)
    return v


def cs_objectives(w: np.ndarray, alpha: np.ndarray, x: np.ndarray, y: np.ndarray,
                  c: float) -> tuple[float, float, np.ndarray]:
    """(primal, dual, slacks); ``dual`` is the maximized form."""
    n = x.shape[0]
    scores = x @ w.T
    e = np.ones_like(scores)
    e[np.arange(n), y] = 0.0
    own = scores[np.arange(n), y]
    slacks = np.maximum(0.0, np.max(e + scores - own[:, None], axis=1))
    reg = 0.5 * float(np.sum(w * w))
    primal = reg + c * float(slacks.sum())
    dual = -(reg + float(np.sum(e * alpha)))
    return primal, dual, slacks


def train_crammer_singer(features, labels, n_classes: int, config: TrainConfig,
                         classes=None) -> tuple[CsModel, TrainingDiagnostics]:
    """Train on integer class indices in ``[0, n_classes)``.

    ``config.loss`` is accepted for interface symmetry with the binary
    trainers and has no effect: the joint objective has a single loss.
    """
    x = check_features(features)
    y = np.asarray(labels).ravel()
    n, d = x.shape
    if y.shape[0] != n:
        raise SvmError(f"{n} feature rows but {y.shape[0]} labels")
    if n_classes < 2:
        raise SvmError("Crammer-Singer needs at least two classes")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise SvmError("class labels must be integer indices")
        y = y.astype(np.int64)
    if y.min() < 0 or y.max() >= n_classes:
        raise SvmError(f"class index out of range [0, {n_classes})")
    if np.unique(y).shape[0] < 2:
        raise SvmError("training labels contain a single distinct class")
    c = float(config.c)
    w = np.zeros((n_classes, d))
    alpha = np.zeros((n, n_classes))
    sq_norm = np.einsum("ij,ij->i", x, x)
    rng = np.random.default_rng(config.seed)
    converged = False
    worst = np.inf
    passes = 0
    while passes < config.max_iterations:
        passes += 1
        worst = 0.0
        for i in rng.permutation(n):
            a = sq_norm[i]
            if a <= 0.0:
                continue
            xi = x[i]
            yi = int(y[i])
            ai = alpha[i]
            g = w @ xi + 1.0
            g[yi] -= 1.0
            # Most negative gradient among coordinates that can still grow.
            can_grow = ai < 0.0
            can_grow[yi] = ai[yi] < c
            min_g = g[can_grow].min() if can_grow.any() else np.inf
            violation = g.max() - min_g
            if violation <= 1e-12:
                continue
            worst = max(worst, violation)
            b = g - a * ai
            new = solve_cs_subproblem(a, b, yi, c)
            delta = new - ai
            alpha[i] = new
            w += np.outer(delta, xi)
        if worst < config.tolerance:
            converged = True
            break
    primal, dual, slacks = cs_objectives(w, alpha, x, y, c)
    labels_out = tuple(range(n_classes)) if classes is None else tuple(classes)
    if len(labels_out) != n_classes:
        raise SvmError("classes must have n_classes entries")
    model = CsModel(class_weights=w, classes=labels_out)
    diag = TrainingDiagnostics(
        iterations_used=passes,
        converged=converged,
        dual_objective=dual,
        primal_objective=primal,
        slacks=slacks,
        kkt_violation=float(worst),
    )
    return model, diag
