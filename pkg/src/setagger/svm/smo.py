"""Kernel SVC trained on the dual by sequential minimal optimization.

The dual solved is

    min_a  1/2 a^T Q a - e^T a    s.t.  y^T a = 0,  0 <= a_i <= C,

with Q_ij = y_i y_j K(x_i, x_j). Each iteration picks the maximal violating
pair and solves the two-variable sub-problem in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import (
    GramWorkspace,
    KernelSpec,
    SvmError,
    TrainConfig,
    TrainingDiagnostics,
    check_binary_labels,
    check_features,
    kernel_matrix,
)

__all__ = ["BinarySvmModel", "decision_value", "dual_objective", "train_svc_smo"]

# Curvature floor for non-PSD kernels (sigmoid).
_TAU = 1e-12


@dataclass(frozen=True)
class BinarySvmModel:
    support_indices: np.ndarray
    alphas: np.ndarray
    support_labels: np.ndarray
    support_vectors: np.ndarray
    intercept: float
    kernel: KernelSpec
    c: float

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise SvmError(f"expected {self.n_features} features, got {x.shape[1]}")
        k = kernel_matrix(x, self.support_vectors, self.kernel)
        return k @ (self.alphas * self.support_labels) + self.intercept


def decision_value(x, model: BinarySvmModel) -> float:
    """sum_i y_i a_i K(x_i, x) + rho; the caller applies the sign."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SvmError("decision_value takes a single feature vector")
    return float(model.decision_function(x[None, :])[0])


def dual_objective(alpha: np.ndarray, y: np.ndarray, k: np.ndarray) -> float:
    """1/2 a^T Q a - e^T a (the minimized form)."""
    ya = alpha * y
    return float(0.5 * ya @ k @ ya - alpha.sum())


def _select_pair(alpha, y, grad, c):
    yg = -y * grad
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
    if not up.any() or not low.any():
        return -1, -1, 0.0
    cand_up = np.where(up, yg, -np.inf)
    cand_low = np.where(low, yg, np.inf)
    i = int(np.argmax(cand_up))
    j = int(np.argmin(cand_low))
    return i, j, float(cand_up[i] - cand_low[j])


def _intercept(alpha, y, grad, c) -> float:
    # Returns rho such that f(x) = sum y a K + rho.
    yg = y * grad
    at_upper = alpha >= c
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        r = float(yg[free].mean())
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = float(yg[ub_mask].min()) if ub_mask.any() else np.inf
        lb = float(yg[lb_mask].max()) if lb_mask.any() else -np.inf
        r = (ub + lb) / 2.0 if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return -r


def train_svc_smo(
    features,
    labels,
    kernel: KernelSpec,
    config: TrainConfig,
    *,
    gram: GramWorkspace | None = None,
) -> tuple[BinarySvmModel, TrainingDiagnostics]:
    """Train a binary kernel SVC.

    ``config.max_iterations`` bounds the number of pair updates. ``gram`` may
    carry precomputed kernel rows for ``features`` (shared across one-vs-rest
    members); its kernel takes precedence over ``kernel``.
    """
    x = check_features(features)
    y = check_binary_labels(labels, x.shape[0])
    if gram is None:
        gram = GramWorkspace(x, kernel)
    elif gram.n != x.shape[0]:
        raise SvmError("gram workspace does not match the feature rows")
    spec = gram.spec
    c = float(config.c)
    n = x.shape[0]
    qd = gram.diag
    alpha = np.zeros(n)
    grad = -np.ones(n)
    converged = False
    violation = np.inf
    it = 0
    while it < config.max_iterations:
        i, j, violation = _select_pair(alpha, y, grad, c)
        if i < 0 or violation < config.tolerance:
            converged = True
            break
        it += 1
        ki = gram.row(i)
        kj = gram.row(j)
        kij = ki[j]
        ai, aj = alpha[i], alpha[j]
        # ||phi_i - phi_j||^2 for either label combination
        quad = qd[i] + qd[j] - 2.0 * kij
        if quad <= 0:
            quad = _TAU
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > c:
                    ni, nj = c, c - diff
            elif nj > c:
                nj, ni = c, c + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > c:
                if ni > c:
                    ni, nj = c, total - c
                if nj > c:
                    nj, ni = c, total - c
            else:
                if nj < 0:
                    nj, ni = 0.0, total
                if ni < 0:
                    ni, nj = 0.0, total
        dai, daj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        # grad = Q a - e, with Q_i = y_i y K_i
        grad += y * (y[i] * dai * ki + y[j] * daj * kj)
    else:
        _, _, violation = _select_pair(alpha, y, grad, c)
        converged = violation < config.tolerance

    rho = _intercept(alpha, y, grad, c)
    # decision on training rows: sum_j y_j a_j K_ij + rho = y_i (grad_i + 1) + rho
    f_train = y * (grad + 1.0) + rho
    slacks = np.maximum(0.0, 1.0 - y * f_train)
    quad_term = float(alpha @ (grad + 1.0))  # a^T Q a
    primal = 0.5 * quad_term + c * float(slacks.sum())
    dual = float(alpha.sum()) - 0.5 * quad_term
    sv = np.flatnonzero(alpha > 0)
    model = BinarySvmModel(
        support_indices=sv,
        alphas=alpha[sv].copy(),
        support_labels=y[sv].copy(),
        support_vectors=x[sv].copy(),
        intercept=float(rho) + 0.0,
        kernel=spec,
        c=c,
    )
    diag = TrainingDiagnostics(
        iterations_used=it,
        converged=converged,
        dual_objective=dual,
        primal_objective=primal,
        slacks=slacks,
        kkt_violation=max(0.0, float(violation)) if np.isfinite(violation) else 0.0,
    )
    return model, diag
