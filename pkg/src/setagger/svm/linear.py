"""Linear SVC by dual coordinate descent (hinge or squared hinge).

The bias is learned through an appended constant feature, so it is
regularized together with the weights and the dual keeps only box
constraints: ``0 <= a_i <= C`` for the hinge loss, ``0 <= a_i`` plus a
diagonal term ``1 / (2C)`` for the squared hinge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import SvmError, TrainConfig, TrainingDiagnostics, check_binary_labels, check_features

__all__ = ["LinearModel", "linear_objectives", "train_linear_dcd"]


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def decision_function(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise SvmError(f"expected {self.n_features} features, got {x.shape[1]}")
        return x @ self.weights + self.bias


def linear_objectives(w_aug: np.ndarray, x_aug: np.ndarray, y: np.ndarray, alpha: np.ndarray,
                      c: float, loss: str) -> tuple[float, float, np.ndarray]:
    """(primal, dual, slacks) for an augmented weight vector and dual point."""
    margins = y * (x_aug @ w_aug)
    slacks = np.maximum(0.0, 1.0 - margins)
    reg = 0.5 * float(w_aug @ w_aug)
    if loss == "hinge":
        primal = reg + c * float(slacks.sum())
        dual = float(alpha.sum()) - reg
    else:
        primal = reg + c * float(slacks @ slacks)
        dual = float(alpha.sum()) - reg - float(alpha @ alpha) / (4.0 * c)
    return primal, dual, slacks


def train_linear_dcd(features, labels, config: TrainConfig) -> tuple[LinearModel, TrainingDiagnostics]:
    """One outer iteration is a full pass over the examples in seeded random order."""
    x = check_features(features)
    y = check_binary_labels(labels, x.shape[0])
    n, d = x.shape
    x_aug = np.hstack([x, np.ones((n, 1))])
    c = float(config.c)
    if config.loss == "hinge":
        upper, diag = c, 0.0
    else:
        upper, diag = np.inf, 1.0 / (2.0 * c)
    qbar = np.einsum("ij,ij->i", x_aug, x_aug) + diag
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    rng = np.random.default_rng(config.seed)
    rows = list(x_aug)
    converged = False
    spread = np.inf
    passes = 0
    while passes < config.max_iterations:
        passes += 1
        # Starting both at 0 makes the spread bound every |PG|, which is the
        # optimality measure of a box-constrained dual.
        pg_max, pg_min = 0.0, 0.0
        for i in rng.permutation(n):
            xi = rows[i]
            yi = y[i]
            g = yi * float(w @ xi) - 1.0 + diag * alpha[i]
            ai = alpha[i]
            if ai == 0.0:
                pg = min(g, 0.0)
            elif ai == upper:
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0:
                new = min(max(ai - g / qbar[i], 0.0), upper)
                alpha[i] = new
                w += (new - ai) * yi * xi
        spread = pg_max - pg_min
        if spread < config.tolerance:
            converged = True
            break
    primal, dual, slacks = linear_objectives(w, x_aug, y, alpha, c, config.loss)
    model = LinearModel(weights=w[:d].copy(), bias=float(w[d]))
    diag_out = TrainingDiagnostics(
        iterations_used=passes,
        converged=converged,
        dual_objective=dual,
        primal_objective=primal,
        slacks=slacks,
        kkt_violation=float(spread),
    )
    return model, diag_out
