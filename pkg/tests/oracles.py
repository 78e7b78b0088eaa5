"""Independent reference computations used by the tests.

Nothing here imports the package under test.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------- kernels

def gram(x: np.ndarray, kind: str, gamma: float, degree: int = 3, coef0: float = 0.0) -> np.ndarray:
    """Gram matrix written out element by element."""
    n = x.shape[0]
    k = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            dot = float(sum(a * b for a, b in zip(x[i], x[j])))
            if kind == "linear":
                k[i, j] = dot
            elif kind == "rbf":
                k[i, j] = math.exp(-gamma * float(sum((a - b) ** 2 for a, b in zip(x[i], x[j]))))
            elif kind == "polynomial":
                k[i, j] = (gamma * dot + coef0) ** degree
            else:
                raise ValueError(kind)
    return k


# ---------------------------------------------------------------- SVC dual QP

def _project(v: np.ndarray, y: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row of ``v`` onto {0 <= a <= c, y.a = 0}.

    ``c`` holds a per-entry upper bound; an entry with bound 0 is pinned.

    The projection is clip(v - lam * y, 0, c) for the unique lam that zeroes
    g(lam) = sum y * clip(v - lam * y). g is piecewise linear and
    non-increasing, with breakpoints where an entry hits 0 or c; the root is
    found by locating the bracketing breakpoints and interpolating.
    """
    bps = np.concatenate([y * v, y * (v - c)], axis=1)
    bps.sort(axis=1)

    def g(lam):
        return np.sum(y[:, None, :] * np.clip(v[:, None, :] - lam[..., None] * y[:, None, :], 0.0, c[:, None, :]), axis=2)

    gv = g(bps)
    # first breakpoint where g <= 0 (g is non-increasing in lam)
    idx = np.argmax(gv <= 0.0, axis=1)
    rows = np.arange(v.shape[0])
    hi = bps[rows, idx]
    lo = bps[rows, np.maximum(idx - 1, 0)]
    g_hi = gv[rows, idx]
    g_lo = gv[rows, np.maximum(idx - 1, 0)]
    denom = g_lo - g_hi
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(denom > 0, g_lo / denom, 0.0)
    lam = lo + t * (hi - lo)
    lam = np.where(idx == 0, hi, lam)
    return np.clip(v - lam[:, None] * y, 0.0, c)


def svc_dual_oracle(problems, iterations: int = 40000) -> np.ndarray:
    """Minimum of 1/2 a'Qa - e'a over {0 <= a <= C, y.a = 0} for each problem.

    ``problems`` is a list of (K, y, C). Accelerated projected gradient with
    gradient-based restart, all problems stepped together; smaller problems
    are padded with variables pinned at 0.
    """
    b = len(problems)
    n = max(len(y) for _, y, _ in problems)
    qs = np.zeros((b, n, n))
    ys = np.ones((b, n))
    upper = np.zeros((b, n))
    lin = np.zeros((b, n))
    for i, (k, y, c) in enumerate(problems):
        m = len(y)
        qs[i, :m, :m] = np.outer(y, y) * k
        ys[i, :m] = y
        upper[i, :m] = c
        lin[i, :m] = 1.0
    lips = np.linalg.eigvalsh(qs)[:, -1]
    step = 1.0 / np.maximum(lips, 1e-12)
    a = np.zeros((b, n))
    z = a.copy()
    t = np.ones(b)
    for _ in range(iterations):
        grad = np.einsum("bij,bj->bi", qs, z) - lin
        a_new = _project(z - step[:, None] * grad, ys, upper)
        restart = np.einsum("bi,bi->b", grad, a_new - a) > 0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = np.where(restart, 0.0, (t - 1.0) / t_new)
        z = a_new + mom[:, None] * (a_new - a)
        t = np.where(restart, 1.0, t_new)
        a = a_new
    return 0.5 * np.einsum("bi,bij,bj->b", a, qs, a) - np.einsum("bi,bi->b", lin, a)


# ---------------------------------------------------------------- tf-idf

def hand_tfidf_three_docs() -> tuple[list[str], np.ndarray]:
    """Weights for the corpus {[a,b], [a], [b,b,c]} worked out by hand.

    N = 3; df(a) = 2, df(b) = 2, df(c) = 1.
    idf(a) = idf(b) = ln(3/2), idf(c) = ln 3.
    doc 1: a and b both have the max count 1 -> tf 1.
    doc 2: a max -> tf 1.
    doc 3: b has count 2 (max); c has count 1 -> tf = 0.5 + 0.5 * 1/2 = 0.75.
    """
    l32 = math.log(1.5)
    l3 = math.log(3.0)
    return ["a", "b", "c"], np.array([
        [1.0 * l32, 1.0 * l32, 0.0],
        [1.0 * l32, 0.0, 0.0],
        [0.0, 1.0 * l32, 0.75 * l3],
    ])


# ---------------------------------------------------------------- SVD

def eig_singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values from the eigenvalues of M'M, descending."""
    w = np.linalg.eigvalsh(m.T @ m)[::-1]
    return np.sqrt(np.clip(w, 0.0, None))


def eig_right_vectors(m: np.ndarray, k: int) -> np.ndarray:
    w, v = np.linalg.eigh(m.T @ m)
    return v[:, ::-1][:, :k]
