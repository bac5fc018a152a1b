"""Soft-margin RBF support vector machine trained by pairwise dual ascent.

The dual being maximised is

    L(a) = sum_i a_i - 1/2 sum_ij a_i a_j t_i t_j k(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum_i a_i t_i = 0

with t_i in {-1, +1}. Each step updates the maximal-violating pair chosen by
second-order gain (as in LIBSVM's WSS2), so the equality constraint is kept
exactly and the objective never decreases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset

log = logging.getLogger(__name__)

TAU = 1e-12


def rbf_kernel(p, q, gamma: float) -> float:
    p, q = np.asarray(p, float), np.asarray(q, float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    diff = p - q
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def default_gamma(X: np.ndarray) -> float:
    """``1 / (d * var(X))``, falling back to 1 for constant data."""
    var = float(np.var(X))
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def to_signed(labels: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(labels) == 1, 1.0, -1.0)


def dual_objective(alphas: np.ndarray, t: np.ndarray, K: np.ndarray) -> float:
    v = alphas * t
    return float(alphas.sum() - 0.5 * v @ K @ v)


@dataclass
class SvmModel:
    C: float
    gamma: float
    bias: float
    support_vectors: np.ndarray
    sv_labels: np.ndarray  # +-1
    sv_alphas: np.ndarray
    alphas: np.ndarray = field(repr=False)  # one per training row
    converged: bool = True
    iterations: int = 0
    objective: float = 0.0
    sv_epsilon: float = 1e-8

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if len(self.sv_alphas) == 0:
            return np.full(len(X), self.bias)
        return rbf_matrix(X, self.support_vectors, self.gamma) @ (self.sv_alphas * self.sv_labels) + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "method": "svm",
            "C": self.C,
            "gamma": self.gamma,
            "bias": self.bias,
            "converged": self.converged,
            "support_vectors": [
                {"x": sv.tolist(), "label": int(t), "alpha": float(a)}
                for sv, t, a in zip(self.support_vectors, self.sv_labels, self.sv_alphas)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        svs = d["support_vectors"]
        dim = len(svs[0]["x"]) if svs else 0
        X = np.array([s["x"] for s in svs], float).reshape(len(svs), dim)
        a = np.array([s["alpha"] for s in svs], float)
        return cls(d["C"], d["gamma"], d["bias"], X, np.array([s["label"] for s in svs], float), a, a,
                   d.get("converged", True))


def solve_dual(
    train: Dataset,
    C: float = 1000.0,
    gamma: float | None = None,
    kkt_tol: float = 1e-3,
    max_passes: int = 100,
    sv_epsilon: float = 1e-8,
    trace: list | None = None,
) -> SvmModel:
    """Fit the soft-margin dual.

    Stops once the maximal KKT violation gap is at most ``kkt_tol`` or after
    ``max_passes * N`` pair updates, in which case ``converged`` is False.
    When ``trace`` is a list, the dual objective after every update is
    appended to it.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    X = np.asarray(train.features, float)
    t = to_signed(train.labels)
    if len(np.unique(t)) < 2:
        raise ValueError("solve_dual needs both classes present")
    gamma = default_gamma(X) if gamma is None else float(gamma)
    n = len(t)
    K = rbf_matrix(X, X, gamma)
    Q = K * np.outer(t, t)
    diagQ = np.diag(Q).copy()
    a = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a
    converged = False
    it = 0
    max_iter = max_passes * n
    while it < max_iter:
        # -t_i * grad_i over the sets that can move up / down
        up = ((t > 0) & (a < C)) | ((t < 0) & (a > 0))
        low = ((t > 0) & (a > 0)) | ((t < 0) & (a < C))
        v = -t * grad
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(v[up])])
        m_up = v[i]
        m_low = v[low].min()
        if m_up - m_low <= kkt_tol:
            converged = True
            break
        # second-order choice of j among violating low-set members
        cand = np.flatnonzero(low & (v < m_up))
        b_ij = m_up - v[cand]
        a_ij = diagQ[i] + diagQ[cand] - 2.0 * t[i] * t[cand] * Q[i, cand]
        a_ij = np.where(a_ij > 0, a_ij, TAU)
        j = int(cand[np.argmax(b_ij * b_ij / a_ij)])

        _pair_update(i, j, a, grad, Q, t, C)
        it += 1
        if trace is not None:
            trace.append(dual_objective(a, t, K))
    if not converged:
        log.warning("solve_dual: no convergence after %d updates", it)

    bias = _bias(a, grad, t, C)
    sv = a > sv_epsilon
    return SvmModel(
        C=C, gamma=gamma, bias=bias,
        support_vectors=X[sv].copy(), sv_labels=t[sv].copy(), sv_alphas=a[sv].copy(),
        alphas=a, converged=converged, iterations=it, objective=dual_objective(a, t, K),
        sv_epsilon=sv_epsilon,
    )


def _pair_update(i, j, a, grad, Q, t, C):
    """Closed-form two-variable step keeping ``sum a t`` fixed, clipped to the box."""
    ai_old, aj_old = a[i], a[j]
    if t[i] != t[j]:
        quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
        quad = quad if quad > 0 else TAU
        delta = (-grad[i] - grad[j]) / quad
        diff = a[i] - a[j]
        a[i] += delta
        a[j] += delta
        if diff > 0:
            if a[j] < 0:
                a[j], a[i] = 0.0, diff
        elif a[i] < 0:
            a[i], a[j] = 0.0, -diff
        if diff > 0:
            if a[i] > C:
                a[i], a[j] = C, C - diff
        elif a[j] > C:
            a[j], a[i] = C, C + diff
    else:
        quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
        quad = quad if quad > 0 else TAU
        delta = (grad[i] - grad[j]) / quad
        total = a[i] + a[j]
        a[i] -= delta
        a[j] += delta
        if total > C:
            if a[i] > C:
                a[i], a[j] = C, total - C
        elif a[j] < 0:
            a[j], a[i] = 0.0, total
        if total > C:
            if a[j] > C:
                a[j], a[i] = C, total - C
        elif a[i] < 0:
            a[i], a[j] = 0.0, total
    di, dj = a[i] - ai_old, a[j] - aj_old
    grad += Q[:, i] * di + Q[:, j] * dj


def _bias(a, grad, t, C) -> float:
    v = -t * grad
    free = (a > 0) & (a < C)
    if free.any():
        return float(v[free].mean())
    up = ((t > 0) & (a < C)) | ((t < 0) & (a > 0))
    low = ((t > 0) & (a > 0)) | ((t < 0) & (a < C))
    hi = v[up].max() if up.any() else 0.0
    lo = v[low].min() if low.any() else 0.0
    return float(0.5 * (hi + lo))


def decision_value(model: SvmModel, x) -> float:
    return float(model.decision_function(np.asarray(x, float)[None, :])[0])


def svm_complexity(model: SvmModel) -> int:
    """Number of training rows with a multiplier above ``sv_epsilon``."""
    return int(np.count_nonzero(np.asarray(model.alphas) > model.sv_epsilon))
