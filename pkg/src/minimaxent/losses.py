"""Conjugates F_theta of the negative generalized entropy, their
(sub)gradients, and the entropy / information / divergence calculators.

Row-wise functions (``*_rows``) take an ``(n, t)`` score matrix and are what
the solver uses; the single-vector functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigurationError, DistributionError, LossSpec, NumericInputError


def _as_rows(Z):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(1, -1)
    if Z.ndim != 2 or Z.shape[1] < 1:
        raise NumericInputError(f"expected score rows of shape (n, t), got {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise NumericInputError("non-finite score")
    return Z


def sorted_scores(Z):
    """Append the implicit zero score and sort each row descending.

    Ties keep ascending original index. Returns ``(order, sorted_values)``,
    both of shape ``(n, t + 1)``.
    """
    Zt = np.hstack([Z, np.zeros((Z.shape[0], 1))])
    order = np.argsort(-Zt, axis=1, kind="stable")
    return order, np.take_along_axis(Zt, order, axis=1)


def k_max_rows(S):
    """Largest k with sum_{i<=k} (S_i - S_k) < 1 for each descending-sorted row."""
    k = np.arange(1, S.shape[1] + 1)
    gaps = np.cumsum(S, axis=1) - k * S
    ok = gaps < 1.0
    # the gap sequence is nondecreasing in k; take the last k that passes
    return S.shape[1] - np.argmax(ok[:, ::-1], axis=1)


def _zero_one_rows(Z):
    order, S = sorted_scores(Z)
    k = np.arange(1, S.shape[1] + 1)
    branch = (k - 1 + np.cumsum(S, axis=1)) / k
    return order, S, branch


def _check_quadratic(loss, Z):
    if Z.shape[1] != 1:
        raise ConfigurationError("the quadratic loss needs a scalar score (t = 1)")


def f_theta_rows(loss: LossSpec, Z) -> np.ndarray:
    Z = _as_rows(Z)
    if loss.kind == "log":
        m = np.maximum(Z.max(axis=1), 0.0)
        return m + np.log(np.exp(-m) + np.exp(Z - m[:, None]).sum(axis=1))
    if loss.kind == "zero-one":
        if Z.shape[1] == 1:
            z = Z[:, 0]
            return np.maximum(np.maximum(z, 0.0), (1.0 + z) / 2.0)
        return _zero_one_rows(Z)[2].max(axis=1)
    if loss.kind == "quadratic":
        _check_quadratic(loss, Z)
        z = Z[:, 0]
        rho = loss.rho
        if np.isinf(rho):
            return z * z / 4.0
        return np.where(np.abs(z) / 2.0 <= rho, z * z / 4.0 + rho * rho, rho * np.abs(z))
    raise ConfigurationError(f"{loss.kind} loss has no conjugate F_theta")


def grad_f_theta_rows(loss: LossSpec, Z) -> np.ndarray:
    Z = _as_rows(Z)
    if loss.kind == "log":
        m = np.maximum(Z.max(axis=1, keepdims=True), 0.0)
        e = np.exp(Z - m)
        return e / (np.exp(-m) + e.sum(axis=1, keepdims=True))
    if loss.kind == "zero-one":
        if Z.shape[1] == 1:
            # binary closed form: both labels active while |z| < 1
            return np.where(np.abs(Z) < 1.0, 0.5, (Z >= 1.0).astype(float))
        order, S = sorted_scores(Z)
        kmax = k_max_rows(S)
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(S.shape[1])[None, :], axis=1)
        active = rank[:, :-1] < kmax[:, None]
        return active / kmax[:, None]
    if loss.kind == "quadratic":
        _check_quadratic(loss, Z)
        return np.clip(Z / 2.0, -loss.rho, loss.rho)
    raise ConfigurationError(f"{loss.kind} loss has no conjugate F_theta")


def f_theta(loss: LossSpec, z) -> float:
    """F_theta(z) for a single length-t score vector."""
    return float(f_theta_rows(loss, np.atleast_1d(z))[0])


def grad_f_theta(loss: LossSpec, z) -> np.ndarray:
    """Gradient, or for the 0-1 loss a subgradient, of F_theta at z."""
    return grad_f_theta_rows(loss, np.atleast_1d(z))[0]


def dual_loss_rows(loss: LossSpec, Z, Theta) -> np.ndarray:
    Z = _as_rows(Z)
    return f_theta_rows(loss, Z) - np.einsum("ij,ij->i", np.asarray(Theta, float), Z)


def pointwise_dual_loss(loss: LossSpec, z, theta_y) -> float:
    """F_theta(z) - theta(y) . z, the per-sample term of the dual objective."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    theta_y = np.atleast_1d(np.asarray(theta_y, dtype=float))
    if z.shape != theta_y.shape:
        raise ConfigurationError("score and target encoding lengths differ")
    return f_theta(loss, z) - float(theta_y @ z)


def minimax_hinge(margin):
    m = np.asarray(margin, dtype=float)
    out = np.maximum(np.maximum(0.0, (1.0 - m) / 2.0), -m)
    return float(out) if out.ndim == 0 else out


def hinge(margin):
    out = np.maximum(0.0, 1.0 - np.asarray(margin, dtype=float))
    return float(out) if out.ndim == 0 else out


# -- generalized entropy, information and divergence -------------------------

_SIMPLEX_TOL = 1e-9


def _simplex(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0 or not np.all(np.isfinite(p)):
        raise DistributionError("distribution must be a finite 1-D vector")
    if np.any(p < -_SIMPLEX_TOL) or abs(p.sum() - 1.0) > _SIMPLEX_TOL:
        raise DistributionError(f"not a probability vector: {p}")
    return np.clip(p, 0.0, None)


def _values(values, size):
    if values is None:
        raise DistributionError("the quadratic loss needs the support values of Y")
    v = np.asarray(values, dtype=float)
    if v.shape != (size,):
        raise DistributionError("support values and probabilities differ in length")
    return v


def entropy(loss: LossSpec, p, values=None) -> float:
    """Minimum expected loss of a constant act under ``p``.

    0-1: 1 - max p. Log: Shannon entropy in nats. Quadratic: variance of the
    distribution putting mass ``p`` on ``values``.
    """
    p = _simplex(p)
    if loss.kind == "zero-one":
        return float(1.0 - p.max())
    if loss.kind == "log":
        nz = p[p > 0]
        return float(-(nz * np.log(nz)).sum())
    if loss.kind == "quadratic":
        v = _values(values, p.size)
        mean = p @ v
        return float(max(p @ (v - mean) ** 2, 0.0))
    raise ConfigurationError(f"no entropy defined for the {loss.kind} loss")


@dataclass(frozen=True)
class DiscreteJoint:
    """Joint pmf on a finite grid; ``probs[i, j] = P(X = support_x[i], Y = support_y[j])``."""

    support_x: Sequence
    support_y: Sequence
    probs: np.ndarray

    def __post_init__(self):
        P = np.array(self.probs, dtype=float, copy=True)
        if P.shape != (len(self.support_x), len(self.support_y)):
            raise DistributionError("probs shape does not match the supports")
        if np.any(P < 0) or abs(P.sum() - 1.0) > 1e-12:
            raise DistributionError("joint probabilities must be nonnegative and sum to 1")
        P.setflags(write=False)
        object.__setattr__(self, "probs", P)

    @property
    def marginal_x(self):
        return self.probs.sum(axis=1)

    @property
    def marginal_y(self):
        return self.probs.sum(axis=0)

    def _y_values(self, loss):
        return np.asarray(self.support_y, dtype=float) if loss.kind == "quadratic" else None


def conditional_entropy(loss: LossSpec, joint: DiscreteJoint) -> float:
    values = joint._y_values(loss)
    total = 0.0
    for px, row in zip(joint.marginal_x, joint.probs):
        if px > 0:
            total += px * entropy(loss, row / px, values)
    return float(total)


def information(loss: LossSpec, joint: DiscreteJoint) -> float:
    """H(Y) - H(Y|X); for the log loss this is Shannon mutual information."""
    marginal = joint.marginal_y
    marginal = marginal / marginal.sum()
    return entropy(loss, marginal, joint._y_values(loss)) - conditional_entropy(loss, joint)


def divergence(loss: LossSpec, p, q, values=None) -> float:
    """E_p[L(Y, a_q)] - H_p(Y), with a_q the Bayes act of ``q``.

    For the 0-1 loss a tied argmax in ``q`` resolves to the lowest index, so
    the value then depends on that tie-break.
    """
    p, q = _simplex(p), _simplex(q)
    if p.size != q.size:
        raise DistributionError("distributions have different supports")
    if loss.kind == "log":
        mask = p > 0
        if np.any(q[mask] == 0):
            return float("inf")
        return float((p[mask] * np.log(p[mask] / q[mask])).sum())
    if loss.kind == "zero-one":
        act = int(np.argmax(q))
        return float((1.0 - p[act]) - (1.0 - p.max()))
    if loss.kind == "quadratic":
        v = _values(values, p.size)
        return float((p @ v - q @ v) ** 2)
    raise ConfigurationError(f"no divergence defined for the {loss.kind} loss")
