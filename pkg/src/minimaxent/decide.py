"""Decision rules induced by a fitted linear model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LinearModel, ModeError
from .losses import _as_rows, grad_f_theta_rows, k_max_rows, sorted_scores

MODES = ("randomized", "label", "distribution", "mean")


@dataclass(frozen=True)
class LabelDistribution:
    probs: np.ndarray
    k_max: int
    rank_permutation: np.ndarray  # rank_permutation[j] = label holding rank j


def k_max(z_tilde) -> int:
    """Largest k with sum_{i<=k} (z_(i) - z_(k)) < 1 over the descending sort
    of ``z_tilde`` (which already includes the trailing zero)."""
    zt = np.asarray(z_tilde, dtype=float)
    S = -np.sort(-zt)
    return int(k_max_rows(S[None, :])[0])


def mem_probs_rows(Z):
    """Randomized robust 0-1 rule for each score row; shape (n, t + 1)."""
    Z = _as_rows(Z)
    order, S = sorted_scores(Z)
    kmax = k_max_rows(S)
    ranks = np.arange(S.shape[1])[None, :]
    top = ranks < kmax[:, None]
    shift = (1.0 - np.where(top, S, 0.0).sum(axis=1)) / kmax
    sorted_probs = np.where(top, S + shift[:, None], 0.0)
    probs = np.empty_like(sorted_probs)
    np.put_along_axis(probs, order, sorted_probs, axis=1)
    return probs, kmax, order


def mem_label_distribution(z) -> LabelDistribution:
    """Label law of the maximum entropy machine for one score vector ``z``.

    The k_max top-ranked labels of (z, 0) share the mass; everything else
    gets probability zero.
    """
    probs, kmax, order = mem_probs_rows(np.atleast_1d(z))
    return LabelDistribution(probs[0], int(kmax[0]), order[0])


def logistic_posterior_rows(Z):
    Z = _as_rows(Z)
    Zt = np.hstack([Z, np.zeros((Z.shape[0], 1))])
    Zt -= Zt.max(axis=1, keepdims=True)
    e = np.exp(Zt)
    return e / e.sum(axis=1, keepdims=True)


def label_distribution_rows(model: LinearModel, Z) -> np.ndarray:
    kind = model.loss.kind
    if kind == "zero-one":
        return mem_probs_rows(Z)[0]
    if kind == "log":
        return logistic_posterior_rows(Z)
    if kind == "hinge":
        Z = _as_rows(Z)
        return np.hstack([Z >= 0, Z < 0]).astype(float)
    raise ModeError("label distributions exist only for classification models")


def predict(model: LinearModel, X, mode: str = "label", seed: int | None = None):
    """Predict for the raw feature rows ``X``.

    mode: ``label`` (most probable class, lowest index on ties), ``distribution``
    (per-row label probabilities), ``randomized`` (one draw per row from that
    distribution, reproducible for a fixed ``seed``) or ``mean`` (the
    conditional-mean regression estimate).
    """
    if mode not in MODES:
        raise ModeError(f"unknown prediction mode {mode!r}")
    Z = model.scores(X)
    if mode == "mean":
        if model.loss.kind != "quadratic":
            raise ModeError("mean prediction needs a quadratic-loss model")
        return grad_f_theta_rows(model.loss, Z)[:, 0]
    if model.loss.kind == "quadratic":
        raise ModeError(f"{mode} prediction needs a classification model")
    P = label_distribution_rows(model, Z)
    if mode == "distribution":
        return P
    if mode == "label":
        return np.argmax(P, axis=1)
    rng = np.random.default_rng(seed)
    u = rng.random(P.shape[0])
    cdf = np.cumsum(P, axis=1)
    draws = (u[:, None] >= cdf).sum(axis=1)
    # rounding in the cdf must never select a zero-probability label
    last = P.shape[1] - 1 - np.argmax(P[:, ::-1] > 0, axis=1)
    return np.minimum(draws, last)
