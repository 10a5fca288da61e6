"""Held-out domain-classifier estimate of the H-divergence between feature sets."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HDivergenceEstimate:
    err_source: float
    err_target: float
    d_h: float


def h_divergence_from_errors(err_source, err_target):
    """``2 * (1 - (err_S + err_T))`` clamped to [0, 2]."""
    return float(np.clip(2.0 * (1.0 - (err_source + err_target)), 0.0, 2.0))


def fit_logistic(x, y, l2=1e-2, iters=50, tol=1e-8):
    """L2-regularised logistic regression by Newton's method; returns (w, b)."""
    n, d = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    theta = np.zeros(d + 1)
    reg = np.full(d + 1, l2 * n)
    reg[-1] = 0.0
    for _ in range(iters):
        z = np.clip(xa @ theta, -30, 30)
        p = 1.0 / (1.0 + np.exp(-z))
        grad = xa.T @ (p - y) + reg * theta
        hess = (xa * (p * (1 - p))[:, None]).T @ xa + np.diag(reg) + 1e-9 * np.eye(d + 1)
        step = np.linalg.solve(hess, grad)
        theta -= step
        if np.max(np.abs(step)) < tol:
            break
    return theta[:-1], theta[-1]


def estimate_h_divergence(feats_source, feats_target, seed=0, l2=1e-2):
    """Proxy H-divergence from a logistic domain classifier.

    Each set is shuffled and split in half; the classifier is fit on the
    first halves (source labelled 0, target 1) and its 0/1 errors at
    threshold 0.5 on the held-out halves give ``err_source`` / ``err_target``.
    """
    xs = np.asarray(feats_source, dtype=np.float64)
    xt = np.asarray(feats_target, dtype=np.float64)
    if xs.ndim != 2 or xt.ndim != 2:
        raise ValueError("feature sets must be 2-d arrays [n, d]")
    if xs.shape[1] != xt.shape[1]:
        raise ValueError(f"dimension mismatch: {xs.shape[1]} vs {xt.shape[1]}")
    if len(xs) < 10 or len(xt) < 10:
        raise ValueError("need at least 10 feature vectors per domain")
    rng = np.random.default_rng(seed)
    xs = xs[rng.permutation(len(xs))]
    xt = xt[rng.permutation(len(xt))]
    hs, ht = len(xs) // 2, len(xt) // 2
    train = np.vstack([xs[:hs], xt[:ht]])
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd < 1e-12] = 1.0
    y = np.concatenate([np.zeros(hs), np.ones(ht)])
    w, b = fit_logistic((train - mu) / sd, y, l2=l2)
    pred_s = ((xs[hs:] - mu) / sd) @ w + b >= 0
    pred_t = ((xt[ht:] - mu) / sd) @ w + b >= 0
    err_s = float(np.mean(pred_s))
    err_t = float(np.mean(~pred_t))
    return HDivergenceEstimate(err_s, err_t, h_divergence_from_errors(err_s, err_t))
