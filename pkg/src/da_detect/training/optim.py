"""Learning-rate schedule, SGD with momentum and gradient clipping."""

import numpy as np


def lr_at(it, cfg):
    """Two-stage schedule: ``lr_initial`` before ``lr_drop_iter``, ``lr_reduced`` from then on."""
    if not 0 <= it < max(cfg.total_iters, 1):
        raise ValueError(f"iteration {it} outside [0, {cfg.total_iters})")
    return cfg.lr_initial if it < cfg.lr_drop_iter else cfg.lr_reduced


def sgd_step(params, grads, buffers, lr, momentum, weight_decay):
    """In-place update of every array in ``params``.

    g' = g + wd * w;  v = momentum * v + g';  w = w - lr * v
    ``params``, ``grads`` and ``buffers`` are dicts keyed by name; a missing
    gradient counts as zero.
    """
    for name, w in params.items():
        g = grads.get(name)
        v = buffers[name]
        if g is None:
            g = np.zeros_like(w)
        elif g.shape != w.shape or v.shape != w.shape:
            raise ValueError(f"shape mismatch for {name}: w {w.shape}, g {g.shape}, v {v.shape}")
        g = g + weight_decay * w
        v *= momentum
        v += g
        w -= (lr * v).astype(w.dtype)


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def clip_by_global_norm(grads, max_norm):
    """Scale all gradients so their joint L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    norm = global_norm(grads)
    if norm > max_norm:
        s = max_norm / norm
        for k in grads:
            grads[k] = (grads[k] * s).astype(grads[k].dtype)
    return norm
