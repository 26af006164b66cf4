"""Numpy implementation of the Q-network kernels.

Reference backend: the compiled twin in ``_mlp_cy`` must match these
results. One hidden ReLU layer, identity output, squared TD error on the
taken action only, Adam updates.
"""
from __future__ import annotations

import numpy as np

NAME = "numpy"


def qvalues(x, w1, b1, w2, b2):
    """Batch forward pass: (B, n_in) -> (B, n_out)."""
    hidden = np.maximum(x @ w1 + b1, 0.0)
    return hidden @ w2 + b2


def loss_and_grads(x, actions, targets, w1, b1, w2, b2):
    """Mean squared TD error on the taken actions, with parameter gradients.

    Returns (loss, gw1, gb1, gw2, gb2).
    """
    batch = x.shape[0]
    z1 = x @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    q = a1 @ w2 + b2

    taken = q[np.arange(batch), actions]
    err = taken - targets
    loss = float(np.mean(err * err))

    dq = np.zeros_like(q)
    dq[np.arange(batch), actions] = 2.0 * err / batch
    gw2 = a1.T @ dq
    gb2 = dq.sum(axis=0)
    da1 = dq @ w2.T
    dz1 = da1 * (z1 > 0.0)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return loss, gw1, gb1, gw2, gb2


def adam_step(params, grads, moments1, moments2, step, lr, beta1, beta2, eps):
    """One Adam update, applied in place to every parameter array.

    ``step`` is the 1-based update count used for bias correction.
    """
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for p, g, m, v in zip(params, grads, moments1, moments2):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
