"""Pure-NumPy episode-step kernels.

Reference semantics for the compiled extension in `_kernels.pyx`; also the
fallback used when the extension is unavailable. Both implementations must
agree to floating-point roundoff (see tests/test_backends.py).

Predictor network, per episode step:
    x (N, D+1) per-cell inputs -> shared affine+ReLU (h units per cell)
    -> flatten -> affine+ReLU (2N) -> affine+sigmoid (N probabilities)

Searcher network, per episode step:
    x (channels*N,) stacked inputs -> affine+ReLU (2N) -> affine+softmax (N)
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def predictor_forward(w1, b1, w2, b2, w3, b3, x):
    """Returns (s, a1, a2) with s the per-cell sigmoid outputs and a1, a2 the
    post-ReLU activations kept for the backward pass."""
    z1 = x @ w1.T + b1  # (N, h)
    a1 = np.maximum(z1, 0.0)
    z2 = w2 @ a1.reshape(-1) + b2  # (2N,)
    a2 = np.maximum(z2, 0.0)
    z3 = w3 @ a2 + b3  # (N,)
    s = expit(z3)
    return s, a1, a2


def predictor_backward(w2, w3, x, a1, a2, s, ds):
    """Gradients of a scalar loss w.r.t. all predictor weights given dLoss/ds.

    Returns (dw1, db1, dw2, db2, dw3, db3).
    """
    dz3 = ds * s * (1.0 - s)
    dw3 = np.outer(dz3, a2)
    db3 = dz3.copy()
    da2 = w3.T @ dz3
    dz2 = np.where(a2 > 0.0, da2, 0.0)
    a1_flat = a1.reshape(-1)
    dw2 = np.outer(dz2, a1_flat)
    db2 = dz2.copy()
    da1 = (w2.T @ dz2).reshape(a1.shape)
    dz1 = np.where(a1 > 0.0, da1, 0.0)  # (N, h)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    return dw1, db1, dw2, db2, dw3, db3


def searcher_forward(w1, b1, w2, b2, x):
    """Returns (raw, a1): full-support softmax over cells plus the hidden
    activation kept for the backward pass."""
    z1 = w1 @ x + b1
    a1 = np.maximum(z1, 0.0)
    z2 = w2 @ a1 + b2
    e = np.exp(z2 - z2.max())
    raw = e / e.sum()
    return raw, a1


def searcher_backward(w1, w2, x, a1, dz2):
    """Gradients given dLoss/dz2 in logit space (pre-softmax).

    Returns (dw1, db1, dw2, db2, dx); dx lets the loss flow into the stacked
    input channels (the predictor's probabilities occupy the first N slots).
    """
    dw2 = np.outer(dz2, a1)
    db2 = dz2.copy()
    da1 = w2.T @ dz2
    dz1 = np.where(a1 > 0.0, da1, 0.0)
    dw1 = np.outer(dz1, x)
    db1 = dz1.copy()
    dx = w1.T @ dz1
    return dw1, db1, dw2, db2, dx


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam update for a single array, in place."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
