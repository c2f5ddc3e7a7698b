"""Reference kernels backed by numpy.

Mirrors the API of the compiled extension ``_fast``; the package falls back to
this module when the extension is not built. Conventions shared by both
backends: arrays are C-contiguous float64, elementwise kernels receive 1-D
(raveled) views, matmul and row kernels receive 2-D arrays, and softmax /
normalize accept 1-D or 2-D input and work over the last axis. Every kernel
returns freshly allocated output.
"""

import numpy as np


def matmul_nn(a, b):
    return a @ b


def matmul_nt(a, b):
    return np.ascontiguousarray(a @ b.T)


def matmul_tn(a, b):
    return np.ascontiguousarray(a.T @ b)


def transpose(a):
    return np.ascontiguousarray(a.T)


def add(a, b):
    return a + b


def sub(a, b):
    return a - b


def mul(a, b):
    return a * b


def add_scalar(a, c):
    return a + c


def mul_scalar(a, c):
    return a * c


def add_rowvec(a, v):
    return a + v


def col_sums(a):
    return a.sum(axis=0)


def relu(a):
    return np.maximum(a, 0.0)


def relu_backward(g, x):
    return np.where(x > 0.0, g, 0.0)


def exp(a):
    return np.exp(a)


def log(a):
    return np.log(a)


def log_backward(g, x):
    return g / x


def clamp_min(a, c):
    return np.maximum(a, c)


def clamp_min_backward(g, x, c):
    return np.where(x > c, g, 0.0)


def total_sum(a):
    return float(a.sum())


def sumsq(a):
    return float(np.dot(a, a))


def softmax(a):
    z = a - a.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(g, y):
    s = (g * y).sum(axis=-1, keepdims=True)
    return y * (g - s)


def normalize(a):
    """L2-normalize over the last axis; returns (normalized, norms).

    norms is a float for 1-D input and a (rows,) array for 2-D input. Callers
    are responsible for rejecting near-zero norms before using the output.
    """
    if a.ndim == 1:
        n = float(np.sqrt(np.dot(a, a)))
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / n, n
    n = np.sqrt((a * a).sum(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return a / n[:, None], n


def normalize_backward(g, y, norms):
    if g.ndim == 1:
        return (g - np.dot(g, y) * y) / norms
    s = (g * y).sum(axis=1, keepdims=True)
    return (g - s * y) / np.asarray(norms)[:, None]
