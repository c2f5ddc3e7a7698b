"""Shared test oracles, independent of the library's own computation paths."""

import numpy as np


def finite_difference_gradient(f, x, h=1e-5):
    """Central-difference gradient of the scalar function f() with respect to
    the array x, which f reads and this helper perturbs in place."""
    grad = np.zeros_like(x)
    flat = x.ravel()
    grad_flat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f()
        flat[i] = orig - h
        f_minus = f()
        flat[i] = orig
        grad_flat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(a, b):
    """Max absolute difference scaled by the larger gradient magnitude."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


def brute_force_metrics(y_true, y_pred, num_classes):
    """Accuracy, kappa, macro F1, macro Jaccard straight from label lists."""
    y_true = list(map(int, y_true))
    y_pred = list(map(int, y_pred))
    n = len(y_true)
    acc = sum(t == p for t, p in zip(y_true, y_pred)) / n

    p_o = acc
    p_e = 0.0
    for k in range(num_classes):
        p_e += (y_true.count(k) / n) * (y_pred.count(k) / n)
    kappa = (p_o - p_e) / (1.0 - p_e)

    f1s = []
    jacs = []
    for k in range(num_classes):
        tp = sum(t == k and p == k for t, p in zip(y_true, y_pred))
        fp = sum(t != k and p == k for t, p in zip(y_true, y_pred))
        fn = sum(t == k and p != k for t, p in zip(y_true, y_pred))
        if tp + fp == 0 or tp + fn == 0:
            f1s.append(0.0)
        else:
            precision = tp / (tp + fp)
            recall = tp / (tp + fn)
            f1s.append(
                2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
            )
        union = tp + fp + fn
        jacs.append(tp / union if union > 0 else 0.0)
    return acc, kappa, sum(f1s) / num_classes, sum(jacs) / num_classes
