"""Classification metrics computed from a confusion matrix.

Rows index the true class, columns the predicted class. Macro scores are
unweighted means over classes; a class whose F1/Jaccard denominator is zero
contributes 0 (validation splits guarantee at least one sample per class, so
this convention is a safety net, not a common path).
"""

import numpy as np


class UndefinedKappaError(ValueError):
    """Cohen's kappa is undefined when chance agreement equals 1."""


def confusion_matrix(y_true, y_pred, num_classes):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(
            f"prediction and truth must be equal-length vectors, got {y_true.shape} and {y_pred.shape}"
        )
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if len(arr) and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"{name} labels must lie in [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _checked(cm):
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    total = cm.sum()
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    return cm, float(total)


def accuracy(cm):
    cm, total = _checked(cm)
    return float(np.trace(cm)) / total


def cohens_kappa(cm):
    """(p_o - p_e) / (1 - p_e): agreement corrected for chance."""
    cm, total = _checked(cm)
    p_o = float(np.trace(cm)) / total
    p_e = float(cm.sum(axis=1) @ cm.sum(axis=0)) / (total * total)
    if p_e >= 1.0:
        raise UndefinedKappaError("chance agreement is 1; kappa is undefined")
    return (p_o - p_e) / (1.0 - p_e)


def macro_f1(cm):
    cm, _ = _checked(cm)
    scores = []
    for k in range(cm.shape[0]):
        tp = float(cm[k, k])
        col = float(cm[:, k].sum())
        row = float(cm[k, :].sum())
        # 2PR/(P+R) with P=tp/col, R=tp/row reduces to 2tp/(col+row)
        scores.append(2 * tp / (col + row) if col + row > 0 else 0.0)
    return float(np.mean(scores))


def macro_jaccard(cm):
    cm, _ = _checked(cm)
    scores = []
    for k in range(cm.shape[0]):
        tp = float(cm[k, k])
        denom = float(cm[k, :].sum() + cm[:, k].sum()) - tp
        scores.append(tp / denom if denom > 0 else 0.0)
    return float(np.mean(scores))


def compute_all(cm):
    return {
        "accuracy": accuracy(cm),
        "kappa": cohens_kappa(cm),
        "macro_f1": macro_f1(cm),
        "macro_jaccard": macro_jaccard(cm),
    }


def metric_report(cm):
    """Flat key=value text block with the four metrics and the sample count."""
    cm = np.asarray(cm)
    values = compute_all(cm)
    lines = [f"samples={int(cm.sum())}"]
    lines.extend(f"{key}={value!r}" for key, value in values.items())
    return "\n".join(lines) + "\n"
