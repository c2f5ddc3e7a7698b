"""Backbone-plus-fc classifier, target distributions, and classification losses.

Targets are plain probability vectors: hard one-hot, label-smoothed mixtures
(uniform or a-priori base), or learned soft rows. Losses are differentiable in
the predicted distribution; the log argument is floored at ``LOG_CLAMP`` so a
zero probability never produces an infinite loss.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError, Tensor, parameter
from .networks import MLP

LOG_CLAMP = 1e-12

TARGET_KINDS = ("hard", "lsr_uniform", "lsr_apriori", "soft_learned")


class ClassifierNet:
    """Feature-extractor MLP with a fully-connected softmax head.

    classify() returns both the feature vector (consumed by the correlation
    head) and the predicted class distribution.
    """

    def __init__(self, input_dim, num_classes, feature_widths=(32, 8), *, rng):
        self.input_dim = int(input_dim)
        self.num_classes = int(num_classes)
        self.backbone = MLP(input_dim, feature_widths, rng=rng)
        n1 = self.backbone.out_dim
        scale = np.sqrt(1.0 / n1)
        self.fc_weight = parameter(rng.standard_normal((self.num_classes, n1)) * scale)
        self.fc_bias = parameter(np.zeros(self.num_classes))

    @property
    def feature_dim(self):
        return self.backbone.out_dim

    def features(self, x):
        return self.backbone.forward(x)

    def classify(self, x):
        f = self.features(x)
        single = f.ndim == 1
        rows = ad.reshape(f, (1, f.shape[0])) if single else f
        logits = ad.add_rowvec(ad.matmul(rows, ad.transpose(self.fc_weight)), self.fc_bias)
        q = ad.softmax(logits)
        if single:
            q = ad.reshape(q, (q.shape[1],))
        return f, q

    def parameters(self):
        return [*self.backbone.parameters(), self.fc_weight, self.fc_bias]


@dataclass
class TargetDistribution:
    """A probability vector over classes used as a classification target."""

    probs: np.ndarray
    kind: str
    epsilon: float = 0.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.kind not in TARGET_KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.probs.ndim != 1:
            raise ValueError(f"target must be a vector, got shape {self.probs.shape}")
        if (self.probs < 0).any() or abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError("target is not a probability vector")

    @property
    def num_classes(self):
        return self.probs.shape[0]


def one_hot(y, num_classes):
    y, num_classes = int(y), int(num_classes)
    if not 0 <= y < num_classes:
        raise ValueError(f"label {y} out of range for {num_classes} classes")
    probs = np.zeros(num_classes)
    probs[y] = 1.0
    return TargetDistribution(probs, "hard")


def lsr_target(y, num_classes, epsilon, base="uniform", class_freqs=None):
    """Label-smoothed target: (1 - eps) * one_hot + eps * base distribution.

    base "uniform" mixes toward 1/K; base "apriori" mixes toward the supplied
    class frequencies (must sum to 1).
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if base == "uniform":
        u = np.full(num_classes, 1.0 / num_classes)
        kind = "lsr_uniform"
    elif base == "apriori":
        if class_freqs is None:
            raise ValueError("apriori smoothing requires class frequencies")
        u = np.asarray(class_freqs, dtype=np.float64)
        if u.shape != (num_classes,) or (u < 0).any() or abs(u.sum() - 1.0) > 1e-9:
            raise ValueError("class frequencies must be a probability vector over the classes")
        kind = "lsr_apriori"
    else:
        raise ValueError(f"unknown smoothing base {base!r}")
    probs = (1.0 - epsilon) * one_hot(y, num_classes).probs + epsilon * u
    return TargetDistribution(probs, kind, epsilon=epsilon)


def _target_probs(target):
    if isinstance(target, TargetDistribution):
        return target.probs
    return np.asarray(target, dtype=np.float64)


def cross_entropy(q, target):
    """-sum(t * log q) with q floored at LOG_CLAMP; differentiable in q."""
    q = ad.as_tensor(q)
    t = _target_probs(target)
    if q.shape != t.shape:
        raise DimensionError(f"cross_entropy: prediction shape {q.shape} vs target shape {t.shape}")
    logq = ad.log(ad.clamp_min(q, LOG_CLAMP))
    return ad.mul_scalar(ad.mul(Tensor(t), logq).sum(), -1.0)


def kl_divergence(p, q):
    """sum(p * log(p / q)) with q floored at LOG_CLAMP; zero p terms drop out."""
    p = _target_probs(p)
    q = ad.as_tensor(q)
    if q.shape != p.shape:
        raise DimensionError(f"kl_divergence: shapes {p.shape} and {q.shape} differ")
    support = p > 0
    p_log_p = float(np.sum(p[support] * np.log(p[support])))
    cross = ad.mul(Tensor(p), ad.log(ad.clamp_min(q, LOG_CLAMP))).sum()
    return ad.add_scalar(ad.mul_scalar(cross, -1.0), p_log_p)


def classification_loss(q_cls, y, soft_row, kl_weight=1.0):
    """Hard-label CE plus KL(soft_row || q): the regularized training loss."""
    q_cls = ad.as_tensor(q_cls)
    loss = cross_entropy(q_cls, one_hot(y, q_cls.shape[-1]))
    if kl_weight == 0.0:
        return loss
    kl = kl_divergence(soft_row, q_cls)
    if kl_weight != 1.0:
        kl = ad.mul_scalar(kl, kl_weight)
    return ad.add(loss, kl)


def predict(q_cls):
    """Index of the largest probability; ties go to the lowest index."""
    data = q_cls.data if isinstance(q_cls, Tensor) else np.asarray(q_cls)
    return int(np.argmax(data))


# Batched variants used by the training loop: targets are an (m, K) matrix of
# constant rows, losses are means over the minibatch.


def mean_cross_entropy(q, target_rows):
    q = ad.as_tensor(q)
    t = np.asarray(target_rows, dtype=np.float64)
    if q.shape != t.shape:
        raise DimensionError(f"mean_cross_entropy: shapes {q.shape} and {t.shape} differ")
    logq = ad.log(ad.clamp_min(q, LOG_CLAMP))
    return ad.mul_scalar(ad.mul(Tensor(t), logq).sum(), -1.0 / q.shape[0])


def mean_kl_divergence(target_rows, q):
    p = np.asarray(target_rows, dtype=np.float64)
    q = ad.as_tensor(q)
    if q.shape != p.shape:
        raise DimensionError(f"mean_kl_divergence: shapes {p.shape} and {q.shape} differ")
    support = p > 0
    p_log_p = float(np.sum(p[support] * np.log(p[support]))) / p.shape[0]
    cross = ad.mul(Tensor(p), ad.log(ad.clamp_min(q, LOG_CLAMP))).sum()
    return ad.add_scalar(ad.mul_scalar(cross, -1.0 / p.shape[0]), p_log_p)
