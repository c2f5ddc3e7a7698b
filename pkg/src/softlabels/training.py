"""Alternating two-phase training: backbone under the regularized
classification loss with the head fixed, then the head under its own loss with
the backbone fixed, minibatch by minibatch. Also home to the SGD optimizer,
gradient clipping, the step learning-rate schedule, and the softness-patience
rule that freezes the class dictionary.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Graph, Tensor, backward
from .classifier import ClassifierNet, lsr_target, mean_cross_entropy, mean_kl_divergence
from .correlation import (
    ClassDictionary,
    EmbeddingNet,
    HeadConfig,
    class_correlation_loss,
    head_logits,
    mean_correct_softness,
    soft_labels,
)
from .metrics import accuracy, cohens_kappa, confusion_matrix
from .seeds import rng_for

MODES = ("hard", "lsr-u", "lsr-a", "ccl")


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    lr_backbone: float = 0.1
    lr_head: float = 5e-4
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_drop_epochs: tuple = None  # None -> 50% and 75% of the epoch budget
    grad_clip_norm: float = 5.0
    patience: int = 10  # softness epochs without a drop before the dictionary freezes; <= 0 disables
    kl_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_drop_epochs is not None:
            drops = tuple(int(e) for e in self.lr_drop_epochs)
            if list(drops) != sorted(drops):
                raise ValueError(f"lr_drop_epochs must be sorted, got {drops}")
            if drops and not 0 <= drops[0] <= drops[-1] <= self.epochs:
                raise ValueError(f"lr_drop_epochs {drops} outside epoch range 0..{self.epochs}")
            self.lr_drop_epochs = drops

    def resolved_drop_epochs(self):
        if self.lr_drop_epochs is not None:
            return self.lr_drop_epochs
        return (self.epochs // 2, (3 * self.epochs) // 4)


def lr_schedule(epoch, cfg):
    """Piecewise-constant rates: both groups drop by 10x at each configured
    epoch (a repeated epoch applies both drops at once)."""
    factor = 0.1 ** sum(1 for d in cfg.resolved_drop_epochs() if epoch >= d)
    return cfg.lr_backbone * factor, cfg.lr_head * factor


class SGD:
    """Momentum SGD with coupled weight decay.

    v <- momentum * v + grad + weight_decay * w;  w <- w - lr * v.
    Parameters with requires_grad False (a frozen dictionary) are skipped
    entirely, so they see neither the gradient nor the decay term.
    """

    def __init__(self, params, lr, momentum=0.9, weight_decay=1e-4):
        self.params = list(params)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for p, v in zip(self.params, self.velocity):
            if not p.requires_grad or p.grad is None:
                continue
            v *= self.momentum
            v += p.grad
            if self.weight_decay:
                v += self.weight_decay * p.data
            if self.lr:
                p.data -= self.lr * v

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def clip_gradients(params, max_norm):
    """Scale the group's gradients so their global L2 norm is at most
    max_norm; returns the pre-clip norm."""
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    total = 0.0
    grads = [p.grad for p in params if p.grad is not None]
    for g in grads:
        total += float(np.dot(g.ravel(), g.ravel()))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


@dataclass
class SoftnessHistory:
    """Tracks per-epoch mean correct-class softness and the freeze decision.

    Only a strict drop below the best value counts as improvement; a plateau
    of `patience` consecutive non-improving epochs triggers the freeze, which
    is never cleared. patience <= 0 disables freezing.
    """

    patience: int = 10
    values: list = field(default_factory=list)
    best: float = float("inf")
    epochs_since_improvement: int = 0
    frozen: bool = False

    def update(self, p_bar):
        """Record one observation; returns True when this one triggers the freeze."""
        self.values.append(float(p_bar))
        if self.frozen:
            return False
        if p_bar < self.best:
            self.best = float(p_bar)
            self.epochs_since_improvement = 0
        else:
            self.epochs_since_improvement += 1
        if self.patience > 0 and self.epochs_since_improvement >= self.patience:
            self.frozen = True
            return True
        return False


@dataclass
class EpochReport:
    epoch: int
    loss_cls: float
    loss_head: float
    softness: float
    lr_backbone: float
    lr_head: float
    frozen: bool
    val_accuracy: float
    val_kappa: float


def format_epoch_line(report):
    """One machine-parseable key=value record per epoch."""
    return (
        f"epoch={report.epoch} "
        f"loss_cls={report.loss_cls!r} "
        f"loss_head={report.loss_head!r} "
        f"softness={report.softness!r} "
        f"lr_backbone={report.lr_backbone!r} "
        f"lr_head={report.lr_head!r} "
        f"frozen={int(report.frozen)} "
        f"val_accuracy={report.val_accuracy!r} "
        f"val_kappa={report.val_kappa!r}"
    )


class Model:
    """The classifier and the correlation head trained by the alternating loop."""

    def __init__(self, input_dim, num_classes, feature_widths=(32, 8), head_cfg=None, *, seed=0):
        self.head_cfg = head_cfg if head_cfg is not None else HeadConfig()
        self.feature_widths = tuple(int(w) for w in feature_widths)
        self.classifier = ClassifierNet(
            input_dim, num_classes, self.feature_widths, rng=rng_for(seed, 2, 0)
        )
        self.embedder = EmbeddingNet(
            self.classifier.feature_dim, self.head_cfg.widths(), rng=rng_for(seed, 2, 1)
        )
        self.dictionary = ClassDictionary(
            num_classes, self.head_cfg.embed_dim, rng=rng_for(seed, 2, 2)
        )

    @property
    def input_dim(self):
        return self.classifier.input_dim

    @property
    def num_classes(self):
        return self.classifier.num_classes

    def backbone_parameters(self):
        return self.classifier.parameters()

    def head_parameters(self):
        return [*self.embedder.parameters(), self.dictionary.embeddings]

    def named_parameters(self):
        named = []
        half = len(self.classifier.backbone.parameters()) // 2
        for i in range(half):
            named.append((f"backbone.w{i}", self.classifier.backbone.weights[i]))
            named.append((f"backbone.b{i}", self.classifier.backbone.biases[i]))
        named.append(("fc.weight", self.classifier.fc_weight))
        named.append(("fc.bias", self.classifier.fc_bias))
        for i in range(len(self.embedder.weights)):
            named.append((f"embedder.w{i}", self.embedder.weights[i]))
            named.append((f"embedder.b{i}", self.embedder.biases[i]))
        named.append(("dictionary", self.dictionary.embeddings))
        return named


def evaluate(model, ds):
    """Confusion matrix of argmax predictions on the dataset (no recording)."""
    _, q = model.classifier.classify(Tensor(ds.features))
    predictions = np.argmax(q.data, axis=1)
    return confusion_matrix(ds.labels, predictions, model.num_classes)


@dataclass
class TrainResult:
    reports: list
    log_lines: list
    soft_matrix: object
    history: SoftnessHistory


def _target_rows(mode, epsilon, train_ds):
    """Per-class constant target rows for the backbone phase (K, K)."""
    num_classes = train_ds.num_classes
    if mode in ("hard", "ccl"):
        return np.eye(num_classes)
    base = "uniform" if mode == "lsr-u" else "apriori"
    freqs = train_ds.class_frequencies if mode == "lsr-a" else None
    return np.stack(
        [lsr_target(y, num_classes, epsilon, base, class_freqs=freqs).probs
         for y in range(num_classes)]
    )


def train(model, train_ds, val_ds, cfg, *, mode="ccl", epsilon=0.1, on_epoch=None):
    """Run the full training loop; returns per-epoch reports and log lines.

    Per minibatch in ccl mode: (1) soft labels are computed from the current
    dictionary, (2) the backbone group takes an SGD step on the mean
    classification loss with the head fixed, (3) the head group takes an SGD
    step on the mean head loss with the backbone fixed. The other modes run
    only step (2) against their fixed targets.

    on_epoch, when given, is called after every epoch with (report, matrix)
    where matrix is the end-of-epoch soft label snapshot.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if len(train_ds) == 0:
        raise ValueError("training dataset is empty")
    if train_ds.dim != model.input_dim:
        raise ValueError(
            f"model expects input dim {model.input_dim}, dataset has dim {train_ds.dim}"
        )
    if train_ds.num_classes != model.num_classes:
        raise ValueError(
            f"model has {model.num_classes} classes, dataset has {train_ds.num_classes}"
        )

    shuffle_rng = rng_for(cfg.seed, 3)
    opt_backbone = SGD(model.backbone_parameters(), cfg.lr_backbone, cfg.momentum, cfg.weight_decay)
    opt_head = SGD(model.head_parameters(), cfg.lr_head, cfg.momentum, cfg.weight_decay)
    history = SoftnessHistory(patience=cfg.patience)
    target_rows = _target_rows(mode, epsilon, train_ds)
    margin = model.head_cfg.margin
    corr_weight = model.head_cfg.corr_weight
    dict_epoch = 0

    reports = []
    log_lines = []
    n = len(train_ds)
    for epoch in range(cfg.epochs):
        opt_backbone.lr, opt_head.lr = lr_schedule(epoch, cfg)
        order = shuffle_rng.permutation(n)
        cls_losses = []
        head_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch_x = train_ds.features[idx]
            batch_y = train_ds.labels[idx]

            soft_rows = None
            if mode == "ccl":
                snapshot = soft_labels(model.dictionary, margin=margin, epoch=dict_epoch)
                soft_rows = snapshot.values[batch_y]

            # phase 1: backbone under the classification loss, head fixed
            with Graph():
                _, q = model.classifier.classify(Tensor(batch_x))
                loss = mean_cross_entropy(q, target_rows[batch_y])
                if soft_rows is not None and cfg.kl_weight != 0.0:
                    kl = mean_kl_divergence(soft_rows, q)
                    if cfg.kl_weight != 1.0:
                        kl = ad.mul_scalar(kl, cfg.kl_weight)
                    loss = ad.add(loss, kl)
                backward(loss)
            clip_gradients(opt_backbone.params, cfg.grad_clip_norm)
            opt_backbone.step()
            opt_backbone.zero_grad()
            cls_losses.append(loss.item())

            # phase 2: head under its loss, backbone fixed
            if mode == "ccl":
                if not model.dictionary.frozen:
                    dict_epoch = epoch
                feats = model.classifier.features(Tensor(batch_x))  # constant: no graph
                with Graph():
                    emb = model.embedder.forward(feats)
                    qh = ad.softmax(head_logits(emb, model.dictionary))
                    head_loss = mean_cross_entropy(qh, np.eye(model.num_classes)[batch_y])
                    if corr_weight != 0.0:
                        corr = class_correlation_loss(model.dictionary, margin)
                        head_loss = ad.add(head_loss, ad.mul_scalar(corr, corr_weight))
                    backward(head_loss)
                clip_gradients(opt_head.params, cfg.grad_clip_norm)
                opt_head.step()
                opt_head.zero_grad()
                head_losses.append(head_loss.item())

        matrix = soft_labels(model.dictionary, margin=margin, epoch=dict_epoch)
        softness = mean_correct_softness(matrix)
        if mode == "ccl" and not model.dictionary.frozen and history.update(softness):
            model.dictionary.freeze()

        cm = evaluate(model, val_ds)
        report = EpochReport(
            epoch=epoch,
            loss_cls=float(np.mean(cls_losses)),
            loss_head=float(np.mean(head_losses)) if head_losses else 0.0,
            softness=softness,
            lr_backbone=opt_backbone.lr,
            lr_head=opt_head.lr,
            frozen=model.dictionary.frozen,
            val_accuracy=accuracy(cm),
            val_kappa=cohens_kappa(cm),
        )
        reports.append(report)
        log_lines.append(format_epoch_line(report))
        if on_epoch is not None:
            on_epoch(report, matrix)

    final_matrix = soft_labels(model.dictionary, margin=margin, epoch=dict_epoch)
    return TrainResult(reports=reports, log_lines=log_lines, soft_matrix=final_matrix,
                       history=history)
