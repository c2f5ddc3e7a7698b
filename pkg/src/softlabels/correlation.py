"""The correlation head: class embeddings, distance losses, and soft labels.

An embedding network projects backbone features next to a dictionary of one
learnable embedding per class. Distances between dictionary entries encode how
strongly classes are correlated; softmaxing the negated distances row by row
yields the soft label distributions used to regularize the classifier.

All distances are squared L2 between L2-normalized vectors, so they live in
[0, 4] and a value of 2 marks orthogonality — the margin that separates
"correlated" from "uncorrelated".
"""

import re
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import MIN_NORM, DegenerateVectorError, DimensionError, parameter
from .classifier import cross_entropy, mean_cross_entropy, one_hot
from .networks import MLP


@dataclass
class HeadConfig:
    """Settings for the correlation head.

    margin is (sqrt 2)^2 = 2 by default: normalized embeddings further apart
    than orthogonal are pushed back together by the correlation loss.
    """

    embed_dim: int = 16
    hidden: tuple = (64, 64)
    margin: float = 2.0
    corr_weight: float = 10.0
    lr_head: float = 5e-4

    def __post_init__(self):
        self.hidden = tuple(int(w) for w in self.hidden)
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.corr_weight < 0:
            raise ValueError(f"corr_weight must be nonnegative, got {self.corr_weight}")
        if self.lr_head < 0:
            raise ValueError(f"lr_head must be nonnegative, got {self.lr_head}")

    def widths(self):
        return (*self.hidden, int(self.embed_dim))

    @staticmethod
    def full_scale():
        """The large preset: 1024-1024-512 embedding layers."""
        return HeadConfig(embed_dim=512, hidden=(1024, 1024))


class EmbeddingNet(MLP):
    """Projects backbone features into the class-embedding space."""


class ClassDictionary:
    """The K learnable class embeddings, one row per class.

    Entries must keep a nonzero norm (they are compared after L2
    normalization); construction and every distance computation reject
    degenerate rows. Once frozen, nothing mutates the embeddings.
    """

    def __init__(self, num_classes, dim, *, rng=None, embeddings=None):
        if embeddings is None:
            if rng is None:
                raise ValueError("either a generator or explicit embeddings is required")
            raw = rng.standard_normal((int(num_classes), int(dim)))
            raw /= np.linalg.norm(raw, axis=1, keepdims=True)
            embeddings = raw
        else:
            embeddings = np.asarray(embeddings, dtype=np.float64)
            if embeddings.shape != (int(num_classes), int(dim)):
                raise DimensionError(
                    f"expected embeddings of shape {(int(num_classes), int(dim))}, "
                    f"got {embeddings.shape}"
                )
        norms = np.linalg.norm(embeddings, axis=1)
        if (norms < MIN_NORM).any():
            k = int(np.argmax(norms < MIN_NORM))
            raise DegenerateVectorError(f"class {k} embedding has near-zero norm", index=k)
        self.embeddings = parameter(embeddings)
        self.frozen = False

    @classmethod
    def from_embeddings(cls, embeddings):
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if embeddings.ndim != 2:
            raise DimensionError(f"expected a (K, dim) matrix, got shape {embeddings.shape}")
        return cls(embeddings.shape[0], embeddings.shape[1], embeddings=embeddings)

    @property
    def num_classes(self):
        return self.embeddings.shape[0]

    @property
    def dim(self):
        return self.embeddings.shape[1]

    def embedding(self, k):
        return self.embeddings.data[k].copy()

    def freeze(self):
        self.frozen = True
        self.embeddings.requires_grad = False


def _normalized_dictionary(dictionary):
    try:
        return ad.normalize_rows(dictionary.embeddings)
    except DegenerateVectorError as exc:
        raise DegenerateVectorError(
            f"class {exc.index} embedding is degenerate (near-zero norm)", index=exc.index
        ) from None


def distance(e1, e2):
    """Squared L2 distance between the L2-normalized vectors; range [0, 4].

    Equals 2 - 2*cos(angle): 0 for parallel, 2 for orthogonal, 4 for
    antipodal directions. Scale invariant; errors on near-zero input.
    """
    e1, e2 = ad.as_tensor(e1), ad.as_tensor(e2)
    if e1.shape != e2.shape or e1.ndim != 1:
        raise DimensionError(f"distance: expected equal-length vectors, got {e1.shape} and {e2.shape}")
    diff = ad.sub(ad.l2_normalize(e1), ad.l2_normalize(e2))
    return ad.mul(diff, diff).sum()


def head_logits(e, dictionary):
    """Negated distances from the embedding to every class embedding.

    softmax of the result is the head's predicted class distribution. Accepts
    a single embedding (returns a K-vector) or a batch (returns (m, K)).
    """
    e = ad.as_tensor(e)
    single = e.ndim == 1
    if single:
        e_hat = ad.reshape(ad.l2_normalize(e), (1, e.shape[0]))
    else:
        e_hat = ad.normalize_rows(e)
    c_hat = _normalized_dictionary(dictionary)
    if e_hat.shape[1] != c_hat.shape[1]:
        raise DimensionError(
            f"head_logits: embedding dim {e_hat.shape[1]} vs dictionary dim {c_hat.shape[1]}"
        )
    # -(2 - 2 e.c) for unit vectors == -||e - c||^2
    dots = ad.matmul(e_hat, ad.transpose(c_hat))
    logits = ad.add_scalar(ad.mul_scalar(dots, 2.0), -2.0)
    if single:
        logits = ad.reshape(logits, (logits.shape[1],))
    return logits


def class_correlation_loss(dictionary, margin=2.0):
    """Mean hinge excess of pairwise dictionary distances over the margin.

    (1/K^2) * sum_jk relu(d(c_j, c_k) - margin); zero exactly when every pair
    of class embeddings is within the margin.
    """
    c_hat = _normalized_dictionary(dictionary)
    dots = ad.matmul(c_hat, ad.transpose(c_hat))
    dists = ad.add_scalar(ad.mul_scalar(dots, -2.0), 2.0)
    excess = ad.relu(ad.add_scalar(dists, -float(margin)))
    k = dictionary.num_classes
    return ad.mul_scalar(excess.sum(), 1.0 / (k * k))


def head_loss(e, y, dictionary, cfg):
    """Cross entropy of the distance-based prediction plus the weighted
    correlation loss; the objective that trains the embedding net and the
    dictionary."""
    logits = head_logits(e, dictionary)
    q = ad.softmax(logits)
    loss = cross_entropy(q, one_hot(int(y), dictionary.num_classes))
    if cfg.corr_weight != 0.0:
        corr = class_correlation_loss(dictionary, cfg.margin)
        loss = ad.add(loss, ad.mul_scalar(corr, cfg.corr_weight))
    return loss


def head_loss_batch(e_batch, labels, dictionary, cfg):
    """Minibatch mean of head_loss: mean CE over rows + weighted correlation loss."""
    logits = head_logits(e_batch, dictionary)
    q = ad.softmax(logits)
    targets = np.eye(dictionary.num_classes)[np.asarray(labels, dtype=np.int64)]
    loss = mean_cross_entropy(q, targets)
    if cfg.corr_weight != 0.0:
        corr = class_correlation_loss(dictionary, cfg.margin)
        loss = ad.add(loss, ad.mul_scalar(corr, cfg.corr_weight))
    return loss


@dataclass
class SoftLabelMatrix:
    """Row-stochastic soft label distributions, one row per class.

    Row k is the target distribution for class k; the diagonal holds the
    correct-class probability and is the row maximum for any dictionary with
    pairwise-distinct normalized embeddings. margin and epoch record how and
    when the matrix was generated.
    """

    values: np.ndarray
    margin: float
    epoch: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        k = self.values.shape[0]
        if self.values.ndim != 2 or self.values.shape != (k, k):
            raise DimensionError(f"soft label matrix must be square, got {self.values.shape}")
        rows = self.values.sum(axis=1)
        if (self.values < 0).any() or np.abs(rows - 1.0).max() > 1e-9:
            raise ValueError("soft label rows must each sum to 1")

    @property
    def num_classes(self):
        return self.values.shape[0]

    def row(self, k):
        return self.values[k]

    def save(self, path):
        """Comma-separated rows at 6 decimal places under a one-line header."""
        lines = [f"# classes={self.num_classes} b={self.margin:g} epoch={self.epoch}"]
        for row in self.values:
            lines.append(",".join(f"{v:.6f}" for v in row))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            lines = [line.strip() for line in fh if line.strip()]
        if not lines:
            raise ValueError(f"{path}: empty soft label file")
        header = re.fullmatch(r"# classes=(\d+) b=(\S+) epoch=(\d+)", lines[0])
        if header is None:
            raise ValueError(f"{path}: malformed header {lines[0]!r}")
        k, margin, epoch = int(header.group(1)), float(header.group(2)), int(header.group(3))
        rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
        values = np.asarray(rows, dtype=np.float64)
        if values.shape != (k, k):
            raise ValueError(f"{path}: expected a {k}x{k} matrix, got {values.shape}")
        # rows were rounded to 6 decimals on save; renormalize the residue
        values /= values.sum(axis=1, keepdims=True)
        return cls(values=values, margin=margin, epoch=epoch)


def soft_labels(dictionary, *, margin=2.0, epoch=0):
    """Soft label matrix from the current dictionary (gradient-free snapshot).

    Row k is softmax over j of -distance(c_j, c_k).
    """
    K = kernels.active
    emb = dictionary.embeddings.data
    c_hat, norms = K.normalize(emb)
    if (norms < MIN_NORM).any():
        k = int(np.argmax(norms < MIN_NORM))
        raise DegenerateVectorError(
            f"class {k} embedding is degenerate (near-zero norm)", index=k
        )
    dots = K.matmul_nt(c_hat, c_hat)
    n = emb.shape[0]
    logits = K.add_scalar(K.mul_scalar(dots.ravel(), 2.0), -2.0).reshape(n, n)
    values = K.softmax(logits)
    return SoftLabelMatrix(values=values, margin=float(margin), epoch=int(epoch))


def mean_correct_softness(matrix):
    """Mean diagonal of the soft label matrix; 1.0 means fully hard labels."""
    values = matrix.values if isinstance(matrix, SoftLabelMatrix) else np.asarray(matrix)
    return float(np.mean(np.diag(values)))


def nearest_uniform_epsilon(matrix):
    """Epsilon of the uniform-base smoothing whose correct-class probability
    matches the matrix's mean softness."""
    values = matrix.values if isinstance(matrix, SoftLabelMatrix) else np.asarray(matrix)
    k = values.shape[0]
    if k < 2:
        return 0.0
    return (1.0 - mean_correct_softness(values)) * k / (k - 1)
