"""Dataset container, synthetic cluster generator, stratified split, file I/O.

The synthetic generator stands in for an image corpus: interclass similarity
is induced geometrically. Classes come in optional sibling pairs whose cluster
centers sit d_near apart, while any two non-sibling classes are at least d_far
apart, so "visually similar" classes are exactly the geometrically close ones.

Dataset files are plain text: a `K=<int> dim=<int>` header line, then one
`label,v1,...,v_dim` row per sample with 1-based labels. Lines starting with
`#` and blank lines are ignored. Labels are 0-based everywhere inside the
package; the conversion happens only here at the file boundary.
"""

from dataclasses import dataclass

import numpy as np

from .seeds import rng_for


class DatasetFormatError(ValueError):
    """A dataset file violates the expected format."""


@dataclass
class LabeledDataset:
    """Feature vectors with integer class labels in [0, num_classes)."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64, order="C")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.num_classes = int(self.num_classes)
        if self.features.ndim != 2:
            raise ValueError(f"features must be (N, dim), got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if self.num_classes < 1:
            raise ValueError("need at least one class")
        if len(self) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    @property
    def class_frequencies(self):
        return self.class_counts / max(len(self), 1)

    def subset(self, indices):
        return LabeledDataset(self.features[indices], self.labels[indices], self.num_classes)


@dataclass
class SyntheticSpec:
    """Recipe for Gaussian class clusters with controlled interclass geometry.

    per_class is a single count or one count per class (for imbalance).
    sibling_pairs lists disjoint class-index pairs placed d_near apart;
    remaining classes are singletons. stddev=0 collapses every sample onto
    its class center.
    """

    num_classes: int
    per_class: object = 30
    dim: int = 8
    sibling_pairs: tuple = ()
    d_near: float = 1.0
    d_far: float = 8.0
    stddev: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.num_classes = int(self.num_classes)
        self.dim = int(self.dim)
        self.sibling_pairs = tuple((int(a), int(b)) for a, b in self.sibling_pairs)
        if self.num_classes < 1:
            raise ValueError("need at least one class")
        if (self.counts() < 1).any():
            raise ValueError("every class needs at least one sample")
        if self.stddev < 0:
            raise ValueError(f"stddev must be nonnegative, got {self.stddev}")
        if not 0 < self.d_near < self.d_far:
            raise ValueError(f"need 0 < d_near < d_far, got {self.d_near} and {self.d_far}")
        seen = set()
        for a, b in self.sibling_pairs:
            if a == b or not (0 <= a < self.num_classes and 0 <= b < self.num_classes):
                raise ValueError(f"invalid sibling pair ({a}, {b})")
            if a in seen or b in seen:
                raise ValueError(f"class {a if a in seen else b} appears in two sibling pairs")
            seen.update((a, b))
        groups = self.num_classes - len(self.sibling_pairs)
        needed = groups + (1 if self.sibling_pairs else 0)
        if self.dim < needed:
            raise ValueError(
                f"dim={self.dim} too small for {groups} cluster groups"
                f"{' plus a sibling offset axis' if self.sibling_pairs else ''} (need >= {needed})"
            )

    def counts(self):
        if np.isscalar(self.per_class):
            return np.full(self.num_classes, int(self.per_class), dtype=np.int64)
        counts = np.asarray(self.per_class, dtype=np.int64)
        if counts.shape != (self.num_classes,):
            raise ValueError(f"per_class must have {self.num_classes} entries, got {counts.shape}")
        return counts

    def centers(self):
        """Class centers: one basis direction per group, scaled by d_far;
        the second member of a sibling pair is offset d_near along a shared
        extra axis. Non-sibling center distances are therefore >= d_far."""
        centers = np.zeros((self.num_classes, self.dim))
        paired = {c for pair in self.sibling_pairs for c in pair}
        groups = list(self.sibling_pairs) + [(k,) for k in range(self.num_classes) if k not in paired]
        offset_axis = len(groups)
        for g, group in enumerate(groups):
            base = np.zeros(self.dim)
            base[g] = self.d_far
            centers[group[0]] = base
            if len(group) == 2:
                sibling = base.copy()
                sibling[offset_axis] += self.d_near
                centers[group[1]] = sibling
        return centers


def generate_synthetic(spec):
    """Sample the spec's Gaussian clusters; deterministic under spec.seed."""
    rng = rng_for(spec.seed, 0)
    centers = spec.centers()
    counts = spec.counts()
    features = []
    labels = []
    for k in range(spec.num_classes):
        noise = rng.standard_normal((counts[k], spec.dim))
        features.append(centers[k] + spec.stddev * noise)
        labels.append(np.full(counts[k], k, dtype=np.int64))
    return LabeledDataset(np.vstack(features), np.concatenate(labels), spec.num_classes)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def stratified_split(ds, ratio=0.8, seed=0):
    """Split per class: round(ratio * count) to train (half-up), at least one
    sample on each side. Deterministic under the seed."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    counts = ds.class_counts
    if (counts < 2).any():
        k = int(np.argmax(counts < 2))
        raise ValueError(f"class {k} has {counts[k]} sample(s); need at least 2 to split")
    rng = rng_for(seed, 1)
    train_idx = []
    val_idx = []
    for k in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == k)
        members = members[rng.permutation(len(members))]
        n_train = min(max(_round_half_up(ratio * len(members)), 1), len(members) - 1)
        train_idx.append(members[:n_train])
        val_idx.append(members[n_train:])
    return ds.subset(np.concatenate(train_idx)), ds.subset(np.concatenate(val_idx))


def save_dataset(ds, path):
    lines = [f"K={ds.num_classes} dim={ds.dim}"]
    for label, row in zip(ds.labels, ds.features):
        lines.append(",".join([str(int(label) + 1), *(repr(float(v)) for v in row)]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path):
    """Parse a dataset file; errors carry the 1-based offending line number."""
    header = None
    features = []
    labels = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                parts = line.split()
                if (
                    len(parts) != 2
                    or not parts[0].startswith("K=")
                    or not parts[1].startswith("dim=")
                ):
                    raise DatasetFormatError(
                        f"{path}: line {lineno}: expected header 'K=<int> dim=<int>', got {line!r}"
                    )
                try:
                    header = (int(parts[0][2:]), int(parts[1][4:]))
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: line {lineno}: non-integer header values in {line!r}"
                    ) from None
                if header[0] < 1 or header[1] < 1:
                    raise DatasetFormatError(f"{path}: line {lineno}: K and dim must be positive")
                continue
            num_classes, dim = header
            fields = line.split(",")
            if len(fields) != dim + 1:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: expected {dim + 1} comma-separated values "
                    f"(label and {dim} features), got {len(fields)}"
                )
            try:
                label = int(fields[0])
                values = [float(v) for v in fields[1:]]
            except ValueError:
                raise DatasetFormatError(f"{path}: line {lineno}: malformed number") from None
            if not 1 <= label <= num_classes:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: label {label} outside 1..{num_classes}"
                )
            labels.append(label - 1)
            features.append(values)
    if header is None:
        raise DatasetFormatError(f"{path}: missing 'K=<int> dim=<int>' header")
    if not features:
        raise DatasetFormatError(f"{path}: no data rows")
    return LabeledDataset(np.asarray(features), np.asarray(labels), header[0])
