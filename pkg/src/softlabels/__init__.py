"""Interclass-correlation learning: soft labels from class embeddings.

A small library plus CLI that learns correlations between classes as distances
between learnable class embeddings, turns them into soft label distributions,
and uses those to regularize a classifier. Built on an in-package autodiff
core with compiled kernels (numpy fallback selected at import).
"""

from .autodiff import (
    DegenerateVectorError,
    DimensionError,
    Graph,
    GraphError,
    Tensor,
    backward,
    parameter,
)
from .classifier import (
    ClassifierNet,
    TargetDistribution,
    classification_loss,
    cross_entropy,
    kl_divergence,
    lsr_target,
    one_hot,
    predict,
)
from .correlation import (
    ClassDictionary,
    EmbeddingNet,
    HeadConfig,
    SoftLabelMatrix,
    class_correlation_loss,
    distance,
    head_logits,
    head_loss,
    mean_correct_softness,
    soft_labels,
)
from .datasets import LabeledDataset, SyntheticSpec, generate_synthetic, load_dataset, save_dataset, stratified_split
from .metrics import accuracy, cohens_kappa, confusion_matrix, macro_f1, macro_jaccard
from .training import Model, SoftnessHistory, TrainConfig, evaluate, train

__version__ = "0.1.0"
