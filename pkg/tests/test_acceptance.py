"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. The training-based criteria share session fixtures so each experiment
runs once.
"""

import math
import time
from types import SimpleNamespace

import numpy as np
import pytest

import softlabels.autodiff as ad
from helpers import brute_force_metrics, finite_difference_gradient, relative_error
from softlabels.autodiff import Graph, Tensor, backward, parameter
from softlabels.classifier import (
    classification_loss,
    cross_entropy,
    kl_divergence,
    lsr_target,
    one_hot,
)
from softlabels.cli import main as cli_main
from softlabels.correlation import (
    ClassDictionary,
    HeadConfig,
    class_correlation_loss,
    distance,
    mean_correct_softness,
    soft_labels,
)
from softlabels.datasets import SyntheticSpec, generate_synthetic, stratified_split
from softlabels.metrics import accuracy, cohens_kappa, macro_f1, macro_jaccard
from softlabels.training import Model, SoftnessHistory, TrainConfig, train

# closed-form overfit-limit constants: a = exp(-b), S = 1 + (K-1)a at K=7, b=2
A = math.exp(-2.0)
S = 1.0 + 6.0 * A
EPS_STAR = 7.0 * A / S  # 0.52281

SIBLING_PAIRS = ((0, 1), (2, 3), (4, 5))


def _report(criterion, label):
    print(f"\nACCEPTANCE {criterion} ({label}): PASS")


# --- shared experiment fixtures -------------------------------------------------


@pytest.fixture(scope="session")
def overfit_limit_run():
    """Criterion 2 setup: K=7, b=2, alpha=10, freezing disabled, to convergence."""
    start = time.perf_counter()
    spec = SyntheticSpec(num_classes=7, per_class=30, dim=8, d_far=8.0, stddev=0.5, seed=1)
    ds = generate_synthetic(spec)
    train_ds, val_ds = stratified_split(ds, ratio=0.8, seed=1)
    model = Model(8, 7, head_cfg=HeadConfig(lr_head=0.02), seed=1)
    cfg = TrainConfig(epochs=200, batch_size=32, lr_head=0.02, lr_drop_epochs=(140, 170),
                      patience=0, seed=1)
    matrices = []
    result = train(model, train_ds, val_ds, cfg, mode="ccl",
                   on_epoch=lambda report, matrix: matrices.append(matrix))
    return SimpleNamespace(model=model, result=result, matrices=matrices,
                           elapsed=time.perf_counter() - start)


@pytest.fixture(scope="session")
def sibling_runs():
    """Criterion 3 setup: 3 sibling pairs, freezing enabled, five seeds."""
    start = time.perf_counter()
    runs = []
    for seed in range(5):
        spec = SyntheticSpec(num_classes=6, per_class=40, dim=8, sibling_pairs=SIBLING_PAIRS,
                             d_near=1.0, d_far=8.0, stddev=0.5, seed=seed)
        ds = generate_synthetic(spec)
        train_ds, val_ds = stratified_split(ds, ratio=0.8, seed=seed)
        model = Model(8, 6, head_cfg=HeadConfig(lr_head=0.01), seed=seed)
        cfg = TrainConfig(epochs=60, batch_size=32, lr_head=0.01, patience=10, seed=seed)
        matrices = []
        reports = []

        def capture(report, matrix, matrices=matrices, reports=reports):
            matrices.append(matrix)
            reports.append(report)

        result = train(model, train_ds, val_ds, cfg, mode="ccl", on_epoch=capture)
        runs.append(SimpleNamespace(seed=seed, result=result, matrices=matrices,
                                    reports=reports))
    return SimpleNamespace(runs=runs, elapsed=time.perf_counter() - start)


# --- criterion 1: gradient integrity ---------------------------------------------


def _fd_check(make_loss, param, tol=1e-5):
    param.zero_grad()
    with Graph():
        backward(make_loss())
    analytic = param.grad.copy()
    numeric = finite_difference_gradient(lambda: make_loss().item(), param.data, h=1e-5)
    return relative_error(analytic, numeric) <= tol


def test_criterion_1_gradient_integrity():
    rng = np.random.default_rng(2024)
    instances = 100
    start = time.perf_counter()

    def vec(n=5):
        return rng.standard_normal(n)

    def probe_for(shape):
        return Tensor(rng.standard_normal(shape))

    failures = []

    def run_op(name, build):
        for _ in range(instances):
            make_loss, param = build()
            if not _fd_check(make_loss, param):
                failures.append(name)
                return

    def away_from(values, point, width=1e-2, fill=0.5):
        values = values.copy()
        values[np.abs(values - point) < width] = fill
        return values

    run_op("add", lambda: (lambda p=parameter(vec()), o=Tensor(vec()), pr=probe_for(5):
                           (lambda: ad.mul(ad.add(p, o), pr).sum(), p))())
    run_op("sub", lambda: (lambda p=parameter(vec()), o=Tensor(vec()), pr=probe_for(5):
                           (lambda: ad.mul(ad.sub(p, o), pr).sum(), p))())
    run_op("mul", lambda: (lambda p=parameter(vec()), o=Tensor(vec()), pr=probe_for(5):
                           (lambda: ad.mul(ad.mul(p, o), pr).sum(), p))())
    run_op("add_scalar", lambda: (lambda p=parameter(vec()), pr=probe_for(5):
                                  (lambda: ad.mul(ad.add_scalar(p, 1.3), pr).sum(), p))())
    run_op("mul_scalar", lambda: (lambda p=parameter(vec()), pr=probe_for(5):
                                  (lambda: ad.mul(ad.mul_scalar(p, -2.1), pr).sum(), p))())
    run_op("relu", lambda: (lambda p=parameter(away_from(vec(), 0.0)), pr=probe_for(5):
                            (lambda: ad.mul(ad.relu(p), pr).sum(), p))())
    run_op("exp", lambda: (lambda p=parameter(vec()), pr=probe_for(5):
                           (lambda: ad.mul(ad.exp(p), pr).sum(), p))())
    run_op("log", lambda: (lambda p=parameter(rng.uniform(0.2, 3.0, 5)), pr=probe_for(5):
                           (lambda: ad.mul(ad.log(p), pr).sum(), p))())
    run_op("clamp_min", lambda: (lambda p=parameter(away_from(vec(), 0.2, fill=0.9)),
                                 pr=probe_for(5):
                                 (lambda: ad.mul(ad.clamp_min(p, 0.2), pr).sum(), p))())
    run_op("sum", lambda: (lambda p=parameter(vec()): (lambda: p.sum(), p))())
    run_op("mean", lambda: (lambda p=parameter(vec()): (lambda: p.mean(), p))())
    run_op("matmul_lhs", lambda: (lambda p=parameter(rng.standard_normal((3, 4))),
                                  o=Tensor(rng.standard_normal((4, 2))):
                                  (lambda: ad.matmul(p, o).sum(), p))())
    run_op("matmul_rhs", lambda: (lambda o=Tensor(rng.standard_normal((3, 4))),
                                  p=parameter(rng.standard_normal((4, 2))):
                                  (lambda: ad.matmul(o, p).sum(), p))())
    run_op("transpose", lambda: (lambda p=parameter(rng.standard_normal((3, 4))),
                                 pr=probe_for((4, 3)):
                                 (lambda: ad.mul(ad.transpose(p), pr).sum(), p))())
    run_op("reshape", lambda: (lambda p=parameter(rng.standard_normal((2, 6))),
                               pr=probe_for((3, 4)):
                               (lambda: ad.mul(ad.reshape(p, (3, 4)), pr).sum(), p))())
    run_op("add_rowvec", lambda: (lambda p=parameter(vec(4)),
                                  m=Tensor(rng.standard_normal((3, 4))),
                                  pr=probe_for((3, 4)):
                                  (lambda: ad.mul(ad.add_rowvec(m, p), pr).sum(), p))())
    run_op("softmax", lambda: (lambda p=parameter(rng.uniform(-4, 4, 6)), pr=probe_for(6):
                               (lambda: ad.mul(ad.softmax(p), pr).sum(), p))())
    run_op("l2_normalize", lambda: (lambda p=parameter(vec() + np.sign(vec()) * 0.5),
                                    pr=probe_for(5):
                                    (lambda: ad.mul(ad.l2_normalize(p), pr).sum(), p))())
    run_op("normalize_rows", lambda: (lambda p=parameter(rng.standard_normal((3, 4)) + 1.0),
                                      pr=probe_for((3, 4)):
                                      (lambda: ad.mul(ad.normalize_rows(p), pr).sum(), p))())

    # the three losses
    def ce_instance():
        z = parameter(rng.uniform(-3, 3, 6))
        y = int(rng.integers(6))
        return (lambda: cross_entropy(ad.softmax(z), one_hot(y, 6))), z

    def kl_instance():
        z = parameter(rng.uniform(-3, 3, 6))
        p = rng.uniform(0.05, 1.0, 6)
        p /= p.sum()
        return (lambda: kl_divergence(p, ad.softmax(z))), z

    def corr_instance():
        margin = 0.5
        while True:
            emb = rng.standard_normal((4, 5))
            emb /= np.linalg.norm(emb, axis=1, keepdims=True)
            dist = 2.0 - 2.0 * emb @ emb.T
            off = dist[~np.eye(4, dtype=bool)]
            if np.min(np.abs(off - margin)) > 1e-2:  # stay off the hinge kink
                break
        d = ClassDictionary.from_embeddings(emb)
        return (lambda: class_correlation_loss(d, margin)), d.embeddings

    run_op("loss_cross_entropy", ce_instance)
    run_op("loss_kl_divergence", kl_instance)
    run_op("loss_class_correlation", corr_instance)

    elapsed = time.perf_counter() - start
    assert not failures, f"gradient checks failed for: {sorted(set(failures))}"
    assert elapsed < 30.0, f"gradient integrity suite took {elapsed:.1f}s (budget 30s)"
    _report(1, f"gradient integrity, {instances} instances/op, {elapsed:.1f}s")


# --- criterion 2: overfit limit reproduces uniform LSR ---------------------------


def test_criterion_2_overfit_limit_matches_uniform_lsr(overfit_limit_run):
    run = overfit_limit_run
    values = run.result.soft_matrix.values
    lsr_rows = np.stack([lsr_target(y, 7, EPS_STAR, base="uniform").probs for y in range(7)])
    max_dev = float(np.max(np.abs(values - lsr_rows)))
    softness = mean_correct_softness(run.result.soft_matrix)
    assert max_dev <= 0.02, f"soft labels deviate from uniform LSR by {max_dev:.4f}"
    assert abs(softness - 1.0 / S) <= 0.02
    # converged dictionary sits within the margin: sum of hinge excesses is tiny
    emb = run.model.dictionary.embeddings.data
    unit = emb / np.linalg.norm(emb, axis=1, keepdims=True)
    dist = 2.0 - 2.0 * unit @ unit.T
    assert float(np.maximum(dist - 2.0, 0.0).sum()) <= 1e-2
    assert run.elapsed < 180.0, f"overfit-limit run took {run.elapsed:.1f}s (budget 180s)"
    _report(2, f"overfit limit: max entry dev {max_dev:.2e}, softness {softness:.4f}, "
               f"{run.elapsed:.1f}s")


# --- criterion 3: correlation recovery --------------------------------------------


def test_criterion_3_sibling_correlation_recovery(sibling_runs):
    sibling_of = {a: b for a, b in SIBLING_PAIRS} | {b: a for a, b in SIBLING_PAIRS}
    passes = 0
    for run in sibling_runs.runs:
        values = run.result.soft_matrix.values
        ok = True
        for k in range(6):
            sib = sibling_of[k]
            others = [j for j in range(6) if j not in (k, sib)]
            ok = ok and values[k, sib] > max(values[k, j] for j in others)
        passes += ok
    assert passes >= 4, f"sibling recovery succeeded in only {passes}/5 seeds"
    assert sibling_runs.elapsed < 300.0, (
        f"sibling runs took {sibling_runs.elapsed:.1f}s (budget 300s)"
    )
    _report(3, f"correlation recovery in {passes}/5 seeds, {sibling_runs.elapsed:.1f}s")


# --- criterion 4: diagonal argmax everywhere ---------------------------------------


def test_criterion_4_diagonal_argmax_invariant(overfit_limit_run, sibling_runs):
    violations = 0
    total = 0
    all_matrices = list(overfit_limit_run.matrices)
    for run in sibling_runs.runs:
        all_matrices.extend(run.matrices)
    for matrix in all_matrices:
        k = matrix.num_classes
        total += 1
        if not (np.argmax(matrix.values, axis=1) == np.arange(k)).all():
            violations += 1
    assert total >= 260  # every epoch of criteria 2 and 3
    assert violations == 0, f"{violations} of {total} matrices violate diagonal argmax"
    _report(4, f"diagonal argmax over {total} matrices, zero violations")


# --- criterion 5: freeze semantics ---------------------------------------------------


def test_criterion_5_freeze_semantics(sibling_runs):
    hist = SoftnessHistory(patience=10)
    for i in range(10):
        assert not hist.update(0.6), f"constant sequence froze early at observation {i + 1}"
    assert hist.update(0.6) and hist.frozen  # exactly the 11th observation

    hist = SoftnessHistory(patience=10)
    hist.update(0.6)
    for _ in range(8):
        hist.update(0.6)
    hist.update(0.55)  # strict drop resets the counter
    assert hist.epochs_since_improvement == 0 and not hist.frozen
    for _ in range(10):
        hist.update(0.55)
    assert hist.frozen

    hist = SoftnessHistory(patience=10)
    for value in np.linspace(0.9, 0.2, 40):
        hist.update(value)
    assert not hist.frozen

    # post-freeze matrices from the real runs are bit-identical
    frozen_checked = 0
    for run in sibling_runs.runs:
        frozen_idx = [i for i, r in enumerate(run.reports) if r.frozen]
        if len(frozen_idx) >= 2:
            first = run.matrices[frozen_idx[0]]
            for i in frozen_idx[1:]:
                assert np.array_equal(run.matrices[i].values, first.values)
                assert run.matrices[i].epoch == first.epoch
            frozen_checked += 1
    assert frozen_checked >= 1, "no run froze; freeze bit-stability unexercised"
    _report(5, f"freeze timing and {frozen_checked} runs of post-freeze bit-stability")


# --- criterion 6: baseline-vs-CCL trend ----------------------------------------------


def test_criterion_6_ccl_non_inferior_on_imbalanced_data():
    start = time.perf_counter()
    counts = tuple(int(max(round(c / 25), 5)) for c in (1113, 6705, 514, 327, 1099, 115, 142))
    kappas = {"hard": [], "ccl": []}
    for mode in ("hard", "ccl"):
        for seed in range(5):
            spec = SyntheticSpec(num_classes=7, per_class=counts, dim=8, d_far=8.0,
                                 stddev=1.5, seed=seed)
            ds = generate_synthetic(spec)
            train_ds, val_ds = stratified_split(ds, ratio=0.8, seed=seed)
            model = Model(8, 7, head_cfg=HeadConfig(lr_head=0.01), seed=seed)
            cfg = TrainConfig(epochs=30, batch_size=32, lr_head=0.01, patience=10, seed=seed)
            result = train(model, train_ds, val_ds, cfg, mode=mode)
            kappas[mode].append(result.reports[-1].val_kappa)
    elapsed = time.perf_counter() - start
    mean_hard = float(np.mean(kappas["hard"]))
    mean_ccl = float(np.mean(kappas["ccl"]))
    assert mean_ccl >= mean_hard - 0.01, (
        f"ccl mean kappa {mean_ccl:.4f} < hard mean kappa {mean_hard:.4f} - 0.01"
    )
    assert elapsed < 600.0, f"imbalanced comparison took {elapsed:.1f}s (budget 600s)"
    _report(6, f"mean kappa ccl {mean_ccl:.4f} vs hard {mean_hard:.4f}, {elapsed:.1f}s")


# --- criterion 7: metric oracles -------------------------------------------------------


def test_criterion_7_metric_oracles():
    hand = np.array([[3, 1], [2, 4]])
    assert accuracy(hand) == pytest.approx(0.7, abs=1e-15)
    assert macro_f1(hand) == pytest.approx(0.696970, abs=5e-7)

    rng = np.random.default_rng(77)
    checked = 0
    while checked < 1000:
        k = int(rng.integers(2, 7))
        cm = rng.integers(0, 8, size=(k, k))
        total = cm.sum()
        if total == 0:
            continue
        p_e = float(cm.sum(axis=1) @ cm.sum(axis=0)) / total**2
        if p_e >= 1.0:
            continue
        y_true, y_pred = [], []
        for t in range(k):
            for p in range(k):
                y_true.extend([t] * cm[t, p])
                y_pred.extend([p] * cm[t, p])
        acc, kappa, f1, jac = brute_force_metrics(y_true, y_pred, k)
        assert abs(accuracy(cm) - acc) <= 1e-12
        assert abs(cohens_kappa(cm) - kappa) <= 1e-12
        assert abs(macro_f1(cm) - f1) <= 1e-12
        assert abs(macro_jaccard(cm) - jac) <= 1e-12
        checked += 1
    _report(7, f"metrics match brute force on {checked} random matrices")


# --- criterion 8: algebraic anchors ------------------------------------------------------


def test_criterion_8_algebraic_anchors():
    rng = np.random.default_rng(88)

    # classification loss with identity soft labels is exactly twice the CE
    for _ in range(50):
        k = int(rng.integers(2, 8))
        z = rng.standard_normal(k)
        q = np.exp(z - z.max())
        q /= q.sum()
        y = int(rng.integers(k))
        total = classification_loss(Tensor(q), y, one_hot(y, k).probs).item()
        ce = cross_entropy(Tensor(q), one_hot(y, k)).item()
        assert abs(total - 2.0 * ce) <= 1e-12

    # zero-epsilon smoothing is the hard target
    for _ in range(50):
        k = int(rng.integers(1, 9))
        y = int(rng.integers(k))
        assert np.array_equal(lsr_target(y, k, 0.0).probs, one_hot(y, k).probs)

    # distance range and scale invariance over 10,000 random pairs
    worst_dev = 0.0
    for _ in range(10_000):
        n = int(rng.integers(2, 6))
        e1 = rng.standard_normal(n)
        e2 = rng.standard_normal(n)
        if np.linalg.norm(e1) < 1e-3 or np.linalg.norm(e2) < 1e-3:
            continue
        base = distance(Tensor(e1), Tensor(e2)).item()
        assert -1e-12 <= base <= 4.0 + 1e-12
        s1, s2 = rng.uniform(0.01, 50.0, 2)
        scaled = distance(Tensor(s1 * e1), Tensor(s2 * e2)).item()
        worst_dev = max(worst_dev, abs(base - scaled))
    assert worst_dev <= 1e-9
    _report(8, f"algebraic anchors, scale-invariance worst dev {worst_dev:.2e}")


# --- criterion 9: determinism --------------------------------------------------------------


def test_criterion_9_seeded_runs_byte_identical(tmp_path):
    args = [
        "train", "--classes", "6", "--per-class", "20", "--dim", "8",
        "--sibling-pairs", "0-1,2-3,4-5", "--epochs", "8", "--batch-size", "16",
        "--lr-head", "0.01", "--seed", "13",
    ]
    for sub in ("first", "second"):
        code = cli_main([*args, "--out", str(tmp_path / sub)])
        assert code == 0
    artifacts = ("train_log.txt", "params.txt", "soft_labels.csv", "metrics.txt")
    for name in artifacts:
        a = (tmp_path / "first" / name).read_bytes()
        b = (tmp_path / "second" / name).read_bytes()
        assert a == b, f"{name} differs between identical seeded runs"
    _report(9, f"byte-identical artifacts: {', '.join(artifacts)}")
