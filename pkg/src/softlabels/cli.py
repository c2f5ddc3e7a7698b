"""Command-line interface: train, eval, gen-data, export-softlabels.

Every flag mirrors a config key one-to-one: a flat `key=value` config file
(via --config) may set any key, and explicit flags override it. Errors exit
nonzero after printing a single `error category=<category>: <message>` line.
"""

import argparse
import sys
from pathlib import Path

from .autodiff import DegenerateVectorError, DimensionError
from .correlation import HeadConfig, mean_correct_softness, nearest_uniform_epsilon, soft_labels
from .datasets import (
    DatasetFormatError,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
    stratified_split,
)
from .metrics import UndefinedKappaError, metric_report
from .serialize import ModelFormatError, load_model, save_model
from .training import MODES, Model, TrainConfig, evaluate, train


class CliError(Exception):
    def __init__(self, category, message):
        super().__init__(message)
        self.category = category


def _parse_counts(text):
    parts = str(text).split(",")
    values = []
    for part in parts:
        values.append(int(part))
    return values[0] if len(values) == 1 else tuple(values)


def _parse_pairs(text):
    text = str(text).strip()
    if not text:
        return ()
    pairs = []
    for chunk in text.split(","):
        left, sep, right = chunk.partition("-")
        if not sep:
            raise ValueError(f"sibling pair {chunk!r} must look like 'a-b'")
        pairs.append((int(left), int(right)))
    return tuple(pairs)


def _parse_int_tuple(text):
    text = str(text).strip()
    return tuple(int(v) for v in text.split(",")) if text else ()


def _parse_drops(text):
    text = str(text).strip().lower()
    if text in ("", "none"):
        return ()  # explicitly no drops (omit the flag for the default schedule)
    return tuple(int(v) for v in text.split(","))


def _parse_mode(text):
    if text not in MODES:
        raise ValueError(f"unknown mode {text!r}; expected one of {MODES}")
    return text


# key -> (default, converter applied to config-file strings)
_KEYS = {
    "seed": (0, int),
    "out": (".", str),
    "data": (None, str),
    "classes": (None, int),
    "per_class": (30, _parse_counts),
    "dim": (8, int),
    "sibling_pairs": ((), _parse_pairs),
    "d_near": (1.0, float),
    "d_far": (8.0, float),
    "stddev": (0.5, float),
    "val_ratio": (0.2, float),
    "mode": ("ccl", _parse_mode),
    "epsilon": (0.1, float),
    "epochs": (40, int),
    "batch_size": (32, int),
    "lr_backbone": (0.1, float),
    "lr_head": (0.0005, float),
    "lr_drops": (None, _parse_drops),
    "clip_norm": (5.0, float),
    "patience": (10, int),
    "kl_weight": (1.0, float),
    "margin": (2.0, float),
    "corr_weight": (10.0, float),
    "embed_dim": (16, int),
    "hidden": ((64, 64), _parse_int_tuple),
    "feature_widths": ((32, 8), _parse_int_tuple),
    "params": (None, str),
}


def _read_config(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError("config", f"{path}: line {lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip().replace("-", "_")
            if key not in _KEYS:
                raise CliError("config", f"{path}: line {lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def _resolve(args, keys):
    """Merge defaults, config file values, and explicit flags (in that order)."""
    config = _read_config(args.config) if args.config else {}
    resolved = {}
    for key in keys:
        default, convert = _KEYS[key]
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in config:
            try:
                resolved[key] = convert(config[key])
            except ValueError as exc:
                raise CliError("config", f"config key {key!r}: {exc}") from None
        else:
            resolved[key] = default
    if "seed" in resolved and resolved["seed"] < 0:
        raise CliError("config", f"seed must be nonnegative, got {resolved['seed']}")
    return resolved


_DATA_SOURCE_KEYS = (
    "data", "classes", "per_class", "dim", "sibling_pairs", "d_near", "d_far", "stddev",
)


def _load_or_generate(opts):
    if (opts["data"] is None) == (opts["classes"] is None):
        raise CliError(
            "config", "exactly one data source is required: --data FILE or --classes K [...]"
        )
    if opts["data"] is not None:
        return load_dataset(opts["data"])
    spec = SyntheticSpec(
        num_classes=opts["classes"],
        per_class=opts["per_class"],
        dim=opts["dim"],
        sibling_pairs=opts["sibling_pairs"],
        d_near=opts["d_near"],
        d_far=opts["d_far"],
        stddev=opts["stddev"],
        seed=opts["seed"],
    )
    return generate_synthetic(spec)


def _write(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _confusion_lines(cm):
    return [
        f"confusion_{k}=" + ",".join(str(int(v)) for v in row) for k, row in enumerate(cm)
    ]


def cmd_gen_data(args):
    opts = _resolve(args, ("seed", "out") + _DATA_SOURCE_KEYS)
    if opts["classes"] is None:
        raise CliError("config", "gen-data requires --classes")
    if opts["out"] == ".":
        raise CliError("config", "gen-data requires --out FILE for the dataset")
    opts["data"] = None
    ds = _load_or_generate(opts)
    save_dataset(ds, opts["out"])
    print(f"wrote {opts['out']}: samples={len(ds)} classes={ds.num_classes} dim={ds.dim}")
    return 0


def cmd_train(args):
    keys = (
        ("seed", "out", "val_ratio", "mode", "epsilon", "epochs", "batch_size",
         "lr_backbone", "lr_head", "lr_drops", "clip_norm", "patience", "kl_weight",
         "margin", "corr_weight", "embed_dim", "hidden", "feature_widths")
        + _DATA_SOURCE_KEYS
    )
    opts = _resolve(args, keys)
    ds = _load_or_generate(opts)
    if not 0.0 < opts["val_ratio"] < 1.0:
        raise CliError("config", f"val_ratio must be in (0, 1), got {opts['val_ratio']}")
    train_ds, val_ds = stratified_split(ds, ratio=1.0 - opts["val_ratio"], seed=opts["seed"])

    head_cfg = HeadConfig(
        embed_dim=opts["embed_dim"],
        hidden=opts["hidden"],
        margin=opts["margin"],
        corr_weight=opts["corr_weight"],
        lr_head=opts["lr_head"],
    )
    train_cfg = TrainConfig(
        epochs=opts["epochs"],
        batch_size=opts["batch_size"],
        lr_backbone=opts["lr_backbone"],
        lr_head=opts["lr_head"],
        lr_drop_epochs=opts["lr_drops"],
        grad_clip_norm=opts["clip_norm"],
        patience=opts["patience"],
        kl_weight=opts["kl_weight"],
        seed=opts["seed"],
    )
    model = Model(
        ds.dim, ds.num_classes, feature_widths=opts["feature_widths"],
        head_cfg=head_cfg, seed=opts["seed"],
    )
    result = train(model, train_ds, val_ds, train_cfg, mode=opts["mode"], epsilon=opts["epsilon"])

    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "train_log.txt", "\n".join(result.log_lines) + "\n")
    save_model(model, out / "params.txt", dict_epoch=result.soft_matrix.epoch)
    if opts["mode"] == "ccl":
        result.soft_matrix.save(out / "soft_labels.csv")
    cm = evaluate(model, val_ds)
    _write(out / "metrics.txt", metric_report(cm) + "\n".join(_confusion_lines(cm)) + "\n")

    last = result.reports[-1]
    print(
        f"trained mode={opts['mode']} epochs={last.epoch + 1} "
        f"val_accuracy={last.val_accuracy!r} val_kappa={last.val_kappa!r} "
        f"softness={last.softness!r} frozen={int(last.frozen)}"
    )
    print(f"artifacts in {out}")
    return 0


def cmd_eval(args):
    opts = _resolve(args, ("seed", "out", "params", "data"))
    if opts["params"] is None or opts["data"] is None:
        raise CliError("config", "eval requires --params FILE and --data FILE")
    model, _ = load_model(opts["params"])
    ds = load_dataset(opts["data"])
    if ds.dim != model.input_dim:
        raise CliError(
            "model", f"model expects input dim {model.input_dim}, dataset has dim {ds.dim}"
        )
    if ds.num_classes != model.num_classes:
        raise CliError(
            "model",
            f"model has {model.num_classes} classes, dataset declares {ds.num_classes}",
        )
    cm = evaluate(model, ds)
    text = metric_report(cm) + "\n".join(_confusion_lines(cm)) + "\n"
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "metrics.txt", text)
    print(text, end="")
    return 0


def cmd_export_softlabels(args):
    opts = _resolve(args, ("seed", "out", "params"))
    if opts["params"] is None:
        raise CliError("config", "export-softlabels requires --params FILE")
    model, meta = load_model(opts["params"])
    matrix = soft_labels(
        model.dictionary, margin=model.head_cfg.margin, epoch=meta["dict_epoch"]
    )
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    matrix.save(out / "soft_labels.csv")
    summary = (
        f"classes={matrix.num_classes}\n"
        f"softness={mean_correct_softness(matrix)!r}\n"
        f"nearest_epsilon={nearest_uniform_epsilon(matrix)!r}\n"
    )
    _write(out / "softlabel_summary.txt", summary)
    print(summary, end="")
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="flat key=value config file; flags override it")
    sub.add_argument("--seed", type=int, help="master seed for all randomness (default 0)")
    sub.add_argument("--out", help="output directory (gen-data: output dataset file)")


def _add_synthetic(sub):
    sub.add_argument("--classes", type=int, help="number of synthetic classes")
    sub.add_argument("--per-class", dest="per_class", type=_parse_counts,
                     help="samples per class: one count or comma-separated per-class counts")
    sub.add_argument("--dim", type=int, help="synthetic feature dimension")
    sub.add_argument("--sibling-pairs", dest="sibling_pairs", type=_parse_pairs,
                     help="comma-separated similar-class pairs, e.g. '0-1,2-3'")
    sub.add_argument("--d-near", dest="d_near", type=float, help="sibling center distance")
    sub.add_argument("--d-far", dest="d_far", type=float, help="minimum non-sibling center distance")
    sub.add_argument("--stddev", type=float, help="within-class standard deviation")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="softlabels",
        description="Learn interclass correlations as soft labels and train a regularized classifier.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", help="generate a synthetic dataset file")
    _add_common(gen)
    _add_synthetic(gen)
    gen.set_defaults(handler=cmd_gen_data)

    tr = commands.add_parser("train", help="train a model and write its artifacts")
    _add_common(tr)
    _add_synthetic(tr)
    tr.add_argument("--data", help="dataset file (alternative to the synthetic flags)")
    tr.add_argument("--val-ratio", dest="val_ratio", type=float,
                    help="validation fraction of the stratified split (default 0.2)")
    tr.add_argument("--mode", choices=MODES, help="label target mode (default ccl)")
    tr.add_argument("--epsilon", type=float, help="smoothing weight for the lsr modes")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", dest="batch_size", type=int)
    tr.add_argument("--lr-backbone", dest="lr_backbone", type=float)
    tr.add_argument("--lr-head", dest="lr_head", type=float)
    tr.add_argument("--lr-drops", dest="lr_drops", type=_parse_drops,
                    help="comma-separated epochs where both rates drop 10x "
                         "(default: 50%% and 75%% of the budget; 'none' disables)")
    tr.add_argument("--clip-norm", dest="clip_norm", type=float)
    tr.add_argument("--patience", type=int,
                    help="softness plateau epochs before the dictionary freezes; 0 disables")
    tr.add_argument("--kl-weight", dest="kl_weight", type=float)
    tr.add_argument("--margin", type=float)
    tr.add_argument("--corr-weight", dest="corr_weight", type=float)
    tr.add_argument("--embed-dim", dest="embed_dim", type=int)
    tr.add_argument("--hidden", type=_parse_int_tuple, help="embedding net hidden widths")
    tr.add_argument("--feature-widths", dest="feature_widths", type=_parse_int_tuple,
                    help="backbone widths; the last is the feature dim")
    tr.set_defaults(handler=cmd_train)

    ev = commands.add_parser("eval", help="evaluate saved parameters on a dataset")
    _add_common(ev)
    ev.add_argument("--params", help="parameter file written by train")
    ev.add_argument("--data", help="dataset file")
    ev.set_defaults(handler=cmd_eval)

    ex = commands.add_parser("export-softlabels", help="export the learned soft label matrix")
    _add_common(ex)
    ex.add_argument("--params", help="parameter file written by train")
    ex.set_defaults(handler=cmd_export_softlabels)

    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error category={exc.category}: {exc}", file=sys.stderr)
    except DatasetFormatError as exc:
        print(f"error category=data: {exc}", file=sys.stderr)
    except ModelFormatError as exc:
        print(f"error category=model: {exc}", file=sys.stderr)
    except (DimensionError, DegenerateVectorError) as exc:
        print(f"error category=model: {exc}", file=sys.stderr)
    except UndefinedKappaError as exc:
        print(f"error category=data: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error category=io: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"error category=config: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
