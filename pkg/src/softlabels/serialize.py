"""Text serialization of trained models.

The format is binary-free and diffable: `meta key=value` lines describing the
architecture, then per tensor a `tensor name=<name> shape=<d0,d1,...>` header
followed by its flat row-major values, one repr() float per line (repr round-
trips exactly, so save/load is bit-faithful).
"""

import numpy as np

from .correlation import HeadConfig
from .training import Model

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A parameter file violates the expected format."""


def _meta_lines(model, dict_epoch):
    cfg = model.head_cfg
    return [
        f"meta format={FORMAT_VERSION}",
        f"meta input_dim={model.input_dim}",
        f"meta num_classes={model.num_classes}",
        "meta feature_widths=" + ",".join(str(w) for w in model.feature_widths),
        "meta head_hidden=" + ",".join(str(w) for w in cfg.hidden),
        f"meta embed_dim={cfg.embed_dim}",
        f"meta margin={cfg.margin!r}",
        f"meta corr_weight={cfg.corr_weight!r}",
        f"meta lr_head={cfg.lr_head!r}",
        f"meta dict_epoch={int(dict_epoch)}",
        f"meta frozen={int(model.dictionary.frozen)}",
    ]


def save_model(model, path, *, dict_epoch=0):
    lines = _meta_lines(model, dict_epoch)
    for name, p in model.named_parameters():
        shape = ",".join(str(d) for d in p.shape)
        lines.append(f"tensor name={name} shape={shape}")
        lines.extend(repr(float(v)) for v in p.data.ravel())
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_int_tuple(text):
    return tuple(int(v) for v in text.split(",")) if text else ()


def load_model(path):
    """Rebuild a Model from a parameter file; returns (model, meta dict)."""
    meta = {}
    tensors = {}
    current_name = None
    current_shape = None
    current_values = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("meta "):
                if "=" not in line[5:]:
                    raise ModelFormatError(f"{path}: line {lineno}: malformed meta line")
                key, value = line[5:].split("=", 1)
                meta[key.strip()] = value.strip()
            elif line.startswith("tensor "):
                fields = dict(part.split("=", 1) for part in line[7:].split() if "=" in part)
                if "name" not in fields or "shape" not in fields:
                    raise ModelFormatError(f"{path}: line {lineno}: malformed tensor header")
                current_name = fields["name"]
                current_shape = _parse_int_tuple(fields["shape"])
                current_values = []
                tensors[current_name] = (current_shape, current_values)
            else:
                if current_values is None:
                    raise ModelFormatError(f"{path}: line {lineno}: value before any tensor header")
                try:
                    current_values.append(float(line))
                except ValueError:
                    raise ModelFormatError(f"{path}: line {lineno}: malformed float {line!r}") from None

    required = ("input_dim", "num_classes", "feature_widths", "head_hidden", "embed_dim", "margin")
    for key in required:
        if key not in meta:
            raise ModelFormatError(f"{path}: missing meta key {key!r}")
    try:
        head_cfg = HeadConfig(
            embed_dim=int(meta["embed_dim"]),
            hidden=_parse_int_tuple(meta["head_hidden"]),
            margin=float(meta["margin"]),
            corr_weight=float(meta.get("corr_weight", 10.0)),
            lr_head=float(meta.get("lr_head", 5e-4)),
        )
        model = Model(
            input_dim=int(meta["input_dim"]),
            num_classes=int(meta["num_classes"]),
            feature_widths=_parse_int_tuple(meta["feature_widths"]),
            head_cfg=head_cfg,
            seed=0,
        )
    except ValueError as exc:
        raise ModelFormatError(f"{path}: bad meta values: {exc}") from None

    expected = dict(model.named_parameters())
    for name, p in expected.items():
        if name not in tensors:
            raise ModelFormatError(f"{path}: missing tensor {name!r}")
        shape, values = tensors[name]
        if shape != p.shape:
            raise ModelFormatError(
                f"{path}: tensor {name!r} has shape {shape}, expected {p.shape}"
            )
        if len(values) != p.size:
            raise ModelFormatError(
                f"{path}: tensor {name!r} has {len(values)} values, expected {p.size}"
            )
        p.data = np.asarray(values, dtype=np.float64).reshape(shape)
    extra = set(tensors) - set(expected)
    if extra:
        raise ModelFormatError(f"{path}: unexpected tensors {sorted(extra)}")

    if int(meta.get("frozen", 0)):
        model.dictionary.freeze()
    meta["dict_epoch"] = int(meta.get("dict_epoch", 0))
    return model, meta
