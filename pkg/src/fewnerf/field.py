"""The radiance field network and its reverse-mode gradient engine.

A small MLP maps (encoded position, encoded direction) to four per-sample
outputs: color (sigmoid), density (softplus), a unit normal (normalized
linear head) and relative luminance (sigmoid).  Layout:

    pos_feat -> trunk (depth D, width W, ReLU, one skip re-concat)
             -> density head, normal head, bottleneck
    concat(bottleneck, dir_feat) -> hidden layer -> color head, luminance head

Parameters live in one flat float64 vector; named layer views alias into
it so the optimizer can update the flat vector in place.  ``forward`` can
record a :class:`Tape` of intermediate activations, and ``backward``
replays it to produce the exact gradient of any scalar loss composed of
the outputs, given output cotangents.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DataError

CHECKPOINT_MAGIC = "fewnerf-checkpoint"


@dataclass(frozen=True)
class FieldConfig:
    """Architecture of the field network.

    ``pos_freqs``/``dir_freqs`` are the positional-encoding frequency counts
    for position and direction inputs (feature dims 6*L each).
    ``density_bias`` is the initial bias of the density head; strongly
    negative values start the field transparent.
    """

    depth: int = 4
    width: int = 64
    pos_freqs: int = 16
    dir_freqs: int = 4
    density_bias: float = -1.0

    def __post_init__(self):
        if self.depth < 2:
            raise ConfigError("field depth must be >= 2 (skip connection needs a mid layer)")
        if self.width < 1 or self.pos_freqs < 1 or self.dir_freqs < 1:
            raise ConfigError("width and frequency counts must be positive")

    @property
    def pos_dim(self) -> int:
        return 6 * self.pos_freqs

    @property
    def dir_dim(self) -> int:
        return 6 * self.dir_freqs

    @property
    def skip_layer(self) -> int:
        return self.depth // 2

    def hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _layer_shapes(cfg: FieldConfig):
    """Ordered (name, shape) pairs defining the flat parameter layout."""
    shapes = []
    in_dim = cfg.pos_dim
    for i in range(cfg.depth):
        if i == cfg.skip_layer and i > 0:
            in_dim += cfg.pos_dim
        shapes.append((f"trunk_w{i}", (in_dim, cfg.width)))
        shapes.append((f"trunk_b{i}", (cfg.width,)))
        in_dim = cfg.width
    w = cfg.width
    shapes += [
        ("density_w", (w, 1)), ("density_b", (1,)),
        ("normal_w", (w, 3)), ("normal_b", (3,)),
        ("bottleneck_w", (w, w)), ("bottleneck_b", (w,)),
        ("color_hidden_w", (w + cfg.dir_dim, w)), ("color_hidden_b", (w,)),
        ("color_w", (w, 3)), ("color_b", (3,)),
        ("lum_w", (w, 1)), ("lum_b", (1,)),
    ]
    return shapes


def param_count(cfg: FieldConfig) -> int:
    return sum(int(np.prod(s)) for _, s in _layer_shapes(cfg))


class FieldParams:
    """Flat parameter vector with named views for each layer.

    The dtype of ``flat`` is the working precision of the network; all
    forward/backward math follows it.  Checkpoints always store float64.
    """

    def __init__(self, cfg: FieldConfig, flat: np.ndarray | None = None,
                 dtype=None):
        self.config = cfg
        n = param_count(cfg)
        if flat is None:
            flat = np.zeros(n, dtype=dtype if dtype is not None else np.float64)
        flat = np.ascontiguousarray(flat, dtype=dtype if dtype is not None else flat.dtype)
        if flat.dtype not in (np.float32, np.float64):
            flat = flat.astype(np.float64)
        if flat.shape != (n,):
            raise ValueError(f"expected flat vector of length {n}, got {flat.shape}")
        self.flat = flat
        self.views = {}
        offset = 0
        for name, shape in _layer_shapes(cfg):
            size = int(np.prod(shape))
            self.views[name] = self.flat[offset:offset + size].reshape(shape)
            offset += size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.views[name]

    def __setitem__(self, name: str, value) -> None:
        view = self.views[name]
        if value is not view:  # in-place ops hand back the same view
            view[...] = value

    def copy(self) -> "FieldParams":
        return FieldParams(self.config, self.flat.copy())


def init_params(cfg: FieldConfig, rng: np.random.Generator,
                dtype=np.float64) -> FieldParams:
    """Uniform fan-in initialization; head biases start at zero except the
    density bias, which starts at ``cfg.density_bias``."""
    params = FieldParams(cfg, dtype=dtype)
    head_biases = {"density_b", "normal_b", "color_b", "lum_b"}
    for name, shape in _layer_shapes(cfg):
        view = params[name]
        if name.endswith("_w"):
            bound = 1.0 / math.sqrt(shape[0])
            view[...] = rng.uniform(-bound, bound, size=shape)
        elif name in head_biases:
            view[...] = 0.0
        else:
            fan_in = dict(_layer_shapes(cfg))[name.replace("_b", "_w")][0]
            bound = 1.0 / math.sqrt(fan_in)
            view[...] = rng.uniform(-bound, bound, size=shape)
    params["density_b"][...] = cfg.density_bias
    return params


@dataclass
class FieldOutputs:
    """Per-sample field outputs; all arrays share the leading sample dim."""

    color: np.ndarray      # (M, 3) in [0, 1]
    density: np.ndarray    # (M,)  >= 0
    normal: np.ndarray     # (M, 3) unit
    luminance: np.ndarray  # (M,) in [0, 1]


class Tape:
    """Recorded activations of one forward pass, for the backward sweep."""

    def __init__(self, params: FieldParams):
        self.params = params
        self.pos_feat = None
        self.dir_feat = None
        self.trunk_inputs = []   # input matrix of each trunk layer
        self.trunk_masks = []    # relu masks of each trunk layer
        self.h = None            # trunk output
        self.pre_density = None
        self.normal_raw = None
        self.normal_norm = None
        self.color_input = None  # concat(bottleneck, dir_feat)
        self.color_mask = None
        self.g = None            # color-branch hidden output
        self.outputs = None


def forward(params: FieldParams, pos_feat: np.ndarray, dir_feat: np.ndarray,
            want_tape: bool = False):
    """Evaluate the field on a batch of encoded samples.

    Returns ``(outputs, tape)``; ``tape`` is None unless requested.
    Raises ConfigError on feature-dimension mismatch.
    """
    cfg = params.config
    dtype = params.flat.dtype
    pos_feat = np.asarray(pos_feat, dtype=dtype)
    dir_feat = np.asarray(dir_feat, dtype=dtype)
    if pos_feat.ndim != 2 or pos_feat.shape[1] != cfg.pos_dim:
        raise ConfigError(f"pos features must be (M, {cfg.pos_dim}), got {pos_feat.shape}")
    if dir_feat.ndim != 2 or dir_feat.shape[1] != cfg.dir_dim:
        raise ConfigError(f"dir features must be (M, {cfg.dir_dim}), got {dir_feat.shape}")
    if dir_feat.shape[0] != pos_feat.shape[0]:
        raise ConfigError("pos/dir feature batches differ in length")

    tape = Tape(params) if want_tape else None
    if tape:
        tape.pos_feat = pos_feat
        tape.dir_feat = dir_feat

    # in-place bias/activation throughout: repeated large temporaries are
    # disproportionately expensive (allocator churn), and this path runs
    # several times per training step
    h = pos_feat
    for i in range(cfg.depth):
        if i == cfg.skip_layer and i > 0:
            h = np.concatenate([h, pos_feat], axis=1)
        pre = h @ params[f"trunk_w{i}"]
        pre += params[f"trunk_b{i}"]
        if tape:
            tape.trunk_inputs.append(h)
            tape.trunk_masks.append(pre > 0.0)
        np.maximum(pre, 0.0, out=pre)
        h = pre
    if tape:
        tape.h = h

    pre_density = h @ params["density_w"]
    pre_density += params["density_b"]
    pre_density = pre_density[:, 0]
    density = np.logaddexp(0.0, pre_density)

    v = h @ params["normal_w"]
    v += params["normal_b"]
    v_norm = np.maximum(np.linalg.norm(v, axis=1), 1e-12)
    normal = v / v_norm[:, None]

    bottleneck = h @ params["bottleneck_w"]
    bottleneck += params["bottleneck_b"]
    color_input = np.concatenate([bottleneck, dir_feat], axis=1)
    g = color_input @ params["color_hidden_w"]
    g += params["color_hidden_b"]
    if tape:
        tape.color_mask = g > 0.0
    np.maximum(g, 0.0, out=g)

    color = g @ params["color_w"]
    color += params["color_b"]
    expit(color, out=color)
    pre_lum = g @ params["lum_w"]
    pre_lum += params["lum_b"]
    luminance = expit(pre_lum[:, 0])

    outputs = FieldOutputs(color, density, normal, luminance)
    if tape:
        tape.pre_density = pre_density
        tape.normal_raw = v
        tape.normal_norm = v_norm
        tape.color_input = color_input
        tape.g = g
        tape.outputs = outputs
    return outputs, tape


def backward(tape: Tape, d_color, d_density, d_normal, d_luminance) -> np.ndarray:
    """Reverse-mode sweep: cotangents on the four outputs -> flat parameter gradient.

    Gradients with respect to the input features are not formed; augmented
    inputs are treated as data.  The result has exactly ``param_count``
    entries and is linear in the cotangents.
    """
    params = tape.params
    cfg = params.config
    dtype = params.flat.dtype
    out = tape.outputs
    m = out.color.shape[0]

    def check(name, arr, shape):
        arr = np.zeros(shape, dtype=dtype) if arr is None else np.asarray(arr, dtype=dtype)
        if arr.shape != shape:
            raise ValueError(f"{name} cotangent must have shape {shape}, got {arr.shape}")
        return arr

    d_color = check("color", d_color, (m, 3))
    d_density = check("density", d_density, (m,))
    d_normal = check("normal", d_normal, (m, 3))
    d_luminance = check("luminance", d_luminance, (m,))

    # each grad view is written exactly once, so matmul/sum go straight into
    # the flat vector (no += temporaries)
    grad = FieldParams(cfg, dtype=dtype)

    # sigmoid heads: d_pre = d_out * s * (1 - s)
    d_pre_c = d_color * out.color
    d_pre_c *= 1.0 - out.color
    np.matmul(tape.g.T, d_pre_c, out=grad["color_w"])
    np.sum(d_pre_c, axis=0, out=grad["color_b"])
    d_g = d_pre_c @ params["color_w"].T

    d_pre_y = (d_luminance * out.luminance * (1.0 - out.luminance))[:, None]
    np.matmul(tape.g.T, d_pre_y, out=grad["lum_w"])
    np.sum(d_pre_y, axis=0, out=grad["lum_b"])
    d_g += d_pre_y @ params["lum_w"].T

    # color-branch hidden layer (relu mask applied in place)
    d_g *= tape.color_mask
    np.matmul(tape.color_input.T, d_g, out=grad["color_hidden_w"])
    np.sum(d_g, axis=0, out=grad["color_hidden_b"])
    d_color_input = d_g @ params["color_hidden_w"].T
    d_bottleneck = d_color_input[:, : cfg.width]

    d_h = d_bottleneck @ params["bottleneck_w"].T
    np.matmul(tape.h.T, d_bottleneck, out=grad["bottleneck_w"])
    np.sum(d_bottleneck, axis=0, out=grad["bottleneck_b"])

    # softplus density: d_pre = d_tau * sigmoid(pre)
    d_pre_d = (d_density * expit(tape.pre_density))[:, None]
    np.matmul(tape.h.T, d_pre_d, out=grad["density_w"])
    np.sum(d_pre_d, axis=0, out=grad["density_b"])
    d_h += d_pre_d @ params["density_w"].T

    # normalized normal head: d_v = (d_n - n (n . d_n)) / |v|
    n_hat = out.normal
    d_v = d_normal - n_hat * np.sum(n_hat * d_normal, axis=1, keepdims=True)
    d_v /= tape.normal_norm[:, None]
    np.matmul(tape.h.T, d_v, out=grad["normal_w"])
    np.sum(d_v, axis=0, out=grad["normal_b"])
    d_h += d_v @ params["normal_w"].T

    # trunk, reversed; drop the gradient on re-concatenated pos features
    for i in reversed(range(cfg.depth)):
        d_h *= tape.trunk_masks[i]
        np.matmul(tape.trunk_inputs[i].T, d_h, out=grad[f"trunk_w{i}"])
        np.sum(d_h, axis=0, out=grad[f"trunk_b{i}"])
        if i > 0:
            d_h = d_h @ params[f"trunk_w{i}"].T
            if i == cfg.skip_layer:
                d_h = d_h[:, : cfg.width]
    return grad.flat


def save_checkpoint(path, params: FieldParams, iteration: int) -> None:
    """Write a checkpoint: one JSON header line + little-endian float64 params."""
    header = {
        "format": CHECKPOINT_MAGIC,
        "config_hash": params.config.hash(),
        "param_count": params.flat.size,
        "iteration": int(iteration),
        "field": asdict(params.config),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(params.flat.astype("<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (FieldParams, header dict)."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            header_line = fh.readline()
            header = json.loads(header_line)
            if header.get("format") != CHECKPOINT_MAGIC:
                raise DataError(f"{path}: not a field checkpoint")
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed checkpoint header: {exc}") from exc
    cfg = FieldConfig(**header["field"])
    n = header["param_count"]
    flat = np.frombuffer(blob, dtype="<f8")
    if flat.size != n or n != param_count(cfg):
        raise DataError(
            f"{path}: parameter count mismatch (header {n}, data {flat.size})"
        )
    return FieldParams(cfg, flat.copy()), header
