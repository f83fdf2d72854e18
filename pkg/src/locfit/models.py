"""Localization model builders, joint losses, prediction decoding, persistence.

Two architectures share the pretrained sigmoid encoder stack:
  * hybrid: common relu layer, then a softmax floor-classification branch
    and a linear 2D coordinate-regression branch (one dedicated hidden
    layer each);
  * reference: one relu hidden layer into a linear 3D coordinate head.
Persisted form is a directory with manifest.json plus weights.bin holding,
layer by layer, the row-major weight matrix then the bias, as little-endian
32-bit floats.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (DEFAULT_FLOOR_HEIGHT, DEFAULT_N_FLOORS, NormalizationSpec,
                   z_to_floor)
from .errors import ChecksumError, ConfigError, DomainError, SchemaError
from .nn import (LayerSpec, ModelParams, NetworkSpec, cce_loss, forward,
                 init_layer, mse_loss)
from .sdae import PretrainedLayer, SdaeConfig


@dataclass(frozen=True)
class SimoConfig:
    """Hybrid classification/regression model shape and loss weights."""

    sdae: SdaeConfig = SdaeConfig()
    common_hidden: int = 1024
    floor_branch_hidden: int = 256
    coord_branch_hidden: int = 256
    dropout_rate: float = 0.25
    n_floors: int = DEFAULT_N_FLOORS
    coord_out: int = 2
    floor_loss_weight: float = 1.0
    coord_loss_weight: float = 0.8

    def __post_init__(self):
        if self.floor_loss_weight < 0 or self.coord_loss_weight < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.floor_loss_weight == 0 and self.coord_loss_weight == 0:
            raise ConfigError("at least one loss weight must be > 0")


@dataclass(frozen=True)
class SisoConfig:
    """Pure 3D coordinate-regression model shape."""

    sdae: SdaeConfig = SdaeConfig()
    hidden: int = 1024
    dropout_rate: float = 0.25
    coord_out: int = 3


@dataclass(frozen=True)
class Prediction:
    """Decoded localization output for one scan."""

    floor: int
    floor_probs: np.ndarray
    x: float
    y: float
    z: float


@dataclass
class LocModel:
    """A network spec + parameters plus what prediction decoding needs."""

    kind: str  # "simo" or "siso"
    net: NetworkSpec
    params: ModelParams
    n_floors: int = DEFAULT_N_FLOORS
    floor_height: float = DEFAULT_FLOOR_HEIGHT
    loss_weights: tuple[float, ...] = (1.0,)
    norm: NormalizationSpec | None = None
    config_echo: dict = field(default_factory=dict)


def _encoder_layers(encoders: list[PretrainedLayer], n_ap: int | None):
    """Validate the pretrained chain and return (specs, params, out_dim)."""
    specs, params = [], []
    prev = n_ap
    for enc in encoders:
        out_dim, in_dim = enc.weight.shape
        if prev is not None and in_dim != prev:
            raise ConfigError(f"encoder input width {in_dim} does not chain from {prev}")
        if enc.bias.shape != (out_dim,):
            raise ConfigError("encoder bias shape mismatch")
        specs.append(LayerSpec(in_dim, out_dim, "sigmoid"))
        params.append((enc.weight.astype(np.float64).copy(),
                       enc.bias.astype(np.float64).copy()))
        prev = out_dim
    if prev is None:
        raise ConfigError("n_ap is required when there are no pretrained encoders")
    return specs, params, prev


def build_simo(config: SimoConfig, pretrained_encoders: list[PretrainedLayer],
               seed, n_ap: int | None = None,
               floor_height: float = DEFAULT_FLOOR_HEIGHT) -> LocModel:
    """Assemble the hybrid model; encoder weights come from pretraining,
    the common layer and both branches are freshly initialized."""
    rng = np.random.default_rng(seed)
    enc_specs, enc_params, width = _encoder_layers(pretrained_encoders, n_ap)

    common = LayerSpec(width, config.common_hidden, "relu", config.dropout_rate)
    floor_head = (LayerSpec(config.common_hidden, config.floor_branch_hidden,
                            "relu", config.dropout_rate),
                  LayerSpec(config.floor_branch_hidden, config.n_floors, "softmax"))
    coord_head = (LayerSpec(config.common_hidden, config.coord_branch_hidden,
                            "relu", config.dropout_rate),
                  LayerSpec(config.coord_branch_hidden, config.coord_out, "linear"))
    net = NetworkSpec(trunk=tuple(enc_specs) + (common,),
                      heads=(floor_head, coord_head))

    new_layers = [common, *floor_head, *coord_head]
    params = ModelParams(enc_params + [init_layer(ls, rng) for ls in new_layers])
    return LocModel(kind="simo", net=net, params=params,
                    n_floors=config.n_floors, floor_height=floor_height,
                    loss_weights=(config.floor_loss_weight, config.coord_loss_weight),
                    config_echo=_config_echo(config))


def build_siso(config: SisoConfig, pretrained_encoders: list[PretrainedLayer],
               seed, n_ap: int | None = None,
               n_floors: int = DEFAULT_N_FLOORS,
               floor_height: float = DEFAULT_FLOOR_HEIGHT) -> LocModel:
    """Assemble the 3D-regression reference model."""
    rng = np.random.default_rng(seed)
    enc_specs, enc_params, width = _encoder_layers(pretrained_encoders, n_ap)

    hidden = LayerSpec(width, config.hidden, "relu", config.dropout_rate)
    out = LayerSpec(config.hidden, config.coord_out, "linear")
    net = NetworkSpec(trunk=tuple(enc_specs) + (hidden,), heads=((out,),))

    params = ModelParams(enc_params + [init_layer(hidden, rng), init_layer(out, rng)])
    return LocModel(kind="siso", net=net, params=params,
                    n_floors=n_floors, floor_height=floor_height,
                    config_echo=_config_echo(config))


def _config_echo(config) -> dict:
    echo = {k: v for k, v in vars(config).items() if k != "sdae"}
    echo["sdae"] = vars(config.sdae).copy()
    echo["sdae"]["hidden_dims"] = list(config.sdae.hidden_dims)
    return echo


def simo_loss(floor_probs: np.ndarray, floor_targets: np.ndarray,
              coord_pred: np.ndarray, coord_targets: np.ndarray,
              weights: tuple[float, float]) -> tuple[float, float, float]:
    """Weighted joint loss: (total, crossentropy part, coordinate MSE part)."""
    floor_w, coord_w = weights
    floor_part = cce_loss(floor_probs, floor_targets)
    coord_part = mse_loss(coord_pred, coord_targets)
    return floor_w * floor_part + coord_w * coord_part, floor_part, coord_part


def _require_norm(model: LocModel, norm_spec) -> NormalizationSpec:
    norm = norm_spec if norm_spec is not None else model.norm
    if norm is None:
        raise DomainError("model has no normalization spec; pass norm_spec")
    return norm


def predict_simo_batch(model: LocModel, rss_normalized: np.ndarray,
                       norm_spec: NormalizationSpec | None = None):
    """Vectorized hybrid decoding: (floors, floor_probs, xy meters, z meters)."""
    norm = _require_norm(model, norm_spec)
    outs, _ = forward(model.params, model.net, rss_normalized, mode="infer")
    probs, coords = outs
    floors = probs.argmax(axis=1)  # argmax ties resolve to the lowest index
    xy = norm.denormalize_xy(coords)
    z = floors * model.floor_height
    return floors, probs, xy, z


def predict_siso_batch(model: LocModel, rss_normalized: np.ndarray,
                       norm_spec: NormalizationSpec | None = None):
    """Vectorized 3D-regression decoding: (floors, xyz meters)."""
    norm = _require_norm(model, norm_spec)
    outs, _ = forward(model.params, model.net, rss_normalized, mode="infer")
    xyz = norm.denormalize_xyz(outs[0])
    floors = np.array([z_to_floor(z, model.n_floors, model.floor_height)
                       for z in xyz[:, 2]], dtype=int)
    return floors, xyz


def predict_simo(model: LocModel, rss_normalized: np.ndarray,
                 norm_spec: NormalizationSpec | None = None) -> Prediction:
    """Decode one scan: argmax floor (z = floor x floor height), 2D position."""
    floors, probs, xy, z = predict_simo_batch(model, np.atleast_2d(rss_normalized),
                                              norm_spec)
    return Prediction(int(floors[0]), probs[0], float(xy[0, 0]), float(xy[0, 1]),
                      float(z[0]))


def predict_siso(model: LocModel, rss_normalized: np.ndarray,
                 norm_spec: NormalizationSpec | None = None) -> Prediction:
    """Decode one scan: 3D position, floor = nearest floor multiple of z."""
    floors, xyz = predict_siso_batch(model, np.atleast_2d(rss_normalized), norm_spec)
    floor = int(floors[0])
    probs = np.zeros(model.n_floors)
    probs[floor] = 1.0
    return Prediction(floor, probs, float(xyz[0, 0]), float(xyz[0, 1]),
                      float(xyz[0, 2]))


MODEL_FORMAT = "locfit-model"
MODEL_VERSION = 1


def _weights_blob(params: ModelParams) -> bytes:
    parts = []
    for w, b in params.layers:
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return b"".join(parts)


def save_model(model: LocModel, path) -> None:
    """Persist to a directory: manifest.json + weights.bin (float32 LE)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    blob = _weights_blob(model.params)

    norm = None
    if model.norm is not None:
        norm = {"rss_min": model.norm.rss_min, "rss_max": model.norm.rss_max,
                "coord_center": [float(c) for c in model.norm.coord_center],
                "coord_scale": model.norm.coord_scale}
    manifest = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "n_floors": model.n_floors,
        "floor_height": model.floor_height,
        "loss_weights": list(model.loss_weights),
        "trunk_len": len(model.net.trunk),
        "head_lens": [len(h) for h in model.net.heads],
        "layers": [{"in_dim": ls.in_dim, "out_dim": ls.out_dim,
                    "activation": ls.activation, "dropout_rate": ls.dropout_rate}
                   for ls in model.net.all_layers],
        "normalization": norm,
        "config": model.config_echo,
        "weights_sha256": hashlib.sha256(blob).hexdigest(),
    }
    (path / "weights.bin").write_bytes(blob)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True)
                                        + "\n", encoding="utf-8")


def load_model(path) -> LocModel:
    """Load a persisted model; verifies the blob digest and layer layout."""
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: bad manifest ({exc})") from None
    if manifest.get("format") != MODEL_FORMAT:
        raise SchemaError(f"{path}: not a {MODEL_FORMAT} directory")

    layer_dicts = manifest["layers"]
    trunk_len = manifest["trunk_len"]
    head_lens = manifest["head_lens"]
    if trunk_len + sum(head_lens) != len(layer_dicts):
        raise SchemaError(f"{path}: manifest layer count mismatch")
    specs = [LayerSpec(d["in_dim"], d["out_dim"], d["activation"], d["dropout_rate"])
             for d in layer_dicts]
    trunk = tuple(specs[:trunk_len])
    heads, offset = [], trunk_len
    for hl in head_lens:
        heads.append(tuple(specs[offset:offset + hl]))
        offset += hl
    net = NetworkSpec(trunk=trunk, heads=tuple(heads))

    blob = (path / "weights.bin").read_bytes()
    if hashlib.sha256(blob).hexdigest() != manifest["weights_sha256"]:
        raise ChecksumError(f"{path}: weights.bin does not match manifest digest")
    expected = sum(ls.in_dim * ls.out_dim + ls.out_dim for ls in specs) * 4
    if len(blob) != expected:
        raise SchemaError(f"{path}: weights.bin is {len(blob)} bytes, expected {expected}")

    layers, pos = [], 0
    flat = np.frombuffer(blob, dtype="<f4")
    for ls in specs:
        w = flat[pos:pos + ls.in_dim * ls.out_dim].reshape(ls.out_dim, ls.in_dim)
        pos += ls.in_dim * ls.out_dim
        b = flat[pos:pos + ls.out_dim]
        pos += ls.out_dim
        layers.append((w.astype(np.float64), b.astype(np.float64)))

    norm = None
    if manifest.get("normalization"):
        nd = manifest["normalization"]
        norm = NormalizationSpec(rss_min=nd["rss_min"], rss_max=nd["rss_max"],
                                 coord_center=np.array(nd["coord_center"]),
                                 coord_scale=nd["coord_scale"])
    return LocModel(kind=manifest["kind"], net=net, params=ModelParams(layers),
                    n_floors=manifest["n_floors"],
                    floor_height=manifest["floor_height"],
                    loss_weights=tuple(manifest.get("loss_weights", (1.0,))),
                    norm=norm, config_echo=manifest.get("config", {}))
