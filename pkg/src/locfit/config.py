"""Experiment configuration: JSON file -> typed configs, defaults included.

A config file may override any subset of the default tree; unknown keys
are rejected so typos fail loudly. CLI flags override file values.
"""

import copy
import json
import math

from .errors import ConfigError
from .knn import KnnConfig
from .models import SimoConfig, SisoConfig
from .nn import NadamConfig
from .sdae import SdaeConfig
from .training import TrainConfig

DEFAULT_CONFIG = {
    "data": {
        "n_floors": 5,
        "floor_height": 3.7,
        "rss_min": -103.0,
        "rss_max": 0.0,
    },
    "sdae": {
        "hidden_dims": [1024, 1024, 1024],
        "corruption_level": 0.1,
        "epochs_per_layer": 20,
        "batch_size": 64,
    },
    "simo": {
        "common_hidden": 1024,
        "floor_branch_hidden": 256,
        "coord_branch_hidden": 256,
        "dropout_rate": 0.25,
        "floor_loss_weight": 1.0,
        "coord_loss_weight": 0.8,
    },
    "siso": {
        "hidden": 1024,
        "dropout_rate": 0.25,
    },
    "training": {
        "max_epochs": 100,
        "batch_size": 64,
        "val_fraction": 0.2,
        "patience": 10,
        "min_delta": 0.0,
    },
    "optimizer": {
        "lr": 0.002,
        "beta1": 0.9,
        "beta2": 0.999,
        "epsilon": 1e-8,
        "schedule_decay": 0.004,
    },
    "knn": {
        "k": 1,
        "not_heard_dbm": -103.0,
        "pow_exponent": math.e,
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Defaults, deep-merged with the JSON file at `path` when given."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path, encoding="utf-8") as fh:
            override = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(override, dict):
        raise ConfigError(f"{path}: config root must be an object")
    return _merge(DEFAULT_CONFIG, override)


def sdae_config(cfg: dict) -> SdaeConfig:
    s = cfg["sdae"]
    return SdaeConfig(hidden_dims=tuple(s["hidden_dims"]),
                      corruption_level=s["corruption_level"],
                      epochs_per_layer=s["epochs_per_layer"],
                      batch_size=s["batch_size"])


def simo_config(cfg: dict) -> SimoConfig:
    s = cfg["simo"]
    return SimoConfig(sdae=sdae_config(cfg), common_hidden=s["common_hidden"],
                      floor_branch_hidden=s["floor_branch_hidden"],
                      coord_branch_hidden=s["coord_branch_hidden"],
                      dropout_rate=s["dropout_rate"],
                      n_floors=cfg["data"]["n_floors"],
                      floor_loss_weight=s["floor_loss_weight"],
                      coord_loss_weight=s["coord_loss_weight"])


def siso_config(cfg: dict) -> SisoConfig:
    s = cfg["siso"]
    return SisoConfig(sdae=sdae_config(cfg), hidden=s["hidden"],
                      dropout_rate=s["dropout_rate"])


def nadam_config(cfg: dict) -> NadamConfig:
    o = cfg["optimizer"]
    return NadamConfig(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"],
                       epsilon=o["epsilon"], schedule_decay=o["schedule_decay"])


def train_config(cfg: dict) -> TrainConfig:
    t = cfg["training"]
    return TrainConfig(max_epochs=t["max_epochs"], batch_size=t["batch_size"],
                       val_fraction=t["val_fraction"], patience=t["patience"],
                       min_delta=t["min_delta"], nadam=nadam_config(cfg))


def knn_config(cfg: dict) -> KnnConfig:
    k = cfg["knn"]
    return KnnConfig(k=k["k"], not_heard_dbm=k["not_heard_dbm"],
                     pow_exponent=k["pow_exponent"])
