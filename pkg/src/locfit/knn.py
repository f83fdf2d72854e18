"""Deterministic k-nearest-neighbor localizer on the powed RSS representation.

Benchmark configuration: powed data, Sorensen distance, k=1, not-heard
substituted with -103 dBm before the transform.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import NOT_HEARD, FingerprintDataset, z_to_floor
from .errors import ConfigError, DomainError
from .models import Prediction


@dataclass(frozen=True)
class KnnConfig:
    k: int = 1
    representation: str = "powed"
    distance: str = "sorensen"
    not_heard_dbm: float = -103.0
    pow_exponent: float = math.e

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.representation != "powed":
            raise ConfigError(f"unsupported representation {self.representation!r}")
        if self.distance != "sorensen":
            raise ConfigError(f"unsupported distance {self.distance!r}")
        if self.not_heard_dbm >= 0:
            raise ConfigError("not_heard_dbm must be negative")


def powed_transform(values: np.ndarray, config: KnnConfig = KnnConfig()) -> np.ndarray:
    """Map RSS dBm into [0, 1] via ((r - min) / -min) ** beta, min = not-heard."""
    v = np.asarray(values, dtype=np.float64)
    v = np.where(v == NOT_HEARD, config.not_heard_dbm, v)
    lo = config.not_heard_dbm
    base = np.maximum(v - lo, 0.0) / -lo
    return np.minimum(base, 1.0) ** config.pow_exponent


def sorensen_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Sum |a-b| / sum (a+b) on nonnegative vectors; 0 when the sums vanish."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DomainError(f"length mismatch: {a.shape} vs {b.shape}")
    denom = (a + b).sum()
    if denom == 0.0:
        return 0.0
    return float(np.abs(a - b).sum() / denom)


def _sorensen_to_all(refs: np.ndarray, q: np.ndarray) -> np.ndarray:
    num = np.abs(refs - q).sum(axis=1)
    den = (refs + q).sum(axis=1)
    out = np.zeros(len(refs))
    np.divide(num, den, out=out, where=den != 0.0)
    return out


def _neighbors(refs_powed: np.ndarray, q_powed: np.ndarray, k: int) -> np.ndarray:
    d = _sorensen_to_all(refs_powed, q_powed)
    return np.argsort(d, kind="stable")[:k]  # ties go to the lowest index


def knn_predict(train: FingerprintDataset, query: np.ndarray,
                config: KnnConfig = KnnConfig()) -> Prediction:
    """Locate one scan as the mean position of its k nearest fingerprints."""
    if len(train) == 0:
        raise DomainError("training set is empty")
    refs = powed_transform(train.rss, config)
    q = powed_transform(np.asarray(query, dtype=np.float64), config)
    idx = _neighbors(refs, q, config.k)
    x, y, z = train.coords[idx].mean(axis=0)
    floor = z_to_floor(float(z), train.n_floors, train.floor_height)
    probs = np.zeros(train.n_floors)
    probs[floor] = 1.0
    return Prediction(floor, probs, float(x), float(y), float(z))


def knn_predict_batch(train: FingerprintDataset, queries: np.ndarray,
                      config: KnnConfig = KnnConfig()):
    """Vectorized evaluation loop: (floors, xyz meters) for each query row."""
    if len(train) == 0:
        raise DomainError("training set is empty")
    refs = powed_transform(train.rss, config)
    queries = powed_transform(np.asarray(queries, dtype=np.float64), config)
    floors = np.empty(len(queries), dtype=int)
    xyz = np.empty((len(queries), 3))
    for i, q in enumerate(queries):
        idx = _neighbors(refs, q, config.k)
        xyz[i] = train.coords[idx].mean(axis=0)
        floors[i] = z_to_floor(float(xyz[i, 2]), train.n_floors, train.floor_height)
    return floors, xyz
