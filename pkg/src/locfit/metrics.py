"""Positioning-error and floor-detection metrics with cross-seed aggregation."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError


def _check_pair(preds, truths, width):
    out = []
    for name, arr in (("preds", preds), ("truths", truths)):
        arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        if arr.ndim != 2 or arr.shape[1] != width:
            raise DomainError(f"{name} must be (n, {width}), got {arr.shape}")
        out.append(arr)
    preds, truths = out
    if preds.shape != truths.shape:
        raise DomainError(f"length mismatch: {preds.shape} vs {truths.shape}")
    if len(preds) == 0:
        raise DomainError("need at least one sample")
    return preds, truths


def mean_2d_error(preds: np.ndarray, truths: np.ndarray) -> float:
    """Mean planar Euclidean error in meters over (n, 2) position pairs."""
    preds, truths = _check_pair(preds, truths, 2)
    return float(np.hypot(*(preds - truths).T).mean())


def mean_3d_error(preds: np.ndarray, truths: np.ndarray) -> float:
    """Mean spatial Euclidean error in meters over (n, 3) position pairs."""
    preds, truths = _check_pair(preds, truths, 3)
    return float(np.sqrt(((preds - truths) ** 2).sum(axis=1)).mean())


def floor_detection_rate(pred_floors, true_floors) -> float:
    """Percentage of samples whose predicted floor matches the truth."""
    pred_floors = np.asarray(pred_floors, dtype=int).ravel()
    true_floors = np.asarray(true_floors, dtype=int).ravel()
    if pred_floors.shape != true_floors.shape:
        raise DomainError("length mismatch between predicted and true floors")
    if len(pred_floors) == 0:
        raise DomainError("need at least one sample")
    return float(100.0 * (pred_floors == true_floors).mean())


def ci95(values) -> tuple[float, float]:
    """Mean and 95% confidence half-width (Student t, sample std, n >= 2)."""
    values = np.asarray(values, dtype=np.float64).ravel()
    n = len(values)
    if n < 2:
        raise DomainError(f"confidence interval needs >= 2 values, got {n}")
    t_mult = float(stats.t.ppf(0.975, n - 1))
    half = t_mult * values.std(ddof=1) / math.sqrt(n)
    return float(values.mean()), float(half)


@dataclass(frozen=True)
class MetricSummary:
    """Cross-seed aggregate: means, 95% CI half-widths, best-of-runs values."""

    mean_2d_m: float
    ci_2d: float
    mean_3d_m: float
    ci_3d: float
    floor_rate_pct: float
    ci_floor: float
    best_2d_m: float
    best_3d_m: float
    best_floor_pct: float
    per_seed_2d: tuple[float, ...]
    per_seed_3d: tuple[float, ...]
    per_seed_floor: tuple[float, ...]


def summarize(values_2d, values_3d, values_floor) -> MetricSummary:
    """Aggregate per-seed metrics; best = min error, max floor rate."""
    v2, v3, vf = (tuple(float(v) for v in vs)
                  for vs in (values_2d, values_3d, values_floor))
    if not len(v2) == len(v3) == len(vf):
        raise DomainError("per-seed metric lists must have equal length")
    m2, h2 = ci95(v2)
    m3, h3 = ci95(v3)
    mf, hf = ci95(vf)
    return MetricSummary(mean_2d_m=m2, ci_2d=h2, mean_3d_m=m3, ci_3d=h3,
                         floor_rate_pct=mf, ci_floor=hf,
                         best_2d_m=min(v2), best_3d_m=min(v3),
                         best_floor_pct=max(vf),
                         per_seed_2d=v2, per_seed_3d=v3, per_seed_floor=vf)
