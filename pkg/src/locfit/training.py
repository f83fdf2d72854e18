"""Supervised training loop and multi-seed experiment execution.

Per-seed determinism: the validation split uses the seed directly, SDAE
pretraining draws from stream [seed, 0], fresh supervised layers from
[seed, 1], and the training loop (shuffles + dropout) from [seed, 2], so
every run is a pure function of its seed and sweeps reuse pretrained
encoders without changing any result.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .data import (FingerprintDataset, NormalizationSpec, normalize_rss,
                   one_hot_floors, split_validation)
from .errors import ConfigError, DomainError, NumericError
from .metrics import (MetricSummary, floor_detection_rate, mean_2d_error,
                      mean_3d_error, summarize)
from .models import (LocModel, SimoConfig, SisoConfig, build_simo, build_siso,
                     predict_simo_batch, predict_siso_batch)
from .nn import (NadamConfig, backward, cce_grad, cce_loss, forward, mse_grad,
                 mse_loss, nadam_step)
from .sdae import pretrain_stack


@dataclass(frozen=True)
class TrainConfig:
    """Supervised phase schedule and early-stopping policy."""

    max_epochs: int = 100
    batch_size: int = 64
    val_fraction: float = 0.2
    patience: int = 10
    min_delta: float = 0.0
    nadam: NadamConfig = NadamConfig()

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass
class TrainRunResult:
    """One seed's outcome: stopping point, loss traces, test metrics."""

    seed: int
    best_epoch: int
    epochs_run: int
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    mean_2d_m: float = math.nan
    mean_3d_m: float = math.nan
    floor_rate_pct: float = math.nan
    error: str | None = None


class EarlyStopping:
    """Patience rule on a minimized monitor, with best-epoch bookkeeping.

    An epoch improves when its loss < best - min_delta (strict); after
    `patience` consecutive non-improving epochs `stop` becomes true.
    """

    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = 0
        self.wait = 0
        self.stop = False

    def update(self, epoch: int, loss: float) -> bool:
        """Record one epoch; returns whether it improved the best."""
        if loss < self.best - self.min_delta:
            self.best = loss
            self.best_epoch = epoch
            self.wait = 0
            return True
        self.wait += 1
        if self.wait >= self.patience:
            self.stop = True
        return False


def _targets(model: LocModel, ds: FingerprintDataset) -> list[np.ndarray]:
    if model.kind == "simo":
        return [one_hot_floors(ds.floors, model.n_floors),
                model.norm.normalize_xy(ds.coords[:, :2])]
    return [model.norm.normalize_xyz(ds.coords)]


def _loss_and_grads(model: LocModel, outs, targets):
    """Weighted total loss and d(total)/d(head output) per head."""
    if model.kind == "simo":
        floor_w, coord_w = model.loss_weights
        floor_part = cce_loss(outs[0], targets[0])
        coord_part = mse_loss(outs[1], targets[1])
        total = floor_w * floor_part + coord_w * coord_part
        grads = [floor_w * cce_grad(outs[0], targets[0]),
                 coord_w * mse_grad(outs[1], targets[1])]
    else:
        total = mse_loss(outs[0], targets[0])
        grads = [mse_grad(outs[0], targets[0])]
    return total, grads


def _validation_loss(model: LocModel, x_val, t_val) -> float:
    outs, _ = forward(model.params, model.net, x_val, mode="infer")
    total, _ = _loss_and_grads(model, outs, t_val)
    return total


def train(model: LocModel, dataset: FingerprintDataset,
          config: TrainConfig = TrainConfig(), seed: int = 1
          ) -> tuple[LocModel, TrainRunResult]:
    """Train with early stopping; the model keeps the best-validation weights.

    Improvement means monitored loss < best - min_delta (strict); training
    stops after `patience` consecutive non-improving epochs. A non-finite
    loss marks the run failed instead of raising.
    """
    if dataset.role != "train":
        raise DomainError(f"dataset role must be 'train', got {dataset.role!r}")
    if model.norm is None:
        raise DomainError("model needs a fitted normalization spec before training")
    train_part, val_part = split_validation(dataset, config.val_fraction, seed)
    if len(val_part) == 0:
        raise DomainError("validation split is empty; raise val_fraction")

    x_tr = normalize_rss(train_part.rss, model.norm)
    t_tr = _targets(model, train_part)
    x_val = normalize_rss(val_part.rss, model.norm)
    t_val = _targets(model, val_part)

    rng = np.random.default_rng([seed, 2])
    state = config.nadam.make_state(model.params)
    stopper = EarlyStopping(config.patience, config.min_delta)
    best_params = model.params.copy()
    result = TrainRunResult(seed=seed, best_epoch=0, epochs_run=0)

    try:
        n = len(train_part)
        for epoch in range(1, config.max_epochs + 1):
            result.epochs_run = epoch
            perm = rng.permutation(n)
            running = 0.0
            for start in range(0, n, config.batch_size):
                idx = perm[start:start + config.batch_size]
                outs, trace = forward(model.params, model.net, x_tr[idx],
                                      mode="train", rng=rng)
                total, head_grads = _loss_and_grads(model, outs,
                                                    [t[idx] for t in t_tr])
                if not math.isfinite(total):
                    raise NumericError(f"non-finite training loss at epoch {epoch}")
                grads = backward(trace, model.params, model.net, head_grads)
                nadam_step(model.params, grads, state)
                running += total * len(idx)
            result.train_losses.append(running / n)

            val_loss = _validation_loss(model, x_val, t_val)
            if not math.isfinite(val_loss):
                raise NumericError(f"non-finite validation loss at epoch {epoch}")
            result.val_losses.append(val_loss)

            if stopper.update(epoch, val_loss):
                best_params = model.params.copy()
            if stopper.stop:
                break
    except NumericError as exc:
        result.error = str(exc)

    model.params = best_params
    result.best_epoch = stopper.best_epoch
    return model, result


def evaluate_model(model: LocModel, test_ds: FingerprintDataset
                   ) -> tuple[float, float, float]:
    """Test-set (mean 2D m, mean 3D m, floor rate %) in original meters."""
    x = normalize_rss(test_ds.rss, model.norm)
    truth_xyz = test_ds.coords
    if model.kind == "simo":
        floors, _probs, xy, z = predict_simo_batch(model, x)
        pred_xyz = np.column_stack([xy, z])
    else:
        floors, pred_xyz = predict_siso_batch(model, x)
        xy = pred_xyz[:, :2]
    m2 = mean_2d_error(xy, truth_xyz[:, :2])
    m3 = mean_3d_error(pred_xyz, truth_xyz)
    rate = floor_detection_rate(floors, test_ds.floors)
    return m2, m3, rate


def make_simo_builder(train_ds: FingerprintDataset, config: SimoConfig,
                      norm: NormalizationSpec, nadam: NadamConfig = NadamConfig(),
                      encoder_cache: dict | None = None) -> Callable[[int], LocModel]:
    """Seed -> pretrained-and-assembled hybrid model, ready to train."""
    if config.n_floors != train_ds.n_floors:
        raise ConfigError(f"config n_floors {config.n_floors} != dataset "
                          f"{train_ds.n_floors}")
    x = normalize_rss(train_ds.rss, norm)

    def build(seed: int) -> LocModel:
        encoders = _pretrained(x, config.sdae, seed, nadam, encoder_cache)
        model = build_simo(config, encoders, np.random.default_rng([seed, 1]),
                           n_ap=train_ds.n_ap, floor_height=train_ds.floor_height)
        model.norm = norm
        return model

    return build


def make_siso_builder(train_ds: FingerprintDataset, config: SisoConfig,
                      norm: NormalizationSpec, nadam: NadamConfig = NadamConfig(),
                      encoder_cache: dict | None = None) -> Callable[[int], LocModel]:
    """Seed -> pretrained-and-assembled 3D-regression model, ready to train."""
    x = normalize_rss(train_ds.rss, norm)

    def build(seed: int) -> LocModel:
        encoders = _pretrained(x, config.sdae, seed, nadam, encoder_cache)
        model = build_siso(config, encoders, np.random.default_rng([seed, 1]),
                           n_ap=train_ds.n_ap, n_floors=train_ds.n_floors,
                           floor_height=train_ds.floor_height)
        model.norm = norm
        return model

    return build


def _pretrained(x, sdae_config, seed, nadam, cache):
    if cache is not None and seed in cache:
        return cache[seed]
    encoders = pretrain_stack(x, sdae_config, np.random.default_rng([seed, 0]), nadam)
    if cache is not None:
        cache[seed] = encoders
    return encoders


def _thread_count() -> int:
    raw = os.environ.get("LOCFIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"LOCFIT_THREADS must be an integer, got {raw!r}") from None


def multi_run(builder: Callable[[int], LocModel],
              datasets: tuple[FingerprintDataset, FingerprintDataset],
              config: TrainConfig, seeds,
              model_sink: Callable[[int, LocModel], None] | None = None
              ) -> list[TrainRunResult]:
    """Train + evaluate one run per seed; results are ordered by seed.

    Runs are isolated, so LOCFIT_THREADS of them may execute in parallel
    without changing any result. Failed runs carry their diagnostic in
    `error`; only if every run fails is the failure raised.
    """
    train_ds, test_ds = datasets
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise DomainError("need at least 2 seeds for a confidence interval")

    def run_one(seed: int):
        model = builder(seed)
        model, result = train(model, train_ds, config, seed)
        if result.error is None:
            (result.mean_2d_m, result.mean_3d_m,
             result.floor_rate_pct) = evaluate_model(model, test_ds)
        return result, model

    results = []
    threads = _thread_count()
    if threads == 1:
        for seed in seeds:
            result, model = run_one(seed)
            if model_sink is not None and result.error is None:
                model_sink(seed, model)
            results.append(result)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_one, s) for s in seeds]
            for fut in futures:
                result, model = fut.result()
                if model_sink is not None and result.error is None:
                    model_sink(result.seed, model)
                results.append(result)

    results.sort(key=lambda r: r.seed)
    if all(r.error is not None for r in results):
        raise NumericError("all runs failed: " + "; ".join(r.error for r in results))
    return results


def summarize_runs(results: list[TrainRunResult]) -> MetricSummary:
    """Aggregate the successful runs of a multi_run."""
    ok = [r for r in results if r.error is None]
    if len(ok) < 2:
        raise DomainError("need at least 2 successful runs to summarize")
    return summarize([r.mean_2d_m for r in ok], [r.mean_3d_m for r in ok],
                     [r.floor_rate_pct for r in ok])


@dataclass
class SweepRow:
    coord_weight: float
    runs: list[TrainRunResult]
    summary: MetricSummary


@dataclass
class SweepReport:
    rows: list[SweepRow]


DEFAULT_WEIGHT_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.5, 2.0)


def simo_weight_builder_factory(train_ds: FingerprintDataset, base: SimoConfig,
                                norm: NormalizationSpec,
                                nadam: NadamConfig = NadamConfig(),
                                encoder_cache: dict | None = None
                                ) -> Callable[[float], Callable[[int], LocModel]]:
    """Coordinate weight -> builder, with the floor loss weight pinned at 1.0.

    Passing a shared encoder_cache makes the sweep reuse each seed's
    pretraining across weights (pretraining never sees the loss weights).
    """
    def make(coord_weight: float) -> Callable[[int], LocModel]:
        cfg = replace(base, coord_loss_weight=float(coord_weight),
                      floor_loss_weight=1.0)
        return make_simo_builder(train_ds, cfg, norm, nadam, encoder_cache)

    return make


def sweep_coord_weight(make_builder: Callable[[float], Callable[[int], LocModel]],
                       datasets, config: TrainConfig, weights,
                       seeds) -> SweepReport:
    """multi_run per grid weight, aggregated into per-weight summaries."""
    weights = [float(w) for w in weights]
    if not weights:
        raise DomainError("weight grid is empty")
    rows = []
    for w in weights:
        results = multi_run(make_builder(w), datasets, config, seeds)
        rows.append(SweepRow(coord_weight=w, runs=results,
                             summary=summarize_runs(results)))
    return SweepReport(rows=rows)
