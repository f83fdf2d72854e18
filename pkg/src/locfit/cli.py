"""Command-line entry point: train, sweep, baseline, report, synth.

Exit codes: 0 success, 2 usage/config problems, 3 data errors, 4 numeric
failure. Outputs are deterministic functions of (config, data, seeds);
LOCFIT_THREADS caps how many seed runs execute in parallel.
"""

import argparse
import sys
from pathlib import Path

from . import config as cfgmod
from .data import (load_dataset, normalize_coords, save_dataset,
                   synth_dataset_pair)
from .errors import (ConfigError, DomainError, NumericError, ParseError,
                     SchemaError)
from .knn import knn_predict_batch
from .metrics import floor_detection_rate, mean_2d_error, mean_3d_error
from .models import save_model
from .reports import (ALG_KNN, ALG_SIMO, ALG_SISO, LITERATURE_ROWS,
                      SummaryRow, build_report_md, comparison_figure,
                      read_summary_csv, sweep_figures, write_run_logs,
                      write_runs_csv, write_summary_csv, write_sweep_csv)
from .training import (DEFAULT_WEIGHT_GRID, make_simo_builder,
                       make_siso_builder, multi_run,
                       simo_weight_builder_factory, summarize_runs,
                       sweep_coord_weight)


def _require_files(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"no such file: {p}")


def _load_pair(args, cfg):
    data = cfg["data"]
    train_ds = load_dataset(args.train, data["n_floors"], data["floor_height"],
                            role="train")
    test_ds = load_dataset(args.test, data["n_floors"], data["floor_height"],
                           role="test")
    if train_ds.n_ap != test_ds.n_ap:
        raise SchemaError(f"inconsistent n_ap: train has {train_ds.n_ap}, "
                          f"test has {test_ds.n_ap}")
    _, norm = normalize_coords(train_ds.coords[:, :2],
                               rss_min=data["rss_min"], rss_max=data["rss_max"])
    return train_ds, test_ds, norm


def _seed_list(n: int) -> list[int]:
    if n < 1:
        raise ConfigError(f"--seeds must be >= 1, got {n}")
    return list(range(1, n + 1))


def cmd_train(args) -> int:
    _require_files(args.train, args.test, args.config)
    cfg = cfgmod.load_config(args.config)
    if args.epochs is not None:
        cfg["training"]["max_epochs"] = args.epochs
    if args.coord_weight is not None:
        cfg["simo"]["coord_loss_weight"] = args.coord_weight
    if args.floor_weight is not None:
        cfg["simo"]["floor_loss_weight"] = args.floor_weight

    seeds = _seed_list(args.seeds)
    train_ds, test_ds, norm = _load_pair(args, cfg)
    nadam = cfgmod.nadam_config(cfg)
    if args.model == "simo":
        builder = make_simo_builder(train_ds, cfgmod.simo_config(cfg), norm, nadam)
        algorithm = ALG_SIMO
    else:
        builder = make_siso_builder(train_ds, cfgmod.siso_config(cfg), norm, nadam)
        algorithm = ALG_SISO

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sink = None
    if args.save_models:
        def sink(seed, model):
            save_model(model, out / f"model_seed{seed}")

    results = multi_run(builder, (train_ds, test_ds), cfgmod.train_config(cfg),
                        seeds, model_sink=sink)
    write_runs_csv(results, out / "runs.csv")
    write_run_logs(results, out)
    summary = summarize_runs(results)
    write_summary_csv([SummaryRow.from_summary(algorithm, summary)],
                      out / "summary.csv")
    failed = sum(1 for r in results if r.error is not None)
    print(f"{algorithm}: {len(results)} runs ({failed} failed), "
          f"mean 2D {summary.mean_2d_m:.2f} m, mean 3D {summary.mean_3d_m:.2f} m, "
          f"floor rate {summary.floor_rate_pct:.2f} %")
    print(f"wrote {out / 'runs.csv'} and {out / 'summary.csv'}")
    return 0


def _parse_weights(raw: str) -> list[float]:
    try:
        weights = [float(w) for w in raw.split(",") if w.strip() != ""]
    except ValueError:
        raise ConfigError(f"malformed --weights list: {raw!r}") from None
    if not weights or any(w < 0 for w in weights):
        raise ConfigError(f"--weights needs nonnegative values, got {raw!r}")
    return weights


def cmd_sweep(args) -> int:
    _require_files(args.train, args.test, args.config, args.siso_ref)
    cfg = cfgmod.load_config(args.config)
    seeds = _seed_list(args.seeds)
    weights = (_parse_weights(args.weights) if args.weights is not None
               else list(DEFAULT_WEIGHT_GRID))

    siso_ref = None
    if args.siso_ref is not None:
        rows = read_summary_csv(args.siso_ref)
        matches = [r for r in rows if r.algorithm == ALG_SISO] or rows
        siso_ref = matches[0]

    train_ds, test_ds, norm = _load_pair(args, cfg)
    factory = simo_weight_builder_factory(train_ds, cfgmod.simo_config(cfg), norm,
                                          cfgmod.nadam_config(cfg),
                                          encoder_cache={})
    report = sweep_coord_weight(factory, (train_ds, test_ds),
                                cfgmod.train_config(cfg), weights, seeds)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(report, out / "sweep.csv")
    figures = sweep_figures(report, out, siso_ref)
    print(f"wrote {out / 'sweep.csv'} and {len(figures)} figure(s)")
    return 0


def cmd_baseline(args) -> int:
    _require_files(args.train, args.test, args.config)
    cfg = cfgmod.load_config(args.config)
    if args.k is not None:
        cfg["knn"]["k"] = args.k
    kcfg = cfgmod.knn_config(cfg)

    train_ds, test_ds, _norm = _load_pair(args, cfg)
    floors, xyz = knn_predict_batch(train_ds, test_ds.rss, kcfg)
    row = SummaryRow.deterministic(
        ALG_KNN,
        mean_2d_error(xyz[:, :2], test_ds.coords[:, :2]),
        mean_3d_error(xyz, test_ds.coords),
        floor_detection_rate(floors, test_ds.floors))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv([row], out / "summary.csv")
    print(f"# kNN config: k={kcfg.k}, data=powed (exponent={kcfg.pow_exponent:.6f}), "
          f"dist=sorensen, not_heard={kcfg.not_heard_dbm:g} dBm")
    print(f"{ALG_KNN}: mean 2D {row.mean_2d_m:.2f} m, mean 3D {row.mean_3d_m:.2f} m, "
          f"floor rate {row.floor_rate_pct:.2f} %")
    print(f"wrote {out / 'summary.csv'}")
    return 0


def cmd_report(args) -> int:
    given = [p for p in (args.simo, args.siso, args.knn) if p is not None]
    if not given:
        raise ConfigError("give at least one of --simo/--siso/--knn")
    _require_files(*given)

    rows = []
    for path in (args.simo, args.siso, args.knn):
        if path is not None:
            rows.extend(read_summary_csv(path))

    md = build_report_md(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.md").write_text(md, encoding="utf-8")

    fig_rows = rows + [SummaryRow.deterministic(name, m2, m3, fr)
                       for name, m2, m3, fr, _note in LITERATURE_ROWS]
    comparison_figure(fig_rows, out / "comparison.svg")
    print(md, end="")
    print(f"wrote {out / 'report.md'} and {out / 'comparison.svg'}")
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds = synth_dataset_pair(args.seed, args.n_ap, args.n_floors,
                                           args.n_train, args.n_test)
    save_dataset(train_ds, out / "train.csv")
    save_dataset(test_ds, out / "test.csv")
    print(f"wrote {out / 'train.csv'} ({len(train_ds)} records) and "
          f"{out / 'test.csv'} ({len(test_ds)} records)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locfit",
        description="Wi-Fi fingerprint localization: neural models, kNN "
                    "baseline, and evaluation harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(p):
        p.add_argument("--train", required=True, help="training CSV (canonical format)")
        p.add_argument("--test", required=True, help="test CSV (canonical format)")
        p.add_argument("--config", default=None, help="JSON config overriding defaults")
        p.add_argument("--out", required=True, help="output directory")

    p_train = sub.add_parser("train", help="multi-seed model training and evaluation")
    add_data_args(p_train)
    p_train.add_argument("--model", choices=("simo", "siso"), required=True)
    p_train.add_argument("--seeds", type=int, default=20,
                         help="number of seeds (1..N)")
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--coord-weight", type=float, default=None)
    p_train.add_argument("--floor-weight", type=float, default=None)
    p_train.add_argument("--save-models", action=argparse.BooleanOptionalAction,
                         default=True, help="persist the best model per seed")
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="coordinate loss weight sweep")
    add_data_args(p_sweep)
    p_sweep.add_argument("--seeds", type=int, default=20)
    p_sweep.add_argument("--weights", default=None,
                         help="comma-separated grid (default 0.1..1.0,1.5,2.0)")
    p_sweep.add_argument("--siso-ref", default=None,
                         help="summary.csv with reference lines for the figures")
    p_sweep.set_defaults(func=cmd_sweep)

    p_base = sub.add_parser("baseline", help="deterministic kNN baseline")
    add_data_args(p_base)
    p_base.add_argument("--k", type=int, default=None)
    p_base.set_defaults(func=cmd_baseline)

    p_rep = sub.add_parser("report", help="merge summaries into a comparison report")
    p_rep.add_argument("--simo", default=None, help="hybrid-model summary.csv")
    p_rep.add_argument("--siso", default=None, help="reference-model summary.csv")
    p_rep.add_argument("--knn", default=None, help="kNN summary.csv")
    p_rep.add_argument("--out", required=True)
    p_rep.set_defaults(func=cmd_report)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset pair")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=1)
    p_synth.add_argument("--n-ap", type=int, default=64)
    p_synth.add_argument("--n-floors", type=int, default=5)
    p_synth.add_argument("--n-train", type=int, default=300)
    p_synth.add_argument("--n-test", type=int, default=200)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, SchemaError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
