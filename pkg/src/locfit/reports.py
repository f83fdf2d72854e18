"""Delimited outputs, per-run JSON logs, markdown report, and SVG figures.

All emitters are deterministic: floats print with 4 decimals in CSVs, JSON
keys are sorted, and figures are rendered with a fixed SVG hash salt and
no embedded timestamps, so re-running an experiment reproduces outputs
byte for byte.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import SchemaError  # noqa: E402
from .metrics import MetricSummary  # noqa: E402
from .training import SweepReport, TrainRunResult  # noqa: E402

plt.rcParams["svg.hashsalt"] = "locfit"

ALG_SIMO = "SIMO-DNN hybrid classification/regression"
ALG_SISO = "SISO-DNN 3D regression"
ALG_KNN = "UJI kNN (powed/sorensen)"

# published TUT benchmark result reported alongside the kNN baseline
LITERATURE_ROWS = [
    ("RSS clustering (affinity propagation)", 8.09, 8.70, 90.81,
     "published benchmark"),
]

RUNS_HEADER = "seed,best_epoch,epochs_run,mean_2d_m,mean_3d_m,floor_rate_pct"
SUMMARY_HEADER = ("algorithm,mean_2d_m,ci_2d,mean_3d_m,ci_3d,floor_rate_pct,"
                  "ci_floor,best_2d_m,best_3d_m,best_floor_pct")
SWEEP_HEADER = ("coord_weight,mean_2d_m,ci_2d,mean_3d_m,ci_3d,floor_rate_pct,"
                "ci_floor,best_2d_m,best_3d_m,best_floor_pct")


def _f(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.4f}"


@dataclass
class SummaryRow:
    """One summary.csv line; ci fields are None for deterministic algorithms."""

    algorithm: str
    mean_2d_m: float
    ci_2d: float | None
    mean_3d_m: float
    ci_3d: float | None
    floor_rate_pct: float
    ci_floor: float | None
    best_2d_m: float
    best_3d_m: float
    best_floor_pct: float

    @classmethod
    def from_summary(cls, algorithm: str, s: MetricSummary) -> "SummaryRow":
        return cls(algorithm, s.mean_2d_m, s.ci_2d, s.mean_3d_m, s.ci_3d,
                   s.floor_rate_pct, s.ci_floor, s.best_2d_m, s.best_3d_m,
                   s.best_floor_pct)

    @classmethod
    def deterministic(cls, algorithm: str, mean_2d: float, mean_3d: float,
                      floor_rate: float) -> "SummaryRow":
        return cls(algorithm, mean_2d, None, mean_3d, None, floor_rate, None,
                   mean_2d, mean_3d, floor_rate)

    def metric_values(self) -> str:
        return ",".join([_f(self.mean_2d_m), _f(self.ci_2d), _f(self.mean_3d_m),
                         _f(self.ci_3d), _f(self.floor_rate_pct), _f(self.ci_floor),
                         _f(self.best_2d_m), _f(self.best_3d_m),
                         _f(self.best_floor_pct)])


def write_runs_csv(results: list[TrainRunResult], path) -> None:
    lines = [RUNS_HEADER]
    for r in results:
        lines.append(f"{r.seed},{r.best_epoch},{r.epochs_run},"
                     f"{_f(r.mean_2d_m)},{_f(r.mean_3d_m)},{_f(r.floor_rate_pct)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary_csv(rows: list[SummaryRow], path) -> None:
    lines = [SUMMARY_HEADER]
    for row in rows:
        if "," in row.algorithm:
            raise SchemaError(f"algorithm name may not contain commas: "
                              f"{row.algorithm!r}")
        lines.append(f"{row.algorithm},{row.metric_values()}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_summary_csv(path) -> list[SummaryRow]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != SUMMARY_HEADER:
        raise SchemaError(f"{path}: not a summary.csv (unexpected header)")

    def parse(field: str) -> float | None:
        if field == "n/a":
            return None
        try:
            return float(field)
        except ValueError:
            raise SchemaError(f"{path}: non-numeric summary field {field!r}") from None

    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 10:
            raise SchemaError(f"{path}: summary row has {len(parts)} fields")
        rows.append(SummaryRow(parts[0], *[parse(p) for p in parts[1:]]))
    return rows


def write_sweep_csv(report: SweepReport, path) -> None:
    lines = [SWEEP_HEADER]
    for row in report.rows:
        values = SummaryRow.from_summary("", row.summary).metric_values()
        lines.append(f"{_f(row.coord_weight)},{values}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_run_logs(results: list[TrainRunResult], out_dir) -> None:
    """Per-run JSON loss traces under <out_dir>/logs/."""
    log_dir = Path(out_dir) / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)
    for r in results:
        payload = {"seed": r.seed, "best_epoch": r.best_epoch,
                   "epochs_run": r.epochs_run, "train_losses": r.train_losses,
                   "val_losses": r.val_losses, "error": r.error}
        (log_dir / f"run_seed{r.seed}.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


_METRICS = (
    ("mean_2d_m", "ci_2d", "Mean 2D positioning error [m]"),
    ("mean_3d_m", "ci_3d", "Mean 3D positioning error [m]"),
    ("floor_rate_pct", "ci_floor", "Floor detection rate [%]"),
)


def _save_svg(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def sweep_figures(report: SweepReport, out_dir,
                  siso_ref: SummaryRow | None = None) -> list[Path]:
    """One SVG per metric: sweep means with CI whiskers, optional horizontal
    reference lines (dash-dotted mean, dashed CI band edges)."""
    out_dir = Path(out_dir)
    weights = [row.coord_weight for row in report.rows]
    paths = []
    for attr, ci_attr, label in _METRICS:
        means = [getattr(row.summary, attr) for row in report.rows]
        cis = [getattr(row.summary, ci_attr) for row in report.rows]
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        ax.errorbar(weights, means, yerr=cis, marker="o", capsize=3,
                    label="hybrid model")
        if siso_ref is not None:
            mean = getattr(siso_ref, attr)
            ci = getattr(siso_ref, ci_attr)
            ax.axhline(mean, linestyle="-.", color="tab:red",
                       label="3D-regression reference")
            if ci is not None:
                ax.axhline(mean - ci, linestyle="--", color="tab:red", linewidth=0.8)
                ax.axhline(mean + ci, linestyle="--", color="tab:red", linewidth=0.8)
        ax.set_xlabel("Coordinates loss weight")
        ax.set_ylabel(label)
        ax.legend(loc="best")
        fig.tight_layout()
        path = out_dir / f"sweep_{attr}.svg"
        _save_svg(fig, path)
        paths.append(path)
    return paths


def comparison_figure(rows: list[SummaryRow], path) -> None:
    """Grouped bars, one panel per metric, one bar per algorithm."""
    fig, axes = plt.subplots(1, 3, figsize=(11.0, 3.6))
    x = range(len(rows))
    names = [r.algorithm for r in rows]
    for ax, (attr, _ci, label) in zip(axes, _METRICS):
        ax.bar(x, [getattr(r, attr) for r in rows], color="tab:blue")
        ax.set_xticks(list(x))
        ax.set_xticklabels(names, rotation=30, ha="right", fontsize=7)
        ax.set_ylabel(label)
    fig.tight_layout()
    _save_svg(fig, path)


def build_report_md(rows: list[SummaryRow], notes: dict[str, str] | None = None) -> str:
    """Markdown comparison table: given summaries plus the literature row.

    DNN rows show best-of-runs values (the summary CSVs keep the means and
    CIs); deterministic rows show their single measurement.
    """
    notes = notes or {}
    seen = set()
    for row in rows:
        if row.algorithm in seen:
            raise SchemaError(f"duplicate algorithm row {row.algorithm!r}")
        seen.add(row.algorithm)

    lines = ["# Localization performance comparison", "",
             "| Algorithm | Mean 2D error [m] | Mean 3D error [m] | "
             "Floor detection [%] | Notes |",
             "|---|---|---|---|---|"]
    entries = []
    for row in rows:
        note = notes.get(row.algorithm,
                         "best of seeded runs" if row.ci_2d is not None
                         else "deterministic")
        entries.append((row.algorithm, row.best_2d_m, row.best_3d_m,
                        row.best_floor_pct, note))
    for name, m2, m3, fr, note in LITERATURE_ROWS:
        if name in seen:
            raise SchemaError(f"duplicate algorithm row {name!r}")
        entries.append((name, m2, m3, fr, note))
    for name, m2, m3, fr, note in entries:
        lines.append(f"| {name} | {m2:.2f} | {m3:.2f} | {fr:.2f} | {note} |")
    lines.append("")
    return "\n".join(lines) + "\n"
