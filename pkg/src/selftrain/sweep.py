"""Parameter sweeps: selection-threshold grids, score-threshold grids for
LLM filtering, and n-shot grids.

Each (grid value, seed) cell is a full independent run; its root seed is
mix("sweep", axis, value, seed), so a cell can be reproduced in
isolation. Per-cell failures become error rows and the sweep continues.
Raw rows are always persisted alongside the aggregates.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, replace

from .config import ExperimentConfig
from .errors import ConfigError, SelftrainError
from .experiment import run_llm_cell, run_selftrain_cell
from .metrics import aggregate
from .seeds import mix
from .strategies import ConfThreshold, EntThreshold

AXES = ("conf_threshold", "ent_threshold", "score_threshold", "n_shot")

# Default grids: thresholds 0.50..0.95 in 0.05 steps, n-shot 5..30 in 5s.
DEFAULT_THRESHOLD_GRID = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
DEFAULT_NSHOT_GRID = (5, 10, 15, 20, 25, 30)


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    grid: tuple
    seeds: tuple[int, ...]
    base: ExperimentConfig

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; expected one of {AXES}")
        if not self.grid:
            raise ConfigError("sweep grid is empty")
        if not self.seeds:
            raise ConfigError("sweep needs at least one seed")
        diffs = [b - a for a, b in zip(self.grid, self.grid[1:])]
        if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise ConfigError(f"sweep grid must be strictly monotone: {self.grid}")
        if self.axis == "n_shot" and any(int(v) != v or v < 1 for v in self.grid):
            raise ConfigError(f"n_shot grid must be positive integers: {self.grid}")


@dataclass(frozen=True)
class SweepRow:
    value: float | int
    seed: int
    num_added: int | None
    pseudo_label_accuracy: float | None
    test_metric: float | None
    error: str | None = None


def _cell_config(base: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "conf_threshold":
        cap = getattr(base.strategy, "batch_cap", 1000)
        return replace(base, strategy=ConfThreshold(t=float(value), batch_cap=cap))
    if axis == "ent_threshold":
        cap = getattr(base.strategy, "batch_cap", 1000)
        return replace(base, strategy=EntThreshold(t=float(value), batch_cap=cap))
    if axis == "n_shot":
        return replace(base, n_shot=int(value))
    if base.llm is None:
        raise ConfigError("score_threshold sweeps need an llm block in the base config")
    return replace(
        base, llm=replace(base.llm, mode="obj-conf-score", threshold=float(value))
    )


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    rows = []
    for value in spec.grid:
        for seed in spec.seeds:
            cell_seed = mix("sweep", spec.axis, value, seed)
            try:
                config = _cell_config(spec.base, spec.axis, value)
                if spec.axis == "score_threshold":
                    result = run_llm_cell(config, cell_seed)
                else:
                    result = run_selftrain_cell(config, cell_seed)
                rows.append(
                    SweepRow(
                        value=value,
                        seed=seed,
                        num_added=result.num_added,
                        pseudo_label_accuracy=result.pseudo_label_accuracy,
                        test_metric=result.report.macro_f1,
                    )
                )
            except SelftrainError as e:
                rows.append(
                    SweepRow(
                        value=value, seed=seed, num_added=None,
                        pseudo_label_accuracy=None, test_metric=None,
                        error=f"{type(e).__name__}: {e}",
                    )
                )
    return rows


def _grid_order(rows):
    seen = []
    for row in rows:
        if row.value not in seen:
            seen.append(row.value)
    return seen


def compute_aggregates(rows: list[SweepRow]) -> list[dict]:
    aggregates = []
    for value in _grid_order(rows):
        ok = [r for r in rows if r.value == value and r.error is None]
        entry: dict = {"value": value, "n_ok": len(ok), "n_error": sum(
            1 for r in rows if r.value == value and r.error is not None
        )}
        if ok:
            metric = aggregate([r.test_metric for r in ok])
            entry["num_added_mean"] = sum(r.num_added for r in ok) / len(ok)
            entry["test_metric_mean"] = metric.mean
            entry["test_metric_ci95"] = metric.ci95
            pl = [r.pseudo_label_accuracy for r in ok if r.pseudo_label_accuracy is not None]
            entry["pseudo_label_accuracy_mean"] = sum(pl) / len(pl) if pl else None
        else:
            entry.update(
                num_added_mean=None, test_metric_mean=None, test_metric_ci95=None,
                pseudo_label_accuracy_mean=None,
            )
        aggregates.append(entry)
    return aggregates


def _cell(value) -> str:
    return "" if value is None else str(value)


def render_report(rows: list[SweepRow], axis: str, out_dir: str) -> dict[str, str]:
    """Write sweep.tsv, sweep.json, and plotdata.json; byte-deterministic."""
    os.makedirs(out_dir, exist_ok=True)
    aggregates = compute_aggregates(rows)

    tsv_path = os.path.join(out_dir, "sweep.tsv")
    with open(tsv_path, "w", encoding="utf-8") as f:
        f.write(
            "value\tseed\tnum_added\tpseudo_label_accuracy\ttest_metric\ttest_metric_ci95\terror\n"
        )
        for r in rows:
            f.write(
                "\t".join(
                    [
                        _cell(r.value), _cell(r.seed), _cell(r.num_added),
                        _cell(r.pseudo_label_accuracy), _cell(r.test_metric),
                        "", _cell(r.error),
                    ]
                )
                + "\n"
            )
        for a in aggregates:
            f.write(
                "\t".join(
                    [
                        _cell(a["value"]), "mean", _cell(a["num_added_mean"]),
                        _cell(a["pseudo_label_accuracy_mean"]),
                        _cell(a["test_metric_mean"]), _cell(a["test_metric_ci95"]), "",
                    ]
                )
                + "\n"
            )

    json_path = os.path.join(out_dir, "sweep.json")
    payload = {"axis": axis, "rows": [asdict(r) for r in rows], "aggregates": aggregates}
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")

    # The three series of the threshold-analysis plots: instance counts as
    # bars, labeling accuracy and test metric as lines over the same x.
    plot_path = os.path.join(out_dir, "plotdata.json")
    plot = {
        "axis": axis,
        "x": [a["value"] for a in aggregates],
        "bars_num_added": [a["num_added_mean"] for a in aggregates],
        "line_labeling_accuracy": [a["pseudo_label_accuracy_mean"] for a in aggregates],
        "line_test_metric": [a["test_metric_mean"] for a in aggregates],
    }
    with open(plot_path, "w", encoding="utf-8") as f:
        json.dump(plot, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")
    return {"tsv": tsv_path, "json": json_path, "plotdata": plot_path}


def load_rows(path: str) -> tuple[str, list[SweepRow]]:
    """Reload persisted raw rows (sweep.json) for re-rendering."""
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    rows = [SweepRow(**row) for row in payload["rows"]]
    return payload["axis"], rows
