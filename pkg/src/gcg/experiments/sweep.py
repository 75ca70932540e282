"""Multi-seed sweeps: per-seed learning curves and a mean / min-max aggregate."""

from __future__ import annotations

import csv
import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gcg.config import RunConfig
from gcg.errors import ConfigError, TrainingError

log = logging.getLogger(__name__)

CURVE_HEADER = ["step", "distance_m"]
AGGREGATE_HEADER = ["step", "mean", "min", "max", "n_seeds", "partial"]


@dataclass
class SweepResult:
    seed_csvs: dict[int, Path]
    aggregate_csv: Path
    failed: dict[int, str]
    steps: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def partial(self) -> bool:
        return bool(self.failed)


def read_episodes(metrics_csv) -> tuple[np.ndarray, np.ndarray]:
    """(end step, distance) of every episode row in a metrics file."""
    steps, dist = [], []
    with open(metrics_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["distance_m"] == "":
                continue
            steps.append(int(row["step"]))
            dist.append(float(row["distance_m"]))
    return np.asarray(steps, dtype=np.int64), np.asarray(dist)


def moving_average(values, window: int) -> np.ndarray:
    """Trailing moving average; the first points average over what is available."""
    v = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ConfigError("smoothing window must be >= 1")
    if v.size == 0 or window == 1:
        return v.copy()
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, v.size + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


def learning_curve(metrics_csv, interval: int, total_steps: int, smoothing: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Mean episode distance per ``interval`` steps, smoothed.

    An interval in which no episode ended repeats the previous value (0
    before the first episode).
    """
    ends, dist = read_episodes(metrics_csv)
    grid = np.arange(interval, total_steps + 1, interval, dtype=np.int64)
    out = np.zeros(grid.size)
    prev = 0.0
    for i, x in enumerate(grid):
        sel = (ends > x - interval) & (ends <= x)
        if sel.any():
            prev = float(dist[sel].mean())
        out[i] = prev
    return grid, moving_average(out, smoothing)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _run_seed(cfg: RunConfig, seed: int, out: Path):
    from gcg.driver.run import run

    run(cfg, seed=seed, out_dir=out)
    return out / "metrics.csv"


def sweep(cfg: RunConfig, seeds=None, out_dir=None, smoothing: int = 5, workers: int = 1) -> SweepResult:
    """Run every seed and aggregate their learning curves.

    Seeds that abort are reported in ``failed`` and the aggregate is marked
    partial.
    """
    seeds = list(cfg.seeds if seeds is None else seeds)
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = dataclasses.replace(cfg, seeds=seeds)
    metrics: dict[int, Path] = {}
    failed: dict[int, str] = {}
    jobs = [(s, out / f"seed_{s}") for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = {s: ex.submit(_run_seed, cfg, s, d) for s, d in jobs}
            for s, f in futs.items():
                try:
                    metrics[s] = f.result()
                except TrainingError as exc:
                    failed[s] = str(exc)
    else:
        for s, d in jobs:
            try:
                metrics[s] = _run_seed(cfg, s, d)
            except TrainingError as exc:
                failed[s] = str(exc)
    for s, msg in failed.items():
        log.warning("seed %d aborted: %s", s, msg)
    return aggregate(metrics, cfg.eval_interval, cfg.steps, out, smoothing, failed)


def aggregate(metrics: dict[int, Path], interval: int, total_steps: int, out: Path, smoothing: int = 5,
              failed: dict[int, str] | None = None) -> SweepResult:
    failed = dict(failed or {})
    grid = np.arange(interval, total_steps + 1, interval, dtype=np.int64)
    curves, seed_csvs = [], {}
    for s in sorted(metrics):
        x, y = learning_curve(metrics[s], interval, total_steps, smoothing)
        p = out / f"curve_seed{s}.csv"
        _write_rows(p, CURVE_HEADER, [(int(a), repr(float(b))) for a, b in zip(x, y)])
        seed_csvs[s] = p
        curves.append(y)
    if curves:
        Y = np.vstack(curves)
        mean, lo, hi = Y.mean(axis=0), Y.min(axis=0), Y.max(axis=0)
    else:
        mean = lo = hi = np.zeros(grid.size)
    agg = out / "aggregate.csv"
    flag = int(bool(failed))
    _write_rows(agg, AGGREGATE_HEADER,
                [(int(x), repr(float(m)), repr(float(a)), repr(float(b)), len(curves), flag)
                 for x, m, a, b in zip(grid, mean, lo, hi)])
    return SweepResult(seed_csvs, agg, failed, grid, mean, lo, hi)
