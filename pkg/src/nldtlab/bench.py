"""Repeated randomized runs, aggregation, rank-sum significance and tables.

One experiment fixes a dataset and a method, then for every cell of a
hyperparameter grid performs ``n_runs`` fits on fresh stratified 70/30 splits.
Run ``i`` uses seed ``base_seed + i`` for both the split and the learner, so
results do not depend on how runs are scheduled across worker processes.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.stats import rankdata

from . import methods
from .core import Dataset, accuracy, load_csv, split
from .datagen import FAMILIES, PARETO_FAMILIES, SyntheticSpec, generate

RESULTS_ENV = "NLDTLAB_RESULTS"
ALPHA = 0.05
EXACT_MAX_N = 10


# --------------------------------------------------------------------------- specs


@dataclass
class ExperimentSpec:
    """Dataset source, method, hyperparameter grid and run protocol.

    ``dataset`` is either a generator family name (``ds1``, ``mzdt1`` ...) or
    a CSV path. ``grid`` maps parameter names to lists of values; the cells
    are their Cartesian product. ``params`` holds fixed settings shared by
    every cell.
    """

    dataset: str
    method: str
    params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    n_runs: int = 50
    base_seed: int = 0
    train_fraction: float = 0.7
    dataset_options: dict = field(default_factory=dict)
    label_column: str = "label"

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        methods.get(self.method)
        for k, v in self.grid.items():
            if not isinstance(v, (list, tuple)) or len(v) == 0:
                raise ValueError(f"grid entry {k!r} must be a non-empty list")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")

    def cells(self) -> list[dict]:
        keys = list(self.grid)
        if not keys:
            return [dict(self.params)]
        return [{**self.params, **dict(zip(keys, combo))} for combo in itertools.product(*(self.grid[k] for k in keys))]

    def load_dataset(self) -> Dataset:
        key = self.dataset.lower().replace("-", "")
        if key in FAMILIES and not Path(self.dataset).exists():
            opts = {k: v for k, v in self.dataset_options.items() if v is not None}
            if key not in PARETO_FAMILIES:
                opts.pop("d", None)
            return generate(SyntheticSpec(key, seed=self.base_seed, **opts))
        return load_csv(self.dataset, label_column=self.label_column)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunRecord:
    run: int
    seed: int
    params: dict
    accuracy_train: float = math.nan
    accuracy_test: float = math.nan
    complexity: float = math.nan
    wall_time: float = math.nan
    error: str | None = None
    model: Any = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    a = np.asarray(values, dtype=float)
    std = float(a.std(ddof=1)) if len(a) > 1 else 0.0
    return float(a.mean()), std


@dataclass
class RunStats:
    """Per-run rows of one grid cell plus mean and sample std aggregates."""

    params: dict
    records: list[RunRecord]
    method: str = ""
    dataset: str = ""

    def _values(self, attr: str) -> list[float]:
        return [getattr(r, attr) for r in self.records if r.ok]

    @property
    def n_ok(self) -> int:
        return sum(r.ok for r in self.records)

    @property
    def n_failed(self) -> int:
        return len(self.records) - self.n_ok

    @property
    def accuracies(self) -> np.ndarray:
        return np.asarray(self._values("accuracy_test"))

    @property
    def complexities(self) -> np.ndarray:
        return np.asarray(self._values("complexity"))

    @property
    def accuracy(self) -> tuple[float, float]:
        return _mean_std(self._values("accuracy_test"))

    @property
    def complexity(self) -> tuple[float, float]:
        return _mean_std(self._values("complexity"))

    @property
    def wall_time(self) -> tuple[float, float]:
        return _mean_std(self._values("wall_time"))

    def summary(self) -> dict:
        (am, asd), (cm, csd), (wm, wsd) = self.accuracy, self.complexity, self.wall_time
        return {"accuracy_mean": am, "accuracy_std": asd, "complexity_mean": cm, "complexity_std": csd,
                "wall_time_mean": wm, "wall_time_std": wsd, "n_ok": self.n_ok, "n_failed": self.n_failed}


# --------------------------------------------------------------------------- running


def _run_one(ds: Dataset, method_name: str, params: dict, run: int, seed: int, fraction: float,
             keep_model: bool) -> RunRecord:
    rec = RunRecord(run, seed, dict(params))
    try:
        pair = split(ds, fraction, seed)
        m = methods.get(method_name)
        t0 = time.perf_counter()
        model = m.fit(pair.train, dict(params), seed)
        rec.wall_time = time.perf_counter() - t0
        rec.accuracy_train = accuracy(m.predict(model, pair.train.features), pair.train.labels)
        rec.accuracy_test = accuracy(m.predict(model, pair.test.features), pair.test.labels)
        rec.complexity = float(m.complexity(model))
        if keep_model:
            rec.model = model
    except Exception as exc:  # a failed run is recorded, not fatal
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _run_task(args) -> RunRecord:
    return _run_one(*args)


def run_experiment(spec: ExperimentSpec, threads: int = 1, keep_models: bool = False,
                   out_dir: str | Path | None = None, dataset: Dataset | None = None) -> list[RunStats]:
    """Execute every grid cell of ``spec``; returns one :class:`RunStats` per cell.

    Raises ``RuntimeError`` if a cell has no successful run.
    """
    ds = dataset if dataset is not None else spec.load_dataset()
    cells = spec.cells()
    tasks = [(ds, spec.method, cell, i, spec.base_seed + i, spec.train_fraction, keep_models)
             for cell in cells for i in range(spec.n_runs)]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        records = [_run_task(t) for t in tasks]
    out = []
    for c, cell in enumerate(cells):
        stats = RunStats(cell, records[c * spec.n_runs:(c + 1) * spec.n_runs], spec.method, ds.name)
        if stats.n_ok == 0:
            first = stats.records[0].error
            raise RuntimeError(f"all {spec.n_runs} runs failed for {spec.method} {cell} on {ds.name}: {first}")
        out.append(stats)
    if out_dir is not None:
        write_results(out_dir, spec, out, dataset_name=ds.name)
    return out


def results_root(override: str | Path | None = None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get(RESULTS_ENV, "results"))


# --------------------------------------------------------------------------- Wilcoxon rank-sum


def _rank_sum_counts(doubled_ranks: np.ndarray, k: int) -> np.ndarray:
    """Number of ``k``-subsets of the pooled sample per value of the doubled rank sum."""
    total = int(doubled_ranks.sum())
    dp = np.zeros((k + 1, total + 1))
    dp[0, 0] = 1.0
    for used, r in enumerate(doubled_ranks.astype(int)):
        for j in range(min(k, used + 1), 0, -1):
            dp[j, r:] += dp[j - 1, : total + 1 - r]
    return dp[k]


def wilcoxon_rank_sum(a, b) -> tuple[float, float]:
    """Two-sided Wilcoxon rank-sum test; returns ``(W, p)`` with ``W`` the rank sum of ``a``.

    Exact null distribution (midranks for ties) when the smaller sample has at
    most ten values, otherwise a normal approximation with continuity and tie
    correction.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least 2 values")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    w = float(ranks[: len(a)].sum())
    if np.all(pooled == pooled[0]):
        return w, 1.0
    # evaluate on a canonical ordering of the pair so p(a, b) == p(b, a) bit for bit
    swap = (len(b), sorted(b.tolist())) < (len(a), sorted(a.tolist()))
    x, y = (b, a) if swap else (a, b)
    pooled = np.concatenate([x, y])
    ranks = rankdata(pooled)
    n1, n2 = len(x), len(y)
    if min(n1, n2) <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(int)
        counts = _rank_sum_counts(doubled, n1)
        s = int(doubled[:n1].sum())
        lower = counts[: s + 1].sum()
        upper = counts[s:].sum()
        p = min(1.0, 2.0 * min(lower, upper) / counts.sum())
        return w, float(p)
    n = n1 + n2
    u = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    mu = n1 * n2 / 2.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie = float(((tie_counts ** 3) - tie_counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0:
        return w, 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return w, float(min(1.0, math.erfc(z / math.sqrt(2.0))))


# --------------------------------------------------------------------------- tables


def _cell_text(mean: float, std: float) -> str:
    return f"{mean:.2f} ± {std:.2f}"


def _marks(stats: list[RunStats], which: str) -> tuple[int, list[bool]]:
    """Index of the best entry and, per entry, whether it is statistically tied with it."""
    if which == "accuracy":
        means = [s.accuracy[0] for s in stats]
        best = int(np.nanargmax(means))
        samples = [s.accuracies for s in stats]
    else:
        means = [s.complexity[0] for s in stats]
        best = int(np.nanargmin(means))
        samples = [s.complexities for s in stats]
    tied = []
    for i, smp in enumerate(samples):
        if i == best or len(smp) < 2 or len(samples[best]) < 2:
            tied.append(False)
            continue
        tied.append(wilcoxon_rank_sum(samples[best], smp)[1] >= ALPHA)
    return best, tied


def render_table(grid: dict[str, dict[str, RunStats]], fmt: str = "markdown", row_title: str = "Dataset",
                 compare: str = "row") -> str:
    """Render ``grid[row][column]`` as a two-line-per-row table.

    Each row has an accuracy line (percent) and a complexity line. The best
    entry in each compared group is bold in Markdown. Entries that are not
    significantly different from it (rank-sum p >= 0.05) are italic in
    Markdown and carry a trailing ``*`` in CSV. ``compare`` chooses whether a
    group is a table row (methods side by side) or a column (sweep settings).
    """
    if fmt not in ("markdown", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    rows = list(grid)
    cols: list[str] = []
    for r in rows:
        cols.extend(c for c in grid[r] if c not in cols)
    if not cols:
        raise ValueError("table needs at least one column")

    style: dict[tuple[str, str, str], str] = {}
    for which in ("accuracy", "complexity"):
        groups = ([[(r, c) for c in cols if c in grid[r]] for r in rows] if compare == "row"
                  else [[(r, c) for r in rows if c in grid[r]] for c in cols])
        for group in groups:
            if not group:
                continue
            best, tied = _marks([grid[r][c] for r, c in group], which)
            for i, key in enumerate(group):
                style[(*key, which)] = "best" if i == best and len(group) > 1 else ("tied" if tied[i] else "")

    def text(r, c, which):
        if c not in grid[r]:
            return ""
        s = grid[r][c]
        mean, std = s.accuracy if which == "accuracy" else s.complexity
        if which == "accuracy":
            mean, std = 100.0 * mean, 100.0 * std
        t = _cell_text(mean, std)
        mark = style.get((r, c, which), "")
        if fmt == "markdown":
            return f"**{t}**" if mark == "best" else (f"*{t}*" if mark == "tied" else t)
        return t + "*" if mark == "tied" else t

    if fmt == "markdown":
        lines = ["| " + " | ".join([row_title, "Metric", *cols]) + " |",
                 "|" + "---|" * (len(cols) + 2)]
        for r in rows:
            lines.append("| " + " | ".join([r, "accuracy (%)", *(text(r, c, "accuracy") for c in cols)]) + " |")
            lines.append("| " + " | ".join(["", "complexity", *(text(r, c, "complexity") for c in cols)]) + " |")
        return "\n".join(lines) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([row_title, "metric", *cols])
    for r in rows:
        w.writerow([r, "accuracy", *(text(r, c, "accuracy") for c in cols)])
        w.writerow([r, "complexity", *(text(r, c, "complexity") for c in cols)])
    return buf.getvalue()


# --------------------------------------------------------------------------- persistence


def _params_label(params: dict, keys) -> str:
    return ", ".join(f"{k}={params[k]}" for k in keys) if keys else "default"


def write_runs_csv(path: Path, cells: list[RunStats]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "params", "run", "seed", "accuracy_train", "accuracy_test",
                    "complexity", "wall_time", "error"])
        for stats in cells:
            for r in stats.records:
                w.writerow([stats.dataset, stats.method, json.dumps(r.params, sort_keys=True), r.run, r.seed,
                            repr(r.accuracy_train), repr(r.accuracy_test), repr(r.complexity),
                            repr(r.wall_time), r.error or ""])


def read_runs_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("accuracy_train", "accuracy_test", "complexity", "wall_time"):
            r[k] = float(r[k])
        r["run"], r["seed"] = int(r["run"]), int(r["seed"])
        r["params"] = json.loads(r["params"])
    return rows


def write_results(out_dir: str | Path, spec: ExperimentSpec | list[ExperimentSpec], cells: list[RunStats],
                  dataset_name: str | None = None, grid: dict | None = None, compare: str = "column") -> Path:
    """Write runs.csv, summary.md, summary.csv and spec.json into ``out_dir``.

    ``grid`` overrides the default table layout (one row per grid cell).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = spec if isinstance(spec, list) else [spec]
    if grid is None:
        s0 = specs[0]
        name = dataset_name or s0.dataset
        keys = list(s0.grid)
        grid = {_params_label(st.params, keys): {name: st} for st in cells}
    else:
        cells = [st for r in grid for st in grid[r].values()]
    write_runs_csv(out / "runs.csv", cells)
    (out / "summary.md").write_text(render_table(grid, "markdown", compare=compare), encoding="utf-8")
    (out / "summary.csv").write_text(render_table(grid, "csv", compare=compare), encoding="utf-8")
    echo = [s.to_dict() for s in specs]
    (out / "spec.json").write_text(json.dumps(echo if len(echo) > 1 else echo[0], indent=2, default=str),
                                   encoding="utf-8")
    return out


# --------------------------------------------------------------------------- multi-experiment drivers


def run_bench(method_names, datasets, n_runs: int = 50, base_seed: int = 0, threads: int = 1,
              params: dict[str, dict] | None = None, dataset_options: dict | None = None,
              keep_models: bool = False) -> tuple[dict[str, dict[str, RunStats]], list[ExperimentSpec]]:
    """Methods x datasets; returns ``grid[dataset][method]`` and the specs used."""
    params = params or {}
    grid: dict[str, dict[str, RunStats]] = {}
    specs = []
    for dname in datasets:
        first = ExperimentSpec(dname, method_names[0], n_runs=n_runs, base_seed=base_seed,
                               dataset_options=dict(dataset_options or {}))
        ds = first.load_dataset()
        row = {}
        for m in method_names:
            spec = ExperimentSpec(dname, m, params=dict(params.get(m, {})), n_runs=n_runs, base_seed=base_seed,
                                  dataset_options=dict(dataset_options or {}))
            specs.append(spec)
            row[m] = run_experiment(spec, threads=threads, keep_models=keep_models, dataset=ds)[0]
        grid[ds.name] = row
    return grid, specs


def run_sweep(method: str, param: str, values, datasets, n_runs: int = 50, base_seed: int = 0,
              threads: int = 1, params: dict | None = None, dataset_options: dict | None = None,
              keep_models: bool = False) -> tuple[dict[str, dict[str, RunStats]], list[ExperimentSpec]]:
    """One parameter swept over several datasets; returns ``grid[f"{param}={v}"][dataset]``."""
    labels = [f"{param}={v:g}" if isinstance(v, (int, float)) else f"{param}={v}" for v in values]
    grid: dict[str, dict[str, RunStats]] = {lab: {} for lab in labels}
    specs = []
    for dname in datasets:
        spec = ExperimentSpec(dname, method, params=dict(params or {}), grid={param: list(values)},
                              n_runs=n_runs, base_seed=base_seed, dataset_options=dict(dataset_options or {}))
        specs.append(spec)
        ds = spec.load_dataset()
        for lab, stats in zip(labels, run_experiment(spec, threads=threads, keep_models=keep_models, dataset=ds)):
            grid[lab][ds.name] = stats
    return grid, specs
