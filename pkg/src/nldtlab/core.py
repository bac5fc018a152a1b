"""Shared data model: datasets, CSV I/O, splitting, feature scaling, metrics."""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

METHODS = ("cart", "svm", "gp", "nldt")


class DatasetError(ValueError):
    """Raised when input data violates the dataset invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """N x d feature matrix with binary {0,1} labels.

    Arrays are copied and made read-only on construction.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    name: str = "dataset"
    metadata: dict = field(default_factory=dict)
    degenerate: bool = False

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 2 or d < 1:
            raise DatasetError(f"need N >= 2 and d >= 1, got N={n}, d={d}")
        if y.shape != (n,):
            raise DatasetError(f"labels shape {y.shape} does not match N={n}")
        bad = np.argwhere(~np.isfinite(X))
        if len(bad):
            r, c = bad[0]
            raise DatasetError(f"non-finite feature value at row {r}, column {c}")
        if not np.all((y == 0) | (y == 1)):
            raise DatasetError("labels must be exactly 0 or 1")
        y = y.astype(np.int64)
        if not self.degenerate and len(np.unique(y)) < 2:
            raise DatasetError("both classes must be present (pass degenerate=True to allow one)")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(d))
        if len(names) != d:
            raise DatasetError(f"{len(names)} feature names for {d} columns")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        ones = int(self.labels.sum())
        return self.n - ones, ones

    def subset(self, rows: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(
            self.features[rows],
            self.labels[rows],
            self.feature_names,
            name or self.name,
            dict(self.metadata),
            degenerate=True,
        )


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    train_fraction: float
    train_rows: np.ndarray
    test_rows: np.ndarray


@dataclass(frozen=True)
class FeatureTransform:
    """Per-feature affine map ``z = scale * x + offset``."""

    scale: np.ndarray
    offset: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, low: float = 1.0, high: float = 2.0) -> "FeatureTransform":
        """Min-max map each column of ``X`` onto ``[low, high]``.

        Constant columns, and columns whose span is too small for a finite
        scale (subnormal differences), map to the interval midpoint.
        """
        X = np.asarray(X, dtype=float)
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = hi - lo
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            scale = (high - low) / span
            offset = low - scale * lo
        const = ~(span > 0) | ~np.isfinite(scale) | ~np.isfinite(offset)
        scale = np.where(const, 0.0, scale)
        offset = np.where(const, 0.5 * (low + high), offset)
        return cls(_frozen(scale), _frozen(offset))

    def apply(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) * self.scale + self.offset

    def invert(self, Z: np.ndarray) -> np.ndarray:
        safe = np.where(self.scale == 0, 1.0, self.scale)
        return np.where(self.scale == 0, 0.0, (np.asarray(Z, dtype=float) - self.offset) / safe)

    def to_dict(self) -> dict:
        return {"scale": self.scale.tolist(), "offset": self.offset.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureTransform":
        return cls(_frozen(np.asarray(d["scale"], float)), _frozen(np.asarray(d["offset"], float)))


@dataclass
class EvalReport:
    method_tag: str
    accuracy_train: float
    accuracy_test: float
    complexity: float
    fit_wall_time: float

    def __post_init__(self):
        if self.method_tag not in METHODS:
            raise ValueError(f"unknown method tag {self.method_tag!r}")


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named stream under one 64-bit run seed."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(zlib.crc32(name.encode()),))
    return np.random.default_rng(ss)


# --------------------------------------------------------------------------- I/O


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def load_csv(path: str | Path, label_column: str = "label", name: str | None = None) -> Dataset:
    """Read a headed CSV; the two raw label values map to 0/1 by sorted order."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0]:
        raise DatasetError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise DatasetError(f"{path}: no data rows")
    if label_column not in header:
        raise DatasetError(f"{path}: label column {label_column!r} not in header")
    li = header.index(label_column)
    fcols = [j for j in range(len(header)) if j != li]
    raw_labels = [r[li].strip() for r in body]
    values = sorted(set(raw_labels), key=_label_sort_key)
    if len(values) > 2:
        raise DatasetError(f"{path}: label column has {len(values)} distinct values, expected 2")
    mapping = {v: i for i, v in enumerate(values)}
    X = np.empty((len(body), len(fcols)))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        for c, j in enumerate(fcols):
            try:
                v = float(row[j])
            except ValueError:
                raise DatasetError(f"non-numeric feature value at row {r}, column {c}: {row[j]!r}") from None
            if not math.isfinite(v):
                raise DatasetError(f"non-finite feature value at row {r}, column {c}")
            X[r, c] = v
    y = np.array([mapping[v] for v in raw_labels])
    meta = {"label_mapping": mapping, "source": str(path)}
    side = sidecar_path(path)
    if side.exists():
        extra = json.loads(side.read_text(encoding="utf-8"))
        name = name or extra.get("name")
        meta.update({k: v for k, v in extra.items() if k not in ("name", "label_mapping")})
    return Dataset(X, y, tuple(header[j] for j in fcols), name or path.stem, meta, degenerate=len(values) < 2)


def _label_sort_key(v: str):
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


def save_csv(ds: Dataset, path: str | Path, label_column: str = "label", transform: FeatureTransform | None = None) -> Path:
    """Write ``ds`` as CSV plus a JSON sidecar holding name, label mapping and transform."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.feature_names, label_column])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])
    meta = {k: v for k, v in ds.metadata.items() if k not in ("label_mapping", "source")}
    side = {
        "name": ds.name,
        "label_mapping": ds.metadata.get("label_mapping", {"0": 0, "1": 1}),
        "transform": transform.to_dict() if transform is not None else None,
        **meta,
    }
    sidecar_path(path).write_text(json.dumps(side, indent=2, default=_json_default), encoding="utf-8")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --------------------------------------------------------------------------- splitting


def split(ds: Dataset, fraction: float = 0.7, seed: int = 0, stratified: bool = True) -> SplitPair:
    """Random train/test partition; stratified by class unless told otherwise."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    rng = rng_stream(seed, "split")
    if stratified:
        train_parts, test_parts = [], []
        for cls in (0, 1):
            idx = np.flatnonzero(ds.labels == cls)
            if len(idx) == 0:
                continue
            k = int(round(fraction * len(idx)))
            if k < 1 or k > len(idx) - 1:
                raise ValueError(f"class {cls} has {len(idx)} rows, too few to stratify at fraction {fraction}")
            idx = rng.permutation(idx)
            train_parts.append(idx[:k])
            test_parts.append(idx[k:])
        tr, te = np.concatenate(train_parts), np.concatenate(test_parts)
    else:
        perm = rng.permutation(ds.n)
        k = int(round(fraction * ds.n))
        k = min(max(k, 1), ds.n - 1)
        tr, te = perm[:k], perm[k:]
    tr, te = np.sort(tr), np.sort(te)
    return SplitPair(ds.subset(tr), ds.subset(te), seed, fraction, _frozen(tr), _frozen(te))


# --------------------------------------------------------------------------- metrics


def evaluate(predict_fn: Callable[[np.ndarray], int], ds: Dataset) -> float:
    """Fraction of rows where ``predict_fn(row)`` equals the label."""
    correct = sum(int(predict_fn(x)) == int(y) for x, y in zip(ds.features, ds.labels))
    return correct / ds.n


def accuracy(pred: Sequence[int] | np.ndarray, labels: np.ndarray) -> float:
    """Vectorised counterpart of :func:`evaluate` for batch predictions."""
    pred = np.asarray(pred)
    if pred.shape != np.shape(labels):
        raise ValueError(f"{pred.shape[0] if pred.ndim else 0} predictions for {len(labels)} labels")
    return float(np.count_nonzero(pred == labels)) / len(labels)
