"""Axis-parallel decision trees grown greedily on Gini impurity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset

TIE_TOL = 1e-12


def gini(class_counts) -> float:
    """Two-class Gini impurity ``1 - sum(p_i^2)``."""
    n0, n1 = class_counts
    n = n0 + n1
    if n < 1:
        raise ValueError("gini of an empty node")
    p0, p1 = n0 / n, n1 / n
    return 1.0 - (p0 * p0 + p1 * p1)


def split_quality(left_counts, right_counts) -> float:
    """Size-weighted child impurity of a binary split (lower is better)."""
    nl, nr = sum(left_counts), sum(right_counts)
    if nl < 1 or nr < 1:
        raise ValueError("split_quality with an empty child")
    n = nl + nr
    return nl / n * gini(left_counts) + nr / n * gini(right_counts)


def weighted_gini_curve(n_left, ones_left, n_total, ones_total):
    """Vectorised split quality for arrays of candidate left-child counts.

    Callers must ensure ``0 < n_left < n_total``.
    """
    n_left = np.asarray(n_left, dtype=float)
    ones_left = np.asarray(ones_left, dtype=float)
    n_right = n_total - n_left
    ones_right = ones_total - ones_left
    pl = ones_left / n_left
    pr = ones_right / n_right
    gl = 2.0 * pl * (1.0 - pl)
    gr = 2.0 * pr * (1.0 - pr)
    return (n_left * gl + n_right * gr) / n_total


@dataclass
class CartParams:
    max_depth: int = 20
    min_leaf: int = 1
    min_impurity_decrease: float = 1e-7


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    quality: float


def best_split(X: np.ndarray, y: np.ndarray, min_leaf: int = 1, min_impurity_decrease: float = 0.0) -> Split | None:
    """Exhaustive scan over features and midpoints of consecutive distinct values.

    Ties go to the lower feature index, then the lower threshold. Returns None
    when the node is pure or no split lowers impurity by ``min_impurity_decrease``.
    """
    n = len(y)
    ones = int(y.sum())
    if n < 2 * min_leaf or ones == 0 or ones == n:
        return None
    parent = gini((n - ones, ones))
    best: Split | None = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cum = np.cumsum(y[order])
        k = np.arange(1, n)  # rows in the left child
        ok = (xs[1:] > xs[:-1]) & (k >= min_leaf) & (n - k >= min_leaf)
        if not ok.any():
            continue
        k = k[ok]
        s = weighted_gini_curve(k, cum[k - 1], n, ones)
        i = int(np.argmin(s))  # first minimum is the lowest threshold
        if best is None or s[i] < best.quality - TIE_TOL:
            best = Split(j, 0.5 * (xs[k[i] - 1] + xs[k[i]]), float(s[i]))
    if best is None or parent - best.quality < min_impurity_decrease:
        return None
    return best


@dataclass
class AxisTree:
    """Array-backed tree; ``feature[i] == -1`` marks a leaf.

    Row r goes left at node i iff ``x[feature[i]] <= threshold[i]``.
    """

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    label: list[int] = field(default_factory=list)
    counts: list[tuple[int, int]] = field(default_factory=list)
    depth: list[int] = field(default_factory=list)
    params: CartParams = field(default_factory=CartParams)

    def _add(self, counts, depth) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        n0, n1 = counts
        self.label.append(1 if n1 > n0 else 0)
        self.counts.append((int(n0), int(n1)))
        self.depth.append(depth)
        return len(self.feature) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_index(self, x: np.ndarray) -> int:
        i = 0
        while self.feature[i] >= 0:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return i

    def predict_one(self, x: np.ndarray) -> int:
        return self.label[self.leaf_index(x)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        active = feat[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, feat[nd]] <= thr[nd]
            node[idx] = np.where(go_left, left[nd], right[nd])
            active = feat[node] >= 0
        return np.asarray(self.label)[node]

    def max_depth(self) -> int:
        return max(d for d, f in zip(self.depth, self.feature) if f < 0)

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append({"id": i, "leaf": True, "label": self.label[i], "counts": list(self.counts[i])})
            else:
                nodes.append({
                    "id": i, "leaf": False, "feature": self.feature[i], "threshold": self.threshold[i],
                    "left": self.left[i], "right": self.right[i], "counts": list(self.counts[i]),
                })
        return {"method": "cart", "params": vars(self.params), "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "AxisTree":
        t = cls(params=CartParams(**d.get("params", {})))
        depth = {0: 0}
        for node in d["nodes"]:
            i = t._add(node["counts"], depth.get(node["id"], 0))
            t.label[i] = node["label"] if node["leaf"] else t.label[i]
            if not node["leaf"]:
                t.feature[i], t.threshold[i] = node["feature"], node["threshold"]
                t.left[i], t.right[i] = node["left"], node["right"]
                depth[node["left"]] = depth[node["right"]] = depth[node["id"]] + 1
        return t

    def render(self, feature_names=None) -> str:
        """Indented ``x_i <= tau`` rule dump."""
        names = feature_names or [f"x{j + 1}" for j in range(max(self.feature) + 1)]
        lines: list[str] = []

        def walk(i, indent):
            pad = "  " * indent
            if self.feature[i] < 0:
                lines.append(f"{pad}class {self.label[i]}  {self.counts[i]}")
                return
            lines.append(f"{pad}if {names[self.feature[i]]} <= {self.threshold[i]:.6g}:")
            walk(self.left[i], indent + 1)
            lines.append(f"{pad}else:")
            walk(self.right[i], indent + 1)

        walk(0, 0)
        return "\n".join(lines)


def fit_cart(train: Dataset, params: CartParams | None = None) -> AxisTree:
    """Grow a tree until purity, depth, ``min_leaf`` or no improving split stops it."""
    params = params or CartParams()
    X, y = np.asarray(train.features), np.asarray(train.labels)
    tree = AxisTree(params=params)

    def grow(rows: np.ndarray, depth: int) -> int:
        ones = int(y[rows].sum())
        i = tree._add((len(rows) - ones, ones), depth)
        if depth >= params.max_depth:
            return i
        s = best_split(X[rows], y[rows], params.min_leaf, params.min_impurity_decrease)
        if s is None:
            return i
        go_left = X[rows, s.feature] <= s.threshold
        tree.feature[i], tree.threshold[i] = s.feature, s.threshold
        tree.left[i] = grow(rows[go_left], depth + 1)
        tree.right[i] = grow(rows[~go_left], depth + 1)
        return i

    grow(np.arange(train.n), 0)
    return tree


def cart_complexity(tree: AxisTree) -> int:
    """Total node count, internal plus leaves."""
    return tree.n_nodes
