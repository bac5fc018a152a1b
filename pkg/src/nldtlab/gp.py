"""Genetic-programming classifiers over ``{+, -, *, /}``.

A program is stored in prefix order as a tuple of tokens: an operator
string, an ``int`` feature index, or a ``float`` constant. A row is assigned
class 1 when the program output is positive, i.e. when ``sigmoid(f) > 0.5``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .core import Dataset, rng_stream

OPS = ("+", "-", "*", "/")
PROTECT_EPS = 1e-6
CLIP_EPS = 1e-12


def _is_op(tok) -> bool:
    return isinstance(tok, str)


def _is_feature(tok) -> bool:
    return isinstance(tok, (int, np.integer)) and not isinstance(tok, bool)


def subtree_end(program, start: int) -> int:
    """Index one past the subtree rooted at ``start``."""
    need = 1
    end = start
    while need:
        if end >= len(program):
            raise ValueError("malformed prefix program: operator is missing operands")
        need += 1 if _is_op(program[end]) else -1
        end += 1
    return end


@dataclass(frozen=True)
class GpTree:
    program: tuple

    def __post_init__(self):
        prog = tuple(t if _is_op(t) else int(t) if _is_feature(t) else float(t) for t in self.program)
        if not prog or subtree_end(prog, 0) != len(prog):
            raise ValueError("malformed prefix program")
        for t in prog:
            if _is_op(t) and t not in OPS:
                raise ValueError(f"unknown operator {t!r}")
        object.__setattr__(self, "program", prog)

    @property
    def size(self) -> int:
        return len(self.program)

    @property
    def internal_count(self) -> int:
        return sum(1 for t in self.program if _is_op(t))

    @property
    def depth(self) -> int:
        return _depth(self.program)

    def features_used(self) -> set[int]:
        return {t for t in self.program if _is_feature(t)}

    def execute(self, X: np.ndarray) -> np.ndarray:
        """Vectorised evaluation over the rows of ``X``."""
        return _exec(self.program, np.atleast_2d(np.asarray(X, float))).copy()

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.execute(X) > 0).astype(np.int64)

    def to_dict(self) -> dict:
        return {"method": "gp", "expression": render_expression(self),
                "program": [t if not _is_feature(t) else {"x": t} for t in self.program]}

    @classmethod
    def from_dict(cls, d: dict) -> "GpTree":
        return cls(tuple(t["x"] if isinstance(t, dict) else t for t in d["program"]))


def _apply(op: str, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.abs(b) < PROTECT_EPS
        return np.where(small, 1.0, a / np.where(small, 1.0, b))


def eval_tree(tree: GpTree, x) -> float:
    """Evaluate one feature vector; division by |d| < 1e-6 yields 1.0."""
    x = np.asarray(x, float)
    return float(tree.execute(x[None, :])[0])


def gp_loss(tree: GpTree, ds: Dataset, clip_eps: float = CLIP_EPS) -> float:
    """Mean binary cross-entropy of ``sigmoid(f(x))`` against the labels."""
    return _loss(tree.execute(ds.features), ds.labels, clip_eps)


def _loss(f: np.ndarray, y: np.ndarray, clip_eps: float = CLIP_EPS) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        p = np.clip(expit(f), clip_eps, 1.0 - clip_eps)
    p = np.where(np.isfinite(p), p, 0.5)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1.0 - p)))


def gp_fitness(tree: GpTree, ds: Dataset, parsimony: float) -> float:
    """Cross-entropy plus ``parsimony`` times total node count (minimised)."""
    if parsimony < 0:
        raise ValueError("parsimony coefficient must be >= 0")
    return gp_loss(tree, ds) + parsimony * tree.size


def gp_complexity(tree: GpTree) -> int:
    """Number of operator (internal) nodes."""
    return tree.internal_count


# --------------------------------------------------------------------------- text form


def _fmt_const(c: float) -> str:
    if c.is_integer() and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


def render_expression(tree: GpTree, names=None) -> str:
    """Fully parenthesised infix; features print 1-based (``x1`` is column 0)."""
    prog = tree.program
    pos = 0

    def walk() -> str:
        nonlocal pos
        tok = prog[pos]
        pos += 1
        if _is_op(tok):
            a = walk()
            b = walk()
            return f"({a} {tok} {b})"
        if _is_feature(tok):
            return names[tok] if names else f"x{tok + 1}"
        return _fmt_const(tok)

    return walk()


_NUM = re.compile(r"-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def parse_expression(text: str) -> GpTree:
    """Inverse of :func:`render_expression` for default feature names."""
    pos = 0
    out: list = []

    def skip():
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def operand():
        nonlocal pos
        skip()
        if pos >= len(text):
            raise ValueError("unexpected end of expression")
        ch = text[pos]
        if ch == "(":
            pos += 1
            slot = len(out)
            out.append(None)
            operand()
            skip()
            op = text[pos]
            if op not in OPS:
                raise ValueError(f"expected operator at {pos}, got {op!r}")
            pos += 1
            operand()
            skip()
            if pos >= len(text) or text[pos] != ")":
                raise ValueError(f"expected ')' at {pos}")
            pos += 1
            out[slot] = op
        elif ch == "x":
            m = re.compile(r"x(\d+)").match(text, pos)
            if not m:
                raise ValueError(f"bad feature token at {pos}")
            out.append(int(m.group(1)) - 1)
            pos = m.end()
        else:
            m = _NUM.match(text, pos)
            if not m:
                raise ValueError(f"bad token at {pos}: {text[pos:pos + 10]!r}")
            out.append(float(m.group()))
            pos = m.end()

    operand()
    skip()
    if pos != len(text):
        raise ValueError(f"trailing text at {pos}")
    return GpTree(tuple(out))


# --------------------------------------------------------------------------- evolution


@dataclass
class GpConfig:
    population_size: int = 500
    generations: int = 50
    parsimony: float = 0.001
    p_crossover: float = 0.9
    p_subtree_mutation: float = 0.05
    p_point_mutation: float = 0.05
    p_point_replace: float = 0.05
    tournament_size: int = 7
    const_range: tuple[float, float] = (-1.0, 1.0)
    const_jitter: float = 0.1
    init_depth: tuple[int, int] = (2, 6)
    max_depth: int = 12
    seed: int = 0

    def __post_init__(self):
        probs = (self.p_crossover, self.p_subtree_mutation, self.p_point_mutation)
        if any(p < 0 or p > 1 for p in probs) or sum(probs) > 1 + 1e-12:
            raise ValueError("variation probabilities must lie in [0, 1] and sum to at most 1")
        if self.parsimony < 0:
            raise ValueError("parsimony must be >= 0")
        if self.population_size < 2 or self.tournament_size < 1:
            raise ValueError("population_size >= 2 and tournament_size >= 1 required")


@dataclass
class GpResult:
    best: GpTree
    fitness: float
    loss: float
    history: list[dict] = field(default_factory=list)

    def report(self) -> dict:
        return {
            "expression": render_expression(self.best),
            "fitness": self.fitness,
            "loss": self.loss,
            "size": self.best.size,
            "internal_count": self.best.internal_count,
        }


class _Evolver:
    def __init__(self, X, y, cfg: GpConfig, rng: np.random.Generator):
        self.X, self.y, self.cfg, self.rng = X, y, cfg, rng
        self.n_features = X.shape[1]
        self.cache: dict[tuple, tuple[float, float]] = {}

    def score(self, prog: tuple) -> tuple[float, float]:
        hit = self.cache.get(prog)
        if hit is None:
            loss = _loss(_exec(prog, self.X), self.y)
            hit = (loss + self.cfg.parsimony * len(prog), loss)
            self.cache[prog] = hit
        return hit

    def terminal(self):
        if self.rng.random() < self.n_features / (self.n_features + 1):
            return int(self.rng.integers(self.n_features))
        lo, hi = self.cfg.const_range
        return float(self.rng.uniform(lo, hi))

    def random_program(self, depth: int, full: bool) -> list:
        out: list = []
        n_term = self.n_features + 1
        stack = [depth]
        while stack:
            d = stack.pop()
            pick_op = d > 0 and (full or self.rng.random() < len(OPS) / (len(OPS) + n_term))
            if pick_op:
                out.append(OPS[self.rng.integers(len(OPS))])
                stack.extend((d - 1, d - 1))
            else:
                out.append(self.terminal())
        return out

    def initial(self) -> list[tuple]:
        lo, hi = self.cfg.init_depth
        return [tuple(self.random_program(int(self.rng.integers(lo, hi + 1)), bool(self.rng.random() < 0.5)))
                for _ in range(self.cfg.population_size)]

    def pick_subtree(self, prog) -> tuple[int, int]:
        # bias toward operator nodes, 90/10
        probs = np.array([0.9 if _is_op(t) else 0.1 for t in prog])
        start = int(np.searchsorted(np.cumsum(probs), self.rng.uniform(0, probs.sum()), side="right"))
        start = min(start, len(prog) - 1)
        return start, subtree_end(prog, start)

    def crossover(self, parent, donor) -> tuple:
        s, e = self.pick_subtree(parent)
        ds, de = self.pick_subtree(donor)
        return parent[:s] + donor[ds:de] + parent[e:]

    def subtree_mutation(self, parent) -> tuple:
        lo, hi = self.cfg.init_depth
        donor = tuple(self.random_program(int(self.rng.integers(lo, hi + 1)), bool(self.rng.random() < 0.5)))
        return self.crossover(parent, donor)

    def point_mutation(self, parent) -> tuple:
        prog = list(parent)
        hits = np.flatnonzero(self.rng.random(len(prog)) < self.cfg.p_point_replace)
        for i in hits:
            tok = prog[i]
            if _is_op(tok):
                prog[i] = OPS[self.rng.integers(len(OPS))]
            elif _is_feature(tok) or self.rng.random() < 0.5:
                prog[i] = self.terminal()
            else:
                prog[i] = float(tok + self.rng.normal(0.0, self.cfg.const_jitter))
        return tuple(prog)

    def tournament(self, pop, fit) -> tuple:
        idx = self.rng.integers(len(pop), size=self.cfg.tournament_size)
        return pop[idx[np.argmin(fit[idx])]]


def _exec(prog: tuple, X: np.ndarray) -> np.ndarray:
    stack: list = []
    for tok in reversed(prog):
        if _is_op(tok):
            a = stack.pop()
            b = stack.pop()
            stack.append(_apply(tok, a, b))
        elif _is_feature(tok):
            stack.append(X[:, tok])
        else:
            stack.append(tok)
    out = stack.pop()
    return np.broadcast_to(np.asarray(out, float), (X.shape[0],))


def _depth(prog) -> int:
    stack = [0]
    best = 0
    for t in prog:
        d = stack.pop()
        best = max(best, d)
        if _is_op(t):
            stack.extend((d + 1, d + 1))
    return best


def evolve(train: Dataset, config: GpConfig | None = None, initial_population=None) -> GpResult:
    """Tournament-selection GP keeping the best tree seen in any generation."""
    cfg = config or GpConfig()
    rng = rng_stream(cfg.seed, "gp")
    ev = _Evolver(np.asarray(train.features, float), np.asarray(train.labels), cfg, rng)
    if initial_population is not None:
        pop = [t.program if isinstance(t, GpTree) else tuple(t) for t in initial_population]
    else:
        pop = ev.initial()
    scores = [ev.score(p) for p in pop]
    fit = np.array([s[0] for s in scores])
    b = int(np.argmin(fit))
    best, best_fit, best_loss = pop[b], fit[b], scores[b][1]
    history = [_stats(0, pop, fit, best_fit)]
    p_x = cfg.p_crossover
    p_sub = p_x + cfg.p_subtree_mutation
    p_pt = p_sub + cfg.p_point_mutation
    for gen in range(1, cfg.generations + 1):
        new = [pop[int(np.argmin(fit))]]
        while len(new) < len(pop):
            parent = ev.tournament(pop, fit)
            r = rng.random()
            if r < p_x:
                child = ev.crossover(parent, ev.tournament(pop, fit))
            elif r < p_sub:
                child = ev.subtree_mutation(parent)
            elif r < p_pt:
                child = ev.point_mutation(parent)
            else:
                child = parent
            if child is not parent and _depth(child) > cfg.max_depth:
                child = parent
            new.append(child)
        pop = new
        scores = [ev.score(p) for p in pop]
        fit = np.array([s[0] for s in scores])
        b = int(np.argmin(fit))
        if fit[b] < best_fit:
            best, best_fit, best_loss = pop[b], fit[b], scores[b][1]
        history.append(_stats(gen, pop, fit, best_fit))
    return GpResult(GpTree(best), float(best_fit), float(best_loss), history)


def _stats(gen, pop, fit, best_fit) -> dict:
    sizes = np.array([len(p) for p in pop])
    return {"generation": gen, "best_fitness": float(best_fit), "gen_best_fitness": float(fit.min()),
            "mean_fitness": float(np.mean(fit)), "mean_size": float(sizes.mean())}


def write_history_csv(result: GpResult, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(result.history[0]))
        w.writeheader()
        w.writerows(result.history)


def predict_gp(tree: GpTree, X: np.ndarray) -> np.ndarray:
    return tree.predict(X)


def reference_tree() -> GpTree:
    """``(x5 - x7) + 3 * x2`` with 0-based feature indices."""
    return GpTree(("+", "-", 4, 6, "*", 3.0, 1))

