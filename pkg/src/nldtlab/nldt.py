"""Nonlinear decision trees with power-law split rules found by bilevel search.

A split rule on normalised features ``z`` (each in ``[1, 2]`` on the training
data) is

    m = 0:  f(z) = sum_i w_i P_i(z) + theta_1
    m = 1:  f(z) = |sum_i w_i P_i(z) + theta_1| - theta_2

with power laws ``P_i(z) = prod_j z_j ** b_ij``. Rows with ``f(z) <= 0`` go
to the left child.

The upper level evolves the integer exponent matrix ``B`` and the modulus
flag ``m`` to minimise the number of nonzero exponents, subject to the
split impurity found by the lower level staying below ``tau_i``. The lower
level evolves ``(w, theta)`` in ``[-1, 1]`` to minimise the weighted Gini
impurity of the split. Because ``f`` only matters through its sign, each
lower-level candidate also has its cut position placed exactly: the
optimal threshold along ``sum_i w_i P_i`` (or along ``|... + theta_1|`` for
``m = 1``) is found by a sorted sweep, then all real parameters are rescaled
jointly back into ``[-1, 1]`` and written back into the genome.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .cart import gini, weighted_gini_curve
from .core import Dataset, FeatureTransform, rng_stream

log = logging.getLogger(__name__)

EXPONENTS = (-3, -2, -1, 0, 1, 2, 3)
WORST = 1.0
# prediction-time clamp for normalised values that fall outside the training range
PREDICT_DOMAIN = (0.5, 2.5)


class RuleDomainError(ArithmeticError):
    """A split rule produced a non-finite value."""


@dataclass
class NldtParams:
    tau_i: float = 0.05
    p: int = 3
    exponents: tuple[int, ...] = EXPONENTS
    max_depth: int = 5
    min_node_size: int = 10
    leaf_purity_tol: float = 0.01
    upper_pop: int = 40
    upper_gens: int = 30
    upper_stall: int = 5
    lower_pop: int = 40
    lower_gens: int = 50
    lower_stall: int = 10
    sbx_eta: float = 15.0
    mutation_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.exponents = tuple(int(e) for e in self.exponents)
        if 0 not in self.exponents:
            raise ValueError("the exponent set must contain 0")
        if self.p < 1:
            raise ValueError("p must be >= 1")


@dataclass
class PowerLawRule:
    B: np.ndarray  # p x d ints
    m: int
    w: np.ndarray  # p
    thetas: np.ndarray  # m + 1

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=np.int64)
        self.w = np.asarray(self.w, dtype=float)
        self.thetas = np.asarray(self.thetas, dtype=float)
        if self.m not in (0, 1):
            raise ValueError("modulus flag must be 0 or 1")
        if self.B.ndim != 2 or self.w.shape != (self.B.shape[0],):
            raise ValueError("B must be p x d with one weight per row")
        if self.thetas.shape != (self.m + 1,):
            raise ValueError(f"m={self.m} needs {self.m + 1} biases")

    @property
    def p(self) -> int:
        return self.B.shape[0]

    def features(self) -> list[int]:
        return sorted(set(np.nonzero(self.B)[1].tolist()))

    def evaluate(self, Z: np.ndarray) -> np.ndarray:
        s = power_terms(self.B, Z) @ self.w + self.thetas[0]
        if self.m == 1:
            s = np.abs(s) - self.thetas[1]
        if not np.all(np.isfinite(s)):
            raise RuleDomainError("split rule is non-finite on the given inputs")
        return s

    def to_dict(self) -> dict:
        return {"B": self.B.tolist(), "m": int(self.m), "w": self.w.tolist(), "thetas": self.thetas.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PowerLawRule":
        return cls(np.array(d["B"]), int(d["m"]), np.array(d["w"]), np.array(d["thetas"]))

    def render(self, names=None, precision: int = 4) -> str:
        """Algebraic form, e.g. ``|0.52 x2^2 x3^-1 - 0.31 x7 + 0.12| - 0.05``."""
        names = names or [f"x{j + 1}" for j in range(self.B.shape[1])]
        terms = []
        for i in range(self.p):
            if self.w[i] == 0:
                continue
            factors = []
            for j in np.flatnonzero(self.B[i]):
                e = self.B[i, j]
                factors.append(names[j] if e == 1 else f"{names[j]}^{e}")
            body = " ".join(factors) if factors else "1"
            terms.append((self.w[i], body))
        text = ""
        for k, (c, body) in enumerate(terms):
            mag = f"{abs(c):.{precision}g}"
            sign = "-" if c < 0 else "+"
            if k == 0:
                text = f"{'-' if c < 0 else ''}{mag} {body}"
            else:
                text += f" {sign} {mag} {body}"
        t1 = self.thetas[0]
        text = (text or "0") + f" {'-' if t1 < 0 else '+'} {abs(t1):.{precision}g}"
        if self.m == 1:
            t2 = self.thetas[1]
            text = f"|{text}| {'-' if t2 >= 0 else '+'} {abs(t2):.{precision}g}"
        return text


def power_terms(B: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """N x p matrix of ``prod_j z_j ** b_ij`` (integer powers, no logs)."""
    Z = np.atleast_2d(np.asarray(Z, float))
    P = np.ones((Z.shape[0], B.shape[0]))
    for i, j in zip(*np.nonzero(B)):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            P[:, i] *= Z[:, j] ** float(B[i, j])
    return P


def eval_rule(rule: PowerLawRule, x_normalized) -> float:
    return float(rule.evaluate(np.asarray(x_normalized, float)[None, :])[0])


def rule_complexity(rule: PowerLawRule) -> int:
    """Number of nonzero exponents."""
    return int(np.count_nonzero(rule.B))


def canonical_rule(rule: PowerLawRule) -> PowerLawRule:
    """Merge identical power-law rows, fold all-zero rows into ``theta_1``.

    The result has the same sign as the input everywhere, keeps ``p`` rows
    (padding with zero rows of weight 0) and is rescaled into ``[-1, 1]``.
    """
    p, d = rule.B.shape
    merged: dict[tuple, float] = {}
    bias = float(rule.thetas[0])
    for i in range(p):
        row = tuple(rule.B[i].tolist())
        if not any(row):
            bias += rule.w[i]
        else:
            merged[row] = merged.get(row, 0.0) + float(rule.w[i])
    rows = [(r, c) for r, c in merged.items() if c != 0.0]
    B = np.zeros((p, d), dtype=np.int64)
    w = np.zeros(p)
    for k, (r, c) in enumerate(rows):
        B[k] = r
        w[k] = c
    thetas = np.array([bias] + ([float(rule.thetas[1])] if rule.m == 1 else []))
    scale = max(1.0, float(np.abs(w).max(initial=0.0)), float(np.abs(thetas).max()))
    return PowerLawRule(B, rule.m, w / scale, thetas / scale)


def split_impurity(rule: PowerLawRule, Z: np.ndarray, y: np.ndarray) -> float:
    """Weighted child Gini of the ``f <= 0`` split; 1.0 if a child is empty."""
    left = rule.evaluate(Z) <= 0
    nl = int(left.sum())
    n = len(y)
    if nl == 0 or nl == n:
        return WORST
    ones_l = int(y[left].sum())
    return float(weighted_gini_curve(nl, ones_l, n, int(y.sum())))


# --------------------------------------------------------------------------- lower level


def best_cuts(V: np.ndarray, y: np.ndarray):
    """Row-wise best ``v <= t`` cut of each row of ``V`` by weighted Gini.

    Returns ``(impurity, threshold)`` arrays; rows with no valid cut get
    ``WORST`` and ``threshold = +inf``.
    """
    pop, n = V.shape
    order = np.argsort(V, axis=1, kind="stable")
    Vs = np.take_along_axis(V, order, axis=1)
    cum = np.cumsum(y[order], axis=1)
    k = np.arange(1, n)
    q = weighted_gini_curve(k[None, :], cum[:, :-1], n, int(y.sum()))
    q = np.where(Vs[:, 1:] > Vs[:, :-1], q, np.inf)
    idx = np.argmin(q, axis=1)
    rows = np.arange(pop)
    best = q[rows, idx]
    thr = 0.5 * (Vs[rows, idx] + Vs[rows, idx + 1])
    none = ~np.isfinite(best)
    best = np.where(none, WORST, best)
    thr = np.where(none, np.inf, thr)
    return best, thr


def _place_cuts(G: np.ndarray, P: np.ndarray, y: np.ndarray, m: int):
    """Evaluate genomes ``G`` (rows ``[w, theta...]``) with exact cut placement.

    Returns impurities and the repaired, rescaled genomes.
    """
    p = P.shape[1]
    W = G[:, :p]
    S = W @ P.T  # pop x N
    if m == 0:
        q, thr = best_cuts(S, y)
        ok = np.isfinite(thr)
        t1 = np.where(ok, -thr, G[:, p])
        new = np.column_stack([W, t1])
    else:
        cands = [G[:, p]]
        for cls in (1, 0):
            sel = y == cls
            if sel.any():
                cands.append(-np.median(S[:, sel], axis=1))
        q = np.full(len(G), np.inf)
        t1 = G[:, p].copy()
        t2 = G[:, p + 1].copy()
        for c in cands:
            qc, thr = best_cuts(np.abs(S + c[:, None]), y)
            better = (qc < q) & np.isfinite(thr)
            q = np.where(better, qc, q)
            t1 = np.where(better, c, t1)
            t2 = np.where(better, thr, t2)
        q = np.where(np.isfinite(q), q, WORST)
        new = np.column_stack([W, t1, t2])
    scale = np.maximum(1.0, np.abs(new).max(axis=1))
    return q, new / scale[:, None]


def _sbx(a: np.ndarray, b: np.ndarray, eta: float, rng) -> tuple[np.ndarray, np.ndarray]:
    u = rng.random(a.shape)
    beta = np.where(u <= 0.5, (2 * u) ** (1 / (eta + 1)), (1 / (2 * (1 - u))) ** (1 / (eta + 1)))
    swap = rng.random(a.shape) < 0.5
    c1 = 0.5 * ((1 + beta) * a + (1 - beta) * b)
    c2 = 0.5 * ((1 - beta) * a + (1 + beta) * b)
    c1, c2 = np.where(swap, c2, c1), np.where(swap, c1, c2)
    return np.clip(c1, -1, 1), np.clip(c2, -1, 1)


@dataclass
class LowerResult:
    w: np.ndarray
    thetas: np.ndarray
    impurity: float
    generations: int


def lower_level_search(B: np.ndarray, m: int, Z: np.ndarray, y: np.ndarray,
                       params: NldtParams | None = None, rng: np.random.Generator | None = None) -> LowerResult:
    """Real-coded EA over ``(w, theta)`` in ``[-1, 1]`` minimising split impurity.

    Elitist (mu + lambda) survival, binary tournaments, SBX crossover and
    bounded Gaussian mutation. Stops early at zero impurity or after
    ``lower_stall`` generations without improvement.
    """
    params = params or NldtParams()
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    B = np.asarray(B, dtype=np.int64)
    y = np.asarray(y)
    p = B.shape[0]
    nv = p + m + 1
    P = power_terms(B, Z)
    pop_n = params.lower_pop
    G = rng.uniform(-1.0, 1.0, (pop_n, nv))
    q, G = _place_cuts(G, P, y, m)
    best_q = q.min()
    stall = 0
    gen = 0
    half = (pop_n + 1) // 2
    while gen < params.lower_gens and best_q > 0.0 and stall < params.lower_stall:
        gen += 1
        i1 = rng.integers(pop_n, size=(2 * half, 2))
        winners = np.where(q[i1[:, 0]] <= q[i1[:, 1]], i1[:, 0], i1[:, 1])
        c1, c2 = _sbx(G[winners[:half]], G[winners[half:]], params.sbx_eta, rng)
        kids = np.vstack([c1, c2])[:pop_n]
        mut = rng.random(kids.shape) < 1.0 / nv
        kids = np.clip(kids + mut * rng.normal(0.0, params.mutation_sigma, kids.shape), -1.0, 1.0)
        qk, kids = _place_cuts(kids, P, y, m)
        allG = np.vstack([G, kids])
        allq = np.concatenate([q, qk])
        keep = np.argsort(allq, kind="stable")[:pop_n]
        G, q = allG[keep], allq[keep]
        if q[0] < best_q:
            best_q = q[0]
            stall = 0
        else:
            stall += 1
    i = int(np.argmin(q))
    return LowerResult(G[i, :p].copy(), G[i, p:].copy(), float(q[i]), gen)


# --------------------------------------------------------------------------- upper level


@dataclass
class UpperResult:
    rule: PowerLawRule
    impurity: float
    complexity: int
    feasible: bool
    evaluations: int
    generations: int


def _key(feasible: bool, fu: int, fl: float):
    return (0, fu, fl) if feasible else (1, fl, fu)


def _canonical_B(B: np.ndarray) -> tuple:
    rows = {tuple(r) for r in B.tolist() if any(r)}
    return tuple(sorted(rows))


def upper_level_search(Z: np.ndarray, y: np.ndarray, params: NldtParams | None = None,
                       rng: np.random.Generator | None = None) -> UpperResult:
    """Evolve ``(B, m)`` for the least complex rule meeting ``tau_i``.

    Candidates compare feasibility first, then complexity (feasible) or
    impurity (infeasible). The search ends at complexity 1, after
    ``upper_stall`` generations without improvement, or after ``upper_gens``.
    """
    params = params or NldtParams()
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    y = np.asarray(y)
    n = len(y)
    ones = int(y.sum())
    if ones == 0 or ones == n:
        raise ValueError("upper_level_search needs an impure node")
    d = Z.shape[1]
    p = params.p
    E = np.array(params.exponents)
    nonzero_E = E[E != 0]
    cache: dict[tuple, tuple] = {}

    incumbent = [None, None]  # complexity, impurity of the best feasible rule so far

    def evaluate(B: np.ndarray, m: int):
        key = (m, _canonical_B(B))
        hit = cache.get(key)
        fu_best, fl_best = incumbent
        if hit is None and fu_best is not None:
            # cannot beat the incumbent: skip the lower level
            fu = sum(1 for row in key[1] for e in row if e)
            if fu > fu_best or (fu == fu_best and fl_best == 0.0):
                return None, WORST, fu
        if hit is None:
            if not key[1]:
                rule = PowerLawRule(np.zeros((p, d), np.int64), m, np.zeros(p), np.zeros(m + 1))
                hit = (rule, WORST)
            else:
                Bc = np.zeros((p, d), np.int64)
                for k, row in enumerate(key[1]):
                    Bc[k] = row
                low = lower_level_search(Bc, m, Z, y, params, np.random.default_rng(rng.integers(2**63)))
                rule = canonical_rule(PowerLawRule(Bc, m, low.w, low.thetas))
                hit = (rule, split_impurity(rule, Z, y))
            cache[key] = hit
        rule, fl = hit
        fu = rule_complexity(rule)
        if fl <= params.tau_i and (incumbent[0] is None or (fu, fl) < tuple(incumbent)):
            incumbent[:] = [fu, fl]
        return rule, fl, fu

    def random_B():
        B = np.zeros((p, d), np.int64)
        k = int(rng.integers(1, min(3, p * d) + 1))
        for _ in range(k):
            B[rng.integers(p), rng.integers(d)] = rng.choice(nonzero_E)
        return B

    popB = [random_B() for _ in range(params.upper_pop)]
    popM = [int(rng.integers(2)) for _ in range(params.upper_pop)]
    evals = [evaluate(B, m) for B, m in zip(popB, popM)]
    keys = [_key(r is not None and fl <= params.tau_i, fu, fl) for r, fl, fu in evals]

    def best_index():
        return min(range(len(keys)), key=keys.__getitem__)

    b = best_index()
    best = (evals[b], keys[b])
    stall = 0
    gen = 0
    n_genes = p * d
    while gen < params.upper_gens and stall < params.upper_stall and not (best[1][0] == 0 and best[1][1] <= 1):
        gen += 1
        kidsB, kidsM = [], []
        while len(kidsB) < params.upper_pop:
            a = _tournament(keys, rng)
            c = _tournament(keys, rng)
            mask = rng.random((p, d)) < 0.5
            child = np.where(mask, popB[a], popB[c])
            m = popM[a] if rng.random() < 0.5 else popM[c]
            reset = rng.random((p, d)) < 1.0 / n_genes
            if reset.any():
                child = child.copy()
                child[reset] = rng.choice(E, size=int(reset.sum()))
            if rng.random() < 0.1:
                m = 1 - m
            kidsB.append(child)
            kidsM.append(m)
        kid_evals = [evaluate(B, m) for B, m in zip(kidsB, kidsM)]
        kid_keys = [_key(r is not None and fl <= params.tau_i, fu, fl) for r, fl, fu in kid_evals]
        allB, allM = popB + kidsB, popM + kidsM
        all_evals, all_keys = evals + kid_evals, keys + kid_keys
        order = sorted(range(len(all_keys)), key=all_keys.__getitem__)[: params.upper_pop]
        popB = [allB[i] for i in order]
        popM = [allM[i] for i in order]
        evals = [all_evals[i] for i in order]
        keys = [all_keys[i] for i in order]
        if keys[0] < best[1]:
            best = (evals[0], keys[0])
            stall = 0
        else:
            stall += 1
    (rule, fl, fu), key = best
    return UpperResult(rule, fl, fu, key[0] == 0, len(cache), gen)


def _tournament(keys, rng) -> int:
    i, j = rng.integers(len(keys), size=2)
    return int(i if keys[i] <= keys[j] else j)


# --------------------------------------------------------------------------- tree


@dataclass
class NldtNode:
    depth: int
    counts: tuple[int, int]
    rule: PowerLawRule | None = None
    impurity: float | None = None
    left: int = -1
    right: int = -1
    note: str = ""

    @property
    def is_leaf(self) -> bool:
        return self.rule is None

    @property
    def label(self) -> int:
        return 1 if self.counts[1] > self.counts[0] else 0


@dataclass
class NldtTree:
    nodes: list[NldtNode]
    transform: FeatureTransform
    params: NldtParams
    feature_names: tuple[str, ...] = ()
    events: list[str] = field(default_factory=list)

    def conditional_nodes(self) -> list[NldtNode]:
        return [nd for nd in self.nodes if not nd.is_leaf]

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return np.clip(self.transform.apply(X), *PREDICT_DOMAIN)

    def route(self, Z: np.ndarray) -> np.ndarray:
        """Leaf node index reached by each normalised row."""
        node = np.zeros(len(Z), dtype=np.int64)
        frontier = [(0, np.arange(len(Z)))]
        while frontier:
            i, rows = frontier.pop()
            nd = self.nodes[i]
            if nd.is_leaf or len(rows) == 0:
                node[rows] = i
                continue
            go_left = nd.rule.evaluate(Z[rows]) <= 0
            frontier.append((nd.left, rows[go_left]))
            frontier.append((nd.right, rows[~go_left]))
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = self.normalize(np.atleast_2d(np.asarray(X, float)))
        leaves = self.route(Z)
        labels = np.array([nd.label for nd in self.nodes])
        return labels[leaves]

    def to_dict(self) -> dict:
        nodes = []
        for i, nd in enumerate(self.nodes):
            item = {"id": i, "depth": nd.depth, "counts": list(nd.counts), "leaf": nd.is_leaf}
            if nd.is_leaf:
                item["label"] = nd.label
                if nd.note:
                    item["note"] = nd.note
            else:
                item.update(nd.rule.to_dict())
                item.update({"F_L": nd.impurity, "left": nd.left, "right": nd.right})
            nodes.append(item)
        params = vars(self.params).copy()
        params["exponents"] = list(params["exponents"])
        return {"method": "nldt", "params": params, "transform": self.transform.to_dict(),
                "feature_names": list(self.feature_names), "nodes": nodes, "events": self.events}

    @classmethod
    def from_dict(cls, d: dict) -> "NldtTree":
        nodes = []
        for item in d["nodes"]:
            nd = NldtNode(item["depth"], tuple(item["counts"]))
            if not item["leaf"]:
                nd.rule = PowerLawRule.from_dict(item)
                nd.impurity, nd.left, nd.right = item["F_L"], item["left"], item["right"]
            else:
                nd.note = item.get("note", "")
            nodes.append(nd)
        return cls(nodes, FeatureTransform.from_dict(d["transform"]), NldtParams(**d["params"]),
                   tuple(d.get("feature_names", ())), list(d.get("events", [])))

    def render(self) -> str:
        """Indented rules over normalised features (each mapped to [1, 2])."""
        names = list(self.feature_names) or None
        lines: list[str] = []

        def walk(i, indent):
            nd = self.nodes[i]
            pad = "  " * indent
            if nd.is_leaf:
                lines.append(f"{pad}class {nd.label}  {nd.counts}")
                return
            lines.append(f"{pad}if {nd.rule.render(names)} <= 0:   [F_L={nd.impurity:.4f}]")
            walk(nd.left, indent + 1)
            lines.append(f"{pad}else:")
            walk(nd.right, indent + 1)

        walk(0, 0)
        return "\n".join(lines)


def fit_nldt(train: Dataset, params: NldtParams | None = None) -> NldtTree:
    """Grow a tree of power-law splits on min-max normalised features."""
    params = params or NldtParams()
    transform = FeatureTransform.fit(train.features)
    Z = transform.apply(train.features)
    y = np.asarray(train.labels)
    tree = NldtTree([], transform, params, tuple(train.feature_names))
    rng = rng_stream(params.seed, "nldt")

    def grow(rows: np.ndarray, depth: int) -> int:
        ones = int(y[rows].sum())
        counts = (len(rows) - ones, ones)
        idx = len(tree.nodes)
        node = NldtNode(depth, counts)
        tree.nodes.append(node)
        g = gini(counts)
        if g <= params.leaf_purity_tol or depth >= params.max_depth or len(rows) < params.min_node_size:
            return idx
        res = upper_level_search(Z[rows], y[rows], params, np.random.default_rng(rng.integers(2**63)))
        if not res.feasible or res.impurity >= g:
            node.note = f"no feasible split (best F_L={res.impurity:.4f})"
            tree.events.append(f"node {idx} at depth {depth}: {node.note}")
            log.info("nldt: %s", tree.events[-1])
            return idx
        go_left = res.rule.evaluate(Z[rows]) <= 0
        node.rule, node.impurity = res.rule, res.impurity
        node.left = grow(rows[go_left], depth + 1)
        node.right = grow(rows[~go_left], depth + 1)
        return idx

    grow(np.arange(train.n), 0)
    return tree


def nldt_complexity(tree: NldtTree) -> int:
    """Sum over conditional nodes of the number of distinct features used."""
    return sum(len(nd.rule.features()) for nd in tree.conditional_nodes())


def predict_nldt(tree: NldtTree, x_raw) -> int:
    return int(tree.predict(np.asarray(x_raw, float)[None, :])[0])


def with_params(params: NldtParams, **changes) -> NldtParams:
    return replace(params, **changes)
