"""Synthetic binary datasets: 2-D DS/m-DS families and Pareto-vs-dominated sets.

Constructions (constants live in ``defaults.cfg``):

* ds1/mds1, ds2/mds2 -- two classes on either side of a line through
  (0.5, 0.5). Each point sits at a signed distance ``margin + |N(0, s_c)|``
  from the line, with class-dependent ``s_c`` for DS and equal ``s_c`` for m-DS.
  ds2/mds2 keep the full majority (class 0) and one fifth as many class-1 points.
* ds3/mds3 -- class 1 above the parabola ``x2 = c (x1 - 0.5)^2 + offset``,
  class 0 below, with the same vertical offset scheme.
* ds4 -- class 1 inside a band around a line, class 0 split evenly beyond
  both edges (two disjoint parallel boundaries).
* mzdt1/mzdt2/mdtlz1/mdtlz2 -- ZDT/DTLZ problems whose auxiliary variables
  are linked to the first one: the distance function is built from
  ``(x_i - x_1)``, so the Pareto-optimal set is ``x_i = x_1``. Class 1
  samples lie on that set. Each class-0 sample copies the position variables of
  one class-1 sample and shifts every auxiliary variable by an offset
  drawn uniform in ``[offset_low, offset_high]``, so it is strictly
  dominated by its partner.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import package_defaults, section
from .core import Dataset, rng_stream

DS_FAMILIES = ("ds1", "ds2", "ds3", "ds4", "mds1", "mds2", "mds3")
PARETO_FAMILIES = ("mzdt1", "mzdt2", "mdtlz1", "mdtlz2")
FAMILIES = DS_FAMILIES + PARETO_FAMILIES

_DEFAULTS = package_defaults()
DS_DEFAULTS = section(_DEFAULTS, "ds")
PARETO_DEFAULTS = section(_DEFAULTS, "pareto")


@dataclass
class SyntheticSpec:
    """What to generate.

    ``noise`` is the minimum separation: the boundary margin for DS families
    and the smallest auxiliary-variable offset for Pareto families. ``None``
    picks the configured default.
    """

    family: str
    n_per_class: int | None = None
    d: int | None = None
    seed: int = 0
    noise: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.family = self.family.lower().replace("-", "")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        pareto = self.family in PARETO_FAMILIES
        defaults = PARETO_DEFAULTS if pareto else DS_DEFAULTS
        if self.n_per_class is None:
            self.n_per_class = int(defaults["n_per_class"])
        if self.d is None:
            self.d = int(PARETO_DEFAULTS["d"]) if pareto else 2
        if self.noise is None:
            self.noise = float(defaults["offset_low"] if pareto else defaults["margin"])
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")

    def option(self, key):
        defaults = PARETO_DEFAULTS if self.family in PARETO_FAMILIES else DS_DEFAULTS
        return self.params.get(key, defaults[key])


def generate(spec: SyntheticSpec) -> Dataset:
    if spec.family in DS_FAMILIES:
        return gen_ds(spec)
    return gen_pareto(spec)


def gen_ds(spec: SyntheticSpec) -> Dataset:
    fam = spec.family
    if fam not in DS_FAMILIES:
        raise ValueError(f"{fam!r} is not a DS family")
    if spec.d != 2:
        raise ValueError(f"DS families are 2-D, got d={spec.d}")
    n = spec.n_per_class
    if n < 2:
        raise ValueError("n_per_class must be >= 2")
    n0 = n
    n1 = n
    if fam in ("ds2", "mds2"):
        n1 = n // int(spec.option("minority_ratio"))
        if n1 < 2:
            raise ValueError("majority too small for a 5:1 split")
    rng = rng_stream(spec.seed, f"gen:{fam}")
    s0, s1 = spec.option("scatter_mds" if fam.startswith("m") else "scatter_ds")
    margin = spec.noise
    center = np.array([0.5, 0.5])

    def offsets(k, s, sign):
        return sign * (margin + np.abs(rng.normal(0.0, s, k)))

    if fam in ("ds1", "ds2", "mds1", "mds2", "ds4"):
        phi = np.deg2rad(spec.option("line_angle_deg"))
        u = np.array([np.cos(phi), np.sin(phi)])
        nrm = np.array([-np.sin(phi), np.cos(phi)])
        L = spec.option("line_half_length")
        along0 = rng.uniform(-L, L, n0)
        along1 = rng.uniform(-L, L, n1)
        if fam == "ds4":
            w = spec.option("band_half_width")
            if w <= margin:
                raise ValueError("band narrower than the margin")
            side = np.where(np.arange(n0) < n0 // 2, 1.0, -1.0)
            side = rng.permutation(side)
            d0 = side * (w + margin + np.abs(rng.normal(0.0, s0, n0)))
            d1 = rng.uniform(-(w - margin), w - margin, n1)
        else:
            d0 = offsets(n0, s0, -1.0)
            d1 = offsets(n1, s1, 1.0)
        X0 = center + along0[:, None] * u + d0[:, None] * nrm
        X1 = center + along1[:, None] * u + d1[:, None] * nrm
        boundary = {"kind": "band" if fam == "ds4" else "line", "angle_deg": float(spec.option("line_angle_deg")),
                    "point": center.tolist()}
    else:  # ds3, mds3
        c = spec.option("parabola_curvature")
        off = spec.option("parabola_offset")
        a0 = rng.uniform(0.0, 1.0, n0)
        a1 = rng.uniform(0.0, 1.0, n1)
        X0 = np.column_stack([a0, c * (a0 - 0.5) ** 2 + off + offsets(n0, s0, -1.0)])
        X1 = np.column_stack([a1, c * (a1 - 0.5) ** 2 + off + offsets(n1, s1, 1.0)])
        boundary = {"kind": "parabola", "curvature": c, "offset": off}

    X = np.vstack([X0, X1])
    y = np.concatenate([np.zeros(n0, int), np.ones(n1, int)])
    perm = rng.permutation(len(y))
    meta = {"family": fam, "seed": spec.seed, "n_per_class": n, "margin": margin, "boundary": boundary}
    return Dataset(X[perm], y[perm], ("x1", "x2"), fam, meta)


# --------------------------------------------------------------------------- Pareto sets


def distance_g(family: str, X: np.ndarray) -> np.ndarray:
    """Auxiliary (distance) function; minimal exactly on the linked Pareto set."""
    X = np.atleast_2d(X)
    if family in ("mzdt1", "mzdt2"):
        dev = X[:, 1:] - X[:, :1]
        return 1.0 + 9.0 * (dev ** 2).sum(1) / (X.shape[1] - 1)
    dev = X[:, 2:] - X[:, :1]
    if family == "mdtlz2":
        return (dev ** 2).sum(1)
    if family == "mdtlz1":
        return 100.0 * (dev.shape[1] + (dev ** 2 - np.cos(20.0 * np.pi * dev)).sum(1))
    raise ValueError(f"unknown Pareto family {family!r}")


def objectives(family: str, X: np.ndarray) -> np.ndarray:
    """Objective vectors (to be minimised) of the linked ZDT/DTLZ problems."""
    X = np.atleast_2d(X)
    g = distance_g(family, X)
    x1 = X[:, 0]
    if family == "mzdt1":
        return np.column_stack([x1, g * (1.0 - np.sqrt(x1 / g))])
    if family == "mzdt2":
        return np.column_stack([x1, g * (1.0 - (x1 / g) ** 2)])
    x2 = X[:, 1]
    if family == "mdtlz2":
        a, b = 0.5 * np.pi * x1, 0.5 * np.pi * x2
        return (1.0 + g)[:, None] * np.column_stack([np.cos(a) * np.cos(b), np.cos(a) * np.sin(b), np.sin(a)])
    if family == "mdtlz1":
        return 0.5 * (1.0 + g)[:, None] * np.column_stack([x1 * x2, x1 * (1.0 - x2), 1.0 - x1])
    raise ValueError(f"unknown Pareto family {family!r}")


def dominates(fa: np.ndarray, fb: np.ndarray) -> bool:
    return bool(np.all(fa <= fb) and np.any(fa < fb))


def gen_pareto(spec: SyntheticSpec) -> Dataset:
    fam = spec.family
    if fam not in PARETO_FAMILIES:
        raise ValueError(f"{fam!r} is not a Pareto family")
    d = spec.d
    n_pos = 1 if fam.startswith("mzdt") else 2
    if d < n_pos + 2:
        raise ValueError(f"d={d} too small for {fam}")
    n = spec.n_per_class
    if n < 2:
        raise ValueError("n_per_class must be >= 2")
    lo = spec.noise
    hi = max(spec.option("offset_high"), lo)
    if hi > 0.5:
        raise ValueError("offsets above 0.5 cannot always stay inside [0, 1]")
    rng = rng_stream(spec.seed, f"gen:{fam}")

    pos = rng.uniform(0.0, 1.0, (n, n_pos))
    X1 = np.empty((n, d))
    X1[:, :n_pos] = pos
    X1[:, n_pos:] = pos[:, :1]

    X0 = X1.copy()
    mag = rng.uniform(lo, hi, (n, d - n_pos))
    sign = rng.choice([-1.0, 1.0], size=mag.shape)
    base = X1[:, n_pos:]
    shifted = base + sign * mag
    flip = (shifted < 0.0) | (shifted > 1.0)
    shifted[flip] = base[flip] - sign[flip] * mag[flip]
    X0[:, n_pos:] = shifted

    X = np.vstack([X0, X1])
    y = np.concatenate([np.zeros(n, int), np.ones(n, int)])
    perm = rng.permutation(2 * n)
    meta = {"family": fam, "seed": spec.seed, "n_per_class": n, "offset_band": [lo, hi], "d": d}
    return Dataset(X[perm], y[perm], tuple(f"x{j + 1}" for j in range(d)), f"{fam}-{d}", meta)
