"""Uniform fit / predict / complexity interface over the four classifiers."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import cart, gp, nldt, svm
from .core import Dataset


@dataclass(frozen=True)
class Method:
    name: str
    fit: Callable[[Dataset, dict, int], Any]
    predict: Callable[[Any, np.ndarray], np.ndarray]
    complexity: Callable[[Any], float]
    to_dict: Callable[[Any], dict]
    from_dict: Callable[[dict], Any]
    param_names: tuple[str, ...]
    describe: Callable[[Any, tuple], str]


def _fields(cls) -> tuple[str, ...]:
    return tuple(f.name for f in dataclasses.fields(cls) if f.name != "seed")


def _fit_cart(train, params, seed):
    return cart.fit_cart(train, cart.CartParams(**params))


def _fit_svm(train, params, seed):
    return svm.solve_dual(train, **params)


def _fit_gp(train, params, seed):
    return gp.evolve(train, gp.GpConfig(**params, seed=seed)).best


def _fit_nldt(train, params, seed):
    return nldt.fit_nldt(train, nldt.NldtParams(**params, seed=seed))


def _describe_svm(model: svm.SvmModel, names) -> str:
    return (f"RBF SVM: C={model.C:g}, gamma={model.gamma:.6g}, bias={model.bias:.6g}, "
            f"{len(model.sv_alphas)} support vectors, converged={model.converged}")


REGISTRY: dict[str, Method] = {
    "cart": Method(
        "cart", _fit_cart, lambda m, X: m.predict(X), cart.cart_complexity,
        lambda m: m.to_dict(), cart.AxisTree.from_dict, _fields(cart.CartParams),
        lambda m, names: m.render(list(names) if names else None),
    ),
    "svm": Method(
        "svm", _fit_svm, lambda m, X: m.predict(X), svm.svm_complexity,
        lambda m: m.to_dict(), svm.SvmModel.from_dict, ("C", "gamma", "kkt_tol", "max_passes", "sv_epsilon"),
        _describe_svm,
    ),
    "gp": Method(
        "gp", _fit_gp, lambda m, X: m.predict(X), gp.gp_complexity,
        lambda m: m.to_dict(), gp.GpTree.from_dict, _fields(gp.GpConfig),
        lambda m, names: "f(x) = " + gp.render_expression(m),
    ),
    "nldt": Method(
        "nldt", _fit_nldt, lambda m, X: m.predict(X), nldt.nldt_complexity,
        lambda m: m.to_dict(), nldt.NldtTree.from_dict, _fields(nldt.NldtParams),
        lambda m, names: m.render(),
    ),
}


def get(name: str) -> Method:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; expected one of {', '.join(REGISTRY)}") from None


def load_model(d: dict):
    """Rebuild a model from its JSON dict; returns ``(method, model)``."""
    method = get(d["method"])
    return method, method.from_dict(d)
