"""``nldtlab`` command line: gen, fit, predict, bench, sweep.

Exit codes: 0 success, 1 usage error, 2 runtime error. Every flag can also
be given in a ``--config`` file as ``key = value`` (dashes become
underscores, optionally under a ``[subcommand]`` section). A flag given on
the command line wins over the file, with a warning.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, methods
from .config import read_config
from .core import accuracy, load_csv, save_csv
from .datagen import FAMILIES, PARETO_FAMILIES, SyntheticSpec, generate


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# flag dest -> (type, {method: parameter name})
HYPER = {
    "c": (float, {"svm": "C"}),
    "gamma": (float, {"svm": "gamma"}),
    "kkt_tol": (float, {"svm": "kkt_tol"}),
    "max_passes": (int, {"svm": "max_passes"}),
    "max_depth": (int, {"cart": "max_depth", "gp": "max_depth", "nldt": "max_depth"}),
    "min_leaf": (int, {"cart": "min_leaf"}),
    "min_impurity_decrease": (float, {"cart": "min_impurity_decrease"}),
    "parsimony": (float, {"gp": "parsimony"}),
    "population_size": (int, {"gp": "population_size"}),
    "generations": (int, {"gp": "generations"}),
    "tau_i": (float, {"nldt": "tau_i"}),
    "p": (int, {"nldt": "p"}),
    "min_node_size": (int, {"nldt": "min_node_size"}),
    "upper_pop": (int, {"nldt": "upper_pop"}),
    "upper_gens": (int, {"nldt": "upper_gens"}),
    "lower_pop": (int, {"nldt": "lower_pop"}),
    "lower_gens": (int, {"nldt": "lower_gens"}),
}

DEFAULTS = {"seed": 0, "runs": 50, "threads": 1, "format": "markdown", "label_column": "label",
            "methods": "cart,svm,gp,nldt"}


def _add_hyper(p: argparse.ArgumentParser, lists: bool) -> None:
    g = p.add_argument_group("hyperparameters" + (" (comma-separated lists allowed)" if lists else ""))
    for dest, (_, owners) in HYPER.items():
        flag = "--" + dest.replace("_", "-")
        aliases = [flag, "--pc"] if dest == "parsimony" else [flag]
        g.add_argument(*aliases, dest=dest, default=None, metavar="V" + ("[,V...]" if lists else ""),
                       help=f"{'/'.join(owners)}")


def _add_data_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-per-class", type=int, default=None, help="points per class for generated data")
    p.add_argument("--d", type=int, default=None, help="dimension for Pareto families")
    p.add_argument("--noise", type=float, default=None, help="margin / minimum offset for generated data")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nldtlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="{gen,fit,predict,bench,sweep}")

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--family", help=", ".join(FAMILIES))
    g.add_argument("--n", type=int, default=None, help="total number of points")
    _add_data_opts(g)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out")

    f = sub.add_parser("fit", help="train one model and save it as JSON")
    f.add_argument("--method", choices=list(methods.REGISTRY))
    f.add_argument("--train", help="training CSV")
    f.add_argument("--label-column", default=None)
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--out", help="model JSON path")
    _add_hyper(f, lists=False)

    pr = sub.add_parser("predict", help="apply a saved model to a CSV")
    pr.add_argument("--model")
    pr.add_argument("--data")
    pr.add_argument("--label-column", default=None)
    pr.add_argument("--out", help="predictions CSV (default: stdout)")

    for name, helptext in (("bench", "methods x datasets table"), ("sweep", "one method, one parameter swept")):
        b = sub.add_parser(name, help=helptext)
        if name == "bench":
            b.add_argument("--methods", default=None, help="comma list (default: all)")
        else:
            b.add_argument("--method", choices=list(methods.REGISTRY))
        b.add_argument("--dataset", action="append", default=None,
                       help="family name or CSV; repeat or comma-separate")
        b.add_argument("--runs", type=int, default=None)
        b.add_argument("--seed", type=int, default=None, help="base seed (required)")
        b.add_argument("--threads", type=int, default=None)
        b.add_argument("--format", choices=["markdown", "csv"], default=None)
        b.add_argument("--out", help=f"results directory (default: ${bench.RESULTS_ENV} or ./results)")
        _add_data_opts(b)
        _add_hyper(b, lists=(name == "sweep"))

    for sp in sub.choices.values():
        sp.add_argument("--config", default=None, help="key = value file with flag defaults")
    return parser


# --------------------------------------------------------------------------- config merge


def _coerce(value):
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return value


def merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser, warn) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    try:
        cfg = read_config(args.config)
    except OSError as exc:
        raise RuntimeError(f"cannot read config {args.config}: {exc}") from None
    known = set(vars(args))
    for key, value in cfg.items():
        if "." in key:
            sect, key = key.split(".", 1)
            if sect != args.command:
                continue
        if key not in known or key in ("command", "config"):
            raise UsageError(f"unknown config key {key!r}")
        given = getattr(args, key)
        value = _coerce(value)
        if key == "dataset" and not isinstance(value, list):
            value = [str(value)]
        if given is None:
            setattr(args, key, value)
        elif str(given) != str(value):
            warn(f"warning: --{key.replace('_', '-')} on the command line overrides config value {value!r}")
    return args


def _fill_defaults(args: argparse.Namespace) -> None:
    for k, v in DEFAULTS.items():
        if hasattr(args, k) and getattr(args, k) is None:
            setattr(args, k, v)


def _require(args, *names):
    for n in names:
        if getattr(args, n, None) in (None, []):
            raise UsageError(f"{args.command}: --{n.replace('_', '-')} is required")


def _hyper_values(args, method: str, lists: bool) -> dict[str, list]:
    out = {}
    for dest, (typ, owners) in HYPER.items():
        raw = getattr(args, dest, None)
        if raw is None or method not in owners:
            continue
        parts = [s.strip() for s in str(raw).split(",") if s.strip()]
        if not parts or (len(parts) > 1 and not lists):
            raise UsageError(f"--{dest.replace('_', '-')} expects a single value")
        try:
            out[owners[method]] = [typ(float(s)) if typ is int else typ(s) for s in parts]
        except ValueError:
            raise UsageError(f"--{dest.replace('_', '-')}: cannot parse {raw!r}") from None
    return out


def _datasets(args) -> list[str]:
    return [s.strip() for item in args.dataset for s in str(item).split(",") if s.strip()]


def _data_opts(args) -> dict:
    return {"n_per_class": args.n_per_class, "d": args.d, "noise": args.noise}


# --------------------------------------------------------------------------- commands


def cmd_gen(args, out, err) -> int:
    _require(args, "family", "out")
    fam = args.family.lower().replace("-", "")
    n_per_class = args.n_per_class
    if args.n is not None:
        if n_per_class is not None:
            raise UsageError("give --n or --n-per-class, not both")
        n_per_class = args.n * 5 // 6 if fam in ("ds2", "mds2") else args.n // 2
    spec = SyntheticSpec(fam, n_per_class=n_per_class, d=args.d if fam in PARETO_FAMILIES else None,
                         seed=args.seed, noise=args.noise)
    ds = generate(spec)
    path = save_csv(ds, args.out)
    c0, c1 = ds.class_counts()
    print(f"wrote {path} ({ds.n} rows, d={ds.d}, class 0: {c0}, class 1: {c1})", file=err)
    return 0


def cmd_fit(args, out, err) -> int:
    _require(args, "method", "train", "out")
    m = methods.get(args.method)
    params = {k: v[0] for k, v in _hyper_values(args, args.method, lists=False).items()}
    ds = load_csv(args.train, label_column=args.label_column)
    model = m.fit(ds, params, args.seed)
    d = m.to_dict(model)
    d["feature_names"] = list(ds.feature_names)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(d, indent=2), encoding="utf-8")
    acc = accuracy(m.predict(model, ds.features), ds.labels)
    print(m.describe(model, ds.feature_names), file=out)
    print(f"training accuracy {100 * acc:.2f}%, complexity {m.complexity(model):g}; model written to {args.out}",
          file=err)
    return 0


def _read_features(path: str, label_column: str):
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise ValueError(f"{path}: empty file")
    if label_column in header:
        ds = load_csv(path, label_column=label_column)
        return ds.features, ds.labels
    X = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return X, None


def cmd_predict(args, out, err) -> int:
    _require(args, "model", "data")
    d = json.loads(Path(args.model).read_text(encoding="utf-8"))
    m, model = methods.load_model(d)
    X, y = _read_features(args.data, args.label_column)
    pred = m.predict(model, X)
    lines = ["prediction"] + [str(int(v)) for v in pred]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        print("\n".join(lines), file=out)
    if y is not None:
        print(f"accuracy {100 * accuracy(pred, y):.2f}% on {len(y)} rows", file=err)
    return 0


def _out_dir(args, default_name: str) -> Path:
    return Path(args.out) if args.out else bench.results_root() / default_name


def cmd_bench(args, out, err) -> int:
    _require(args, "dataset", "seed")
    names = [s.strip() for s in args.methods.split(",") if s.strip()]
    for n in names:
        if n not in methods.REGISTRY:
            raise UsageError(f"unknown method {n!r}")
    params = {n: {k: v[0] for k, v in _hyper_values(args, n, lists=False).items()} for n in names}
    grid, specs = bench.run_bench(names, _datasets(args), n_runs=args.runs, base_seed=args.seed,
                                  threads=args.threads, params=params, dataset_options=_data_opts(args))
    dest = bench.write_results(_out_dir(args, f"bench-seed{args.seed}"), specs, [], grid=grid, compare="row")
    print(bench.render_table(grid, args.format, compare="row"), file=out, end="")
    print(f"results written to {dest}", file=err)
    return 0


def cmd_sweep(args, out, err) -> int:
    _require(args, "method", "dataset", "seed")
    values = _hyper_values(args, args.method, lists=True)
    swept = [k for k, v in values.items() if len(v) > 1]
    if len(swept) != 1:
        raise UsageError("sweep needs exactly one hyperparameter flag with a comma-separated list")
    param = swept[0]
    fixed = {k: v[0] for k, v in values.items() if k != param}
    grid, specs = bench.run_sweep(args.method, param, values[param], _datasets(args), n_runs=args.runs,
                                  base_seed=args.seed, threads=args.threads, params=fixed,
                                  dataset_options=_data_opts(args))
    dest = bench.write_results(_out_dir(args, f"sweep-{args.method}-{param}-seed{args.seed}"), specs, [],
                               grid=grid, compare="column")
    print(bench.render_table(grid, args.format, row_title=param, compare="column"), file=out, end="")
    print(f"results written to {dest}", file=err)
    return 0


COMMANDS = {"gen": cmd_gen, "fit": cmd_fit, "predict": cmd_predict, "bench": cmd_bench, "sweep": cmd_sweep}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        args = merge_config(args, parser, lambda msg: print(msg, file=err))
        if args.command in ("bench", "sweep"):
            _require(args, "seed")
        _fill_defaults(args)
        return COMMANDS[args.command](args, out, err)
    except UsageError as exc:
        print(f"nldtlab: usage error: {exc}", file=err)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:
        print(f"nldtlab: error: {type(exc).__name__}: {exc}", file=err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
