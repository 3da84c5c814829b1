"""
Command-line front end.

    python -m reuse_igo run --function onemax --d 128 --variant cga --eta 1/d --K 1
    python -m reuse_igo sweep sweep.toml
    python -m reuse_igo report results/*/trials.csv
    python -m reuse_igo selftest

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import ast
import itertools
import logging
import math
import operator
import os
import sys

import pandas as pd
from tqdm import tqdm

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .benchmarks import population_grid
from .harness import ConfigError, ExperimentConfig, load_results, persist_results, run_experiment

logger = logging.getLogger(__name__)

CONFIG_KEYS = ("function", "d", "variant", "lambda", "K", "eta", "T", "alpha", "trials", "seed", "budget", "target")
SWEEP_AXES = ("variant", "lambda", "K", "eta")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_SELFTEST = 3

_OPERATORS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def eval_eta(expr, d: int) -> float:
    """Evaluate a learning-rate expression over the dimension, e.g. "1/d" or "16/d"."""
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        return float(expr)

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "d":
            return float(d)
        if isinstance(node, ast.BinOp) and type(node.op) in _OPERATORS:
            return _OPERATORS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPERATORS:
            return _OPERATORS[type(node.op)](walk(node.operand))
        raise ConfigError("eta", f"unsupported expression {expr!r}; use numbers, d and + - * / **")

    try:
        tree = ast.parse(str(expr).strip(), mode="eval")
        value = walk(tree)
        if isinstance(value, complex):
            raise ConfigError("eta", f"{expr!r} is not a real number")
        value = float(value)
    except SyntaxError:
        raise ConfigError("eta", f"cannot parse {expr!r}") from None
    except ZeroDivisionError:
        raise ConfigError("eta", f"{expr!r} divides by zero") from None
    except OverflowError:
        raise ConfigError("eta", f"{expr!r} overflows") from None
    if not math.isfinite(value):
        raise ConfigError("eta", f"{expr!r} is not finite")
    return value


def load_toml(path):
    with open(path, "rb") as f:
        try:
            return tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(os.path.basename(str(path)), f"malformed TOML: {e}") from None


def _check_keys(values, where):
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(unknown[0], f"unknown key in {where}; valid keys: {', '.join(CONFIG_KEYS)}")


def build_config(values: dict) -> ExperimentConfig:
    """ExperimentConfig from flat config-file keys, resolving "default" lambda and eta expressions."""
    _check_keys(values, "config")
    values = dict(values)
    for required in ("function", "d", "variant"):
        if values.get(required) is None:
            raise ConfigError(required, "is required")
    lam = values.pop("lambda", None)
    if isinstance(lam, str):
        text = lam.strip().lower()
        if text == "default":
            lam = None
        else:
            try:
                lam = int(text)
            except ValueError:
                raise ConfigError("lambda", f"must be an integer or 'default', got {lam!r}") from None
    values["lam"] = lam
    eta = values.get("eta")
    if eta is not None:
        try:
            d = int(values["d"])
        except (TypeError, ValueError):
            raise ConfigError("d", f"must be an integer, got {values['d']!r}") from None
        values["eta"] = eval_eta(eta, d)
    return ExperimentConfig(**{k: v for k, v in values.items() if v is not None or k == "lam"})


def _overrides(args) -> dict:
    dests = {key: key for key in CONFIG_KEYS}
    dests["lambda"] = "lam"
    values = {key: getattr(args, dest) for key, dest in dests.items()}
    return {k: v for k, v in values.items() if v is not None}


def _print_summary(summary, out_dir):
    cfg = summary.config
    print("\n" + "=" * 60)
    print(f"{cfg.variant.upper()} ON {cfg.function.upper()} (d={cfg.d}, lambda={cfg.lam}, K={cfg.K})")
    print("=" * 60)
    print(f"  Trials: {len(summary.trials)}")
    print(f"  Successes: {summary.success_count} ({summary.success_probability * 100:.1f}%)")
    if summary.performance_metric is None:
        print("  Performance: no successful run")
    else:
        print(f"  Mean evaluations (successful): {summary.mean_evals_success:,.1f}")
        print(f"  Performance: {summary.performance_metric:,.1f}")
    print(f"  Results saved to {out_dir}")


def cmd_run(args) -> int:
    values = load_toml(args.config) if args.config else {}
    values.update(_overrides(args))
    config = build_config(values)
    summary = run_experiment(config, jobs=args.jobs, record_trace=args.trace)
    persist_results(summary, args.out)
    _print_summary(summary, args.out)
    return EXIT_OK


def _cell_name(cell: dict) -> str:
    parts = []
    for axis, value in cell.items():
        text = str(value).replace("/", "over").replace(" ", "")
        parts.append(f"{axis}-{text}")
    return "_".join(parts) or "base"


def _lambda_grid(base: dict) -> list:
    """The population sizes swept for the base function and dimension."""
    if base.get("function") is None or base.get("d") is None:
        raise ConfigError("lambda", "a grid needs function and d in [base]")
    try:
        return population_grid(base["function"], int(base["d"]))
    except (TypeError, ValueError) as e:
        raise ConfigError("lambda", f"no grid for {base['function']!r} at d={base['d']!r}: {e}") from None


def load_sweep(path):
    """(base values, ordered axes, output directory) from a sweep file."""
    doc = load_toml(path)
    unknown = sorted(set(doc) - {"out", "base", "axes"})
    if unknown:
        raise ConfigError(unknown[0], "unknown sweep key; expected out, [base] and [axes]")
    base = dict(doc.get("base", {}))
    _check_keys(base, "[base]")
    axes = dict(doc.get("axes", {}))
    if axes.get("lambda") == "grid":
        axes["lambda"] = _lambda_grid(base)
    for axis, values in axes.items():
        if axis not in SWEEP_AXES:
            raise ConfigError(axis, f"cannot sweep; sweepable axes: {', '.join(SWEEP_AXES)}")
        if not isinstance(values, list) or not values:
            raise ConfigError(axis, "axis values must be a nonempty list")
    ordered = {axis: list(axes[axis]) for axis in SWEEP_AXES if axis in axes}
    return base, ordered, doc.get("out", "sweep_results")


def sweep_cells(axes: dict):
    """Cartesian product of the axes in a fixed order, one dict per cell."""
    names = list(axes)
    for combo in itertools.product(*(axes[n] for n in names)):
        yield dict(zip(names, combo))


def cmd_sweep(args) -> int:
    base, axes, out = load_sweep(args.sweep)
    out = args.out or out
    os.makedirs(out, exist_ok=True)
    cells = list(sweep_cells(axes))
    rows = []
    for cell in tqdm(cells, desc="sweep", unit="cell", disable=args.quiet):
        cell_dir = os.path.join(out, _cell_name(cell))
        row = {**cell, "dir": os.path.basename(cell_dir), "error": ""}
        try:
            if os.path.exists(os.path.join(cell_dir, "summary.json")):
                logger.info("skipping completed cell %s", cell_dir)
                summary = load_results(cell_dir)
            else:
                logger.info("running cell %s", cell_dir)
                summary = run_experiment(build_config({**base, **cell}), jobs=args.jobs)
                persist_results(summary, cell_dir)
            row.update(
                success_probability=summary.success_probability,
                mean_evals_success=summary.mean_evals_success,
                performance_metric=summary.performance_metric,
            )
        except (ConfigError, ValueError) as e:
            logger.warning("cell %s failed: %s", cell_dir, e)
            row.update(success_probability=None, mean_evals_success=None, performance_metric=None, error=str(e))
        rows.append(row)

    table = pd.DataFrame(rows)
    sweep_path = os.path.join(out, "sweep.csv")
    table.to_csv(sweep_path, index=False)
    failed = int((table["error"] != "").sum()) if len(table) else 0
    print(f"\n✓ {len(rows) - failed} cell(s) completed, {failed} failed; table saved to {sweep_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import ResultsReport

    report = ResultsReport(args.paths)
    report.run_report(os.path.join(args.out, "report.csv"))
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_SELFTEST


def _add_experiment_flags(p):
    p.add_argument("--config", help="TOML file with experiment settings; flags override it")
    p.add_argument("--function", help="benchmark function name")
    p.add_argument("--d", type=int, help="problem dimension")
    p.add_argument("--variant", help="algorithm variant")
    p.add_argument("--lambda", dest="lam", help="population size or 'default'")
    p.add_argument("--K", type=int, dest="K", help="number of past generations to reuse")
    p.add_argument("--eta", help="PBIL learning rate, may use d (e.g. 1/d)")
    p.add_argument("--T", type=float, dest="T", help="step-utility threshold")
    p.add_argument("--alpha", type=float, help="importance-mixing minimal refresh rate")
    p.add_argument("--trials", type=int, help="number of independent runs")
    p.add_argument("--seed", type=int, help="base seed; trial i uses seed + i")
    p.add_argument("--budget", type=int, help="evaluation budget override")
    p.add_argument("--target", type=float, help="target value override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reuse_igo", description="Sample-reuse IGO experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    _add_experiment_flags(run)
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="worker threads")
    run.add_argument("--trace", action="store_true", help="write per-iteration traces")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a parameter grid")
    sweep.add_argument("sweep", help="sweep TOML file")
    sweep.add_argument("--out", help="output directory (overrides the file)")
    sweep.add_argument("--jobs", type=int, default=1, help="worker threads per cell")
    sweep.add_argument("--quiet", action="store_true", help="no progress bar")
    sweep.set_defaults(func=cmd_sweep)

    report = sub.add_parser("report", help="aggregate trials.csv files into one table")
    report.add_argument("paths", nargs="+", help="trials.csv files or result directories")
    report.add_argument("--out", default=".", help="directory for report.csv")
    report.set_defaults(func=cmd_report)

    selftest = sub.add_parser("selftest", help="run the fast invariant checks")
    selftest.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"✗ configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"✗ I/O error: {e}", file=sys.stderr)
        return EXIT_IO
