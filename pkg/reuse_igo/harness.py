"""
Trial execution, multi-trial experiments and result persistence.

A trial runs one optimizer from a seeded initial distribution until the
target is hit (success) or the budget, the eigenvalue floor or a covariance
breakdown ends it (failure). Generations are atomic: termination is checked
between generations, so a trial can overshoot the budget by less than one
generation. Experiments run trials with seeds base + i and summarize them with
the mean evaluations over successful runs divided by the success probability.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from .algorithms import CmaState, PbilState, Variant, cma_step, pbil_step
from .benchmarks import BenchmarkSpec, canonical_name, default_population_size, default_spec
from .distributions import BernoulliParams, CovarianceDegeneracyError, GaussianParams, min_eigenvalue

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = [
    "function", "d", "variant", "lambda", "K", "eta", "T", "alpha",
    "trial", "seed", "success", "evaluations", "best_f", "iterations", "reason",
]
CONFIG_COLUMNS = TRIAL_COLUMNS[:8]

TARGET_REACHED = "target_reached"
OPTIMUM_SAMPLED = "optimum_sampled"
BUDGET = "budget"
EIGEN_FLOOR = "eigen_floor"
DEGENERACY = "degeneracy"
SUCCESS_REASONS = (TARGET_REACHED, OPTIMUM_SAMPLED)


class ConfigError(ValueError):
    """An invalid experiment setting; `field` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class ExperimentConfig:
    function: str
    d: int
    variant: str
    lam: Optional[int] = None
    K: int = 0
    eta: Optional[float] = None
    T: float = 0.25
    alpha: float = 0.0
    trials: int = 50
    seed: int = 0
    budget: Optional[int] = None
    target: Optional[float] = None

    def __post_init__(self):
        try:
            self.function = canonical_name(self.function)
        except ValueError as e:
            raise ConfigError("function", str(e)) from None
        try:
            self.variant = Variant.parse(self.variant).value
        except ValueError as e:
            raise ConfigError("variant", str(e)) from None

        self.d = _as_int("d", self.d)
        if self.d < 1:
            raise ConfigError("d", f"must be positive, got {self.d}")
        try:
            spec = default_spec(self.function, self.d)
        except ValueError as e:
            raise ConfigError("d", str(e)) from None

        variant = Variant(self.variant)
        if spec.is_binary != variant.is_binary:
            kind = "binary" if spec.is_binary else "continuous"
            raise ConfigError("variant", f"{self.variant} cannot optimize the {kind} function {self.function}")

        if self.lam is None:
            self.lam = 2 if variant.is_binary else default_population_size(self.d)
        self.lam = _as_int("lambda", self.lam)
        if self.lam < 2:
            raise ConfigError("lambda", f"must be at least 2, got {self.lam}")
        if variant is Variant.CGA and self.lam != 2:
            raise ConfigError("lambda", f"the compact GA samples two points, got {self.lam}")

        self.K = _as_int("K", self.K)
        if self.K < 0:
            raise ConfigError("K", f"must be nonnegative, got {self.K}")
        self.trials = _as_int("trials", self.trials)
        if self.trials < 1:
            raise ConfigError("trials", f"must be at least 1, got {self.trials}")
        self.seed = _as_int("seed", self.seed)
        self.T = _as_float("T", self.T)
        self.alpha = _as_float("alpha", self.alpha)
        if not 0.0 < self.T < 0.5:
            raise ConfigError("T", f"must lie in (0, 1/2), got {self.T}")
        if variant is Variant.CGA and self.T != 0.25:
            raise ConfigError("T", f"the compact GA uses T = 0.25, got {self.T}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha", f"must lie in [0, 1], got {self.alpha}")
        if variant.is_binary:
            if self.eta is None:
                raise ConfigError("eta", "binary variants need a learning rate")
            self.eta = _as_float("eta", self.eta)
            if not self.eta > 0.0:
                raise ConfigError("eta", f"must be positive, got {self.eta}")
        elif self.eta is not None:
            logger.info("eta is ignored by %s; learning rates follow from d and lambda", self.variant)
            self.eta = None
        if self.budget is not None:
            self.budget = _as_int("budget", self.budget)
            if self.budget < 0:
                raise ConfigError("budget", f"must be nonnegative, got {self.budget}")
        if self.target is not None:
            self.target = _as_float("target", self.target)

    @property
    def spec(self) -> BenchmarkSpec:
        return default_spec(self.function, self.d)

    @property
    def effective_budget(self) -> int:
        return self.spec.budget if self.budget is None else self.budget

    @property
    def effective_target(self) -> float:
        return self.spec.target if self.target is None else self.target

    def to_dict(self):
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_dict(cls, values):
        values = dict(values)
        if "lambda" in values:
            values["lam"] = values.pop("lambda")
        return cls(**values)


def _as_int(name, value):
    if isinstance(value, bool):
        raise ConfigError(name, f"must be an integer, got {value!r}")
    try:
        as_int = int(value)
    except (TypeError, ValueError, OverflowError):
        raise ConfigError(name, f"must be an integer, got {value!r}") from None
    if as_int != value and not isinstance(value, str):
        raise ConfigError(name, f"must be an integer, got {value!r}")
    return as_int


def _as_float(name, value):
    if isinstance(value, bool):
        raise ConfigError(name, f"must be a number, got {value!r}")
    try:
        as_float = float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"must be a number, got {value!r}") from None
    if not np.isfinite(as_float):
        raise ConfigError(name, f"must be finite, got {value!r}")
    return as_float


@dataclass
class TrialResult:
    trial: int
    seed: int
    success: bool
    evaluations: int
    best_f: float
    iterations: int
    reason: str
    trace: Optional[pd.DataFrame] = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "trial": self.trial,
            "seed": self.seed,
            "success": self.success,
            "evaluations": self.evaluations,
            # JSON has no infinity; a trial without evaluations has no best value
            "best_f": self.best_f if np.isfinite(self.best_f) else None,
            "iterations": self.iterations,
            "reason": self.reason,
        }


class CountingObjective:
    """Counts evaluations and tracks the best value seen."""

    def __init__(self, fn, minimize: bool):
        self.fn = fn
        self.minimize = minimize
        self.count = 0
        self.best = np.inf if minimize else -np.inf

    def __call__(self, x):
        value = float(self.fn(x))
        self.count += 1
        if (value < self.best) if self.minimize else (value > self.best):
            self.best = value
        return value


def _initial_state(config: ExperimentConfig, spec: BenchmarkSpec, rng: np.random.Generator):
    variant = Variant(config.variant)
    if spec.is_binary:
        theta = BernoulliParams(np.full(spec.d, spec.theta0))
        state = PbilState(theta=theta, eta=config.eta, lam=config.lam, K=config.K, T=config.T, minimize=False)
        return state, pbil_step
    a, b = spec.init_range
    m0 = rng.uniform(a, b, size=spec.d)
    params = GaussianParams(m0, spec.sigma ** 2 * np.eye(spec.d))
    state = CmaState(params=params, variant=variant, lam=config.lam, K=config.K, alpha=config.alpha, minimize=True)
    return state, cma_step


def run_trial(config: ExperimentConfig, seed: int, trial: int = 0, record_trace: bool = False) -> TrialResult:
    """Run one optimizer until success or a failure condition; never raises on degeneracy."""
    spec = config.spec
    budget = config.effective_budget
    target = config.effective_target
    rng = np.random.default_rng(seed)
    objective = CountingObjective(spec.objective(), spec.minimize)
    state, step = _initial_state(config, spec, rng)

    rows = []
    iterations = 0
    while True:
        if spec.is_binary and objective.best >= spec.optimum:
            reason = OPTIMUM_SAMPLED
            break
        if not spec.is_binary and objective.best < target:
            reason = TARGET_REACHED
            break
        if objective.count >= budget:
            reason = BUDGET
            break
        if not spec.is_binary:
            eig = min_eigenvalue(state.params.C)
            if eig < spec.eigen_floor:
                reason = EIGEN_FLOOR
                break
        count_before = objective.count
        try:
            report = step(state, objective, rng)
        except CovarianceDegeneracyError as e:
            logger.debug("trial %d stopped at iteration %d: %s", trial, iterations, e)
            reason = DEGENERACY
            if record_trace:
                # the failed generation was still evaluated
                rows.append({
                    "iteration": iterations + 1,
                    "evaluations": objective.count,
                    "step_evaluations": objective.count - count_before,
                    "best_f": objective.best,
                    "min_eigenvalue": np.nan,
                })
            break
        iterations += 1
        if record_trace:
            row = {
                "iteration": iterations,
                "evaluations": objective.count,
                "step_evaluations": report.evaluations_consumed,
                "best_f": objective.best,
                "min_eigenvalue": np.nan if spec.is_binary else min_eigenvalue(state.params.C),
            }
            row.update({f"s{k}": v for k, v in enumerate(report.coefficient_sums)})
            rows.append(row)

    success = reason in SUCCESS_REASONS
    logger.info(
        "trial %d (seed %d): %s after %d evaluations, best f %.6g",
        trial, seed, reason, objective.count, objective.best,
    )
    return TrialResult(
        trial=trial,
        seed=seed,
        success=success,
        evaluations=objective.count,
        best_f=float(objective.best),
        iterations=iterations,
        reason=reason,
        trace=pd.DataFrame(rows) if record_trace else None,
    )


@dataclass
class ExperimentSummary:
    config: ExperimentConfig
    trials: List[TrialResult] = field(default_factory=list)

    @property
    def success_count(self):
        return sum(1 for t in self.trials if t.success)

    @property
    def success_probability(self):
        if not self.trials:
            return 0.0
        return self.success_count / len(self.trials)

    @property
    def mean_evals_success(self):
        evals = [t.evaluations for t in self.trials if t.success]
        if not evals:
            return None
        return float(np.mean(evals))

    @property
    def performance_metric(self):
        """Mean evaluations of successful runs over the success probability; None without successes."""
        mean = self.mean_evals_success
        if mean is None:
            return None
        return mean / self.success_probability

    def to_frame(self) -> pd.DataFrame:
        cfg = self.config.to_dict()
        rows = [{**{c: cfg[c] for c in CONFIG_COLUMNS}, **t.to_dict()} for t in self.trials]
        return pd.DataFrame(rows, columns=TRIAL_COLUMNS)

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "trials": [t.to_dict() for t in self.trials],
            "success_probability": self.success_probability,
            "mean_evals_success": self.mean_evals_success,
            "performance_metric": self.performance_metric,
        }


def run_experiment(config: ExperimentConfig, jobs: int = 1, record_trace: bool = False) -> ExperimentSummary:
    """Run config.trials independent trials with seeds base + i, in trial order."""
    if jobs < 1:
        raise ConfigError("jobs", f"must be at least 1, got {jobs}")

    def one(i):
        return run_trial(config, config.seed + i, trial=i, record_trace=record_trace)

    logger.info("running %d trial(s) of %s on %s (d=%d)", config.trials, config.variant, config.function, config.d)
    if jobs == 1:
        results = [one(i) for i in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(config.trials)))
    return ExperimentSummary(config=config, trials=results)


def persist_results(summary: ExperimentSummary, out_dir) -> List[str]:
    """Write trials.csv, summary.json and any per-trial traces; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    csv_path = os.path.join(out_dir, "trials.csv")
    summary.to_frame().to_csv(csv_path, index=False)
    written.append(csv_path)

    json_path = os.path.join(out_dir, "summary.json")
    with open(json_path, "w") as f:
        json.dump(summary.to_dict(), f, indent=2, allow_nan=False)
    written.append(json_path)

    for t in summary.trials:
        if t.trace is not None:
            trace_path = os.path.join(out_dir, f"trace_{t.trial}.csv")
            t.trace.to_csv(trace_path, index=False)
            written.append(trace_path)
    return written


def load_results(path) -> ExperimentSummary:
    """Read a persisted summary back from summary.json (or the directory holding it)."""
    if os.path.isdir(path):
        path = os.path.join(path, "summary.json")
    with open(path) as f:
        data = json.load(f)
    config = ExperimentConfig.from_dict(data["config"])
    worst = np.inf if config.spec.minimize else -np.inf
    trials = [TrialResult(**{**t, "best_f": worst if t["best_f"] is None else t["best_f"]}) for t in data["trials"]]
    return ExperimentSummary(config=config, trials=trials)
