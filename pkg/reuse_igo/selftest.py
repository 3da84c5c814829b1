"""
Fast invariant checks behind `python -m reuse_igo selftest`.

Each check returns (name, passed, detail). The weight scheme used for the
Gaussian checks can be swapped, which is how the checks are shown to catch a
broken weight integral.
"""

from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np
from scipy.stats import norm

from .algorithms import PbilState, pbil_step
from .benchmarks import onemax
from .distributions import BernoulliParams, GaussianParams, gaussian_sample
from .reuse_engine import ReuseArchive, estimator_is1, estimator_is2, rhat, weight_sum_identity
from .utility import LogHalf, StepThreshold, WeightScheme, rank_counts, utility_hat_plain

logger = logging.getLogger(__name__)

CheckResult = Tuple[str, bool, str]


def random_archive(rng: np.random.Generator, K: int, lam: int = 8, d: int = 3, pushes=None) -> ReuseArchive:
    """An archive of nearby Gaussians whose objective values are rounded to force ties."""
    archive = ReuseArchive(K)
    for _ in range(K + 1 if pushes is None else pushes):
        m = 0.3 * rng.standard_normal(d)
        C = np.diag(rng.uniform(0.5, 1.5, size=d))
        params = GaussianParams(m, C)
        X = gaussian_sample(params, lam, rng)
        f = np.round(np.sum(X * X, axis=1))
        archive.push(params, X, f)
    return archive


def check_weight_sums(scheme: WeightScheme, instances: int = 100, seed: int = 1) -> CheckResult:
    """Plain sums equal W(1) - W(0) = 1; reuse sums equal W(max q_le) - W(0)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        lam = int(rng.integers(2, 20))
        f = rng.integers(0, 4, size=lam).astype(float)
        w = utility_hat_plain(rank_counts(f), scheme, lam)
        worst = max(worst, abs(w.sum() / lam - 1.0))

        archive = random_archive(rng, K=int(rng.choice([1, 3, 5])))
        lhs, rhs = weight_sum_identity(archive, rhat(archive, scheme), scheme)
        worst = max(worst, abs(lhs - rhs))
    passed = worst < 1e-9
    return "weight-sum identity", passed, f"max deviation {worst:.2e}"


def check_weights_monotone(scheme: WeightScheme, lam: int = 16) -> CheckResult:
    """Distinct values: utilities are nonnegative and nonincreasing with rank."""
    f = np.arange(lam, dtype=float)
    w = utility_hat_plain(rank_counts(f), scheme, lam)
    passed = bool(np.all(w >= 0.0) and np.all(np.diff(w) <= 0.0))
    return "weights monotone in rank", passed, f"best {w[0]:.4f}, worst {w[-1]:.4f}"


def check_k0_reduction(scheme: WeightScheme, instances: int = 50, seed: int = 2) -> CheckResult:
    """With K = 0 the reuse coefficients equal the plain utilities bitwise."""
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(instances):
        lam = int(rng.integers(2, 16))
        d = int(rng.integers(1, 6))
        theta = BernoulliParams(rng.uniform(0.2, 0.8, size=d))
        X = (rng.random((lam, d)) < theta.theta).astype(np.int8)
        f = X.sum(axis=1).astype(float)
        archive = ReuseArchive(0).push(theta, X, f)
        step = StepThreshold()
        if not np.array_equal(rhat(archive, step, minimize=False), utility_hat_plain(rank_counts(f, minimize=False), step, lam)[None, :]):
            mismatches += 1

        g = random_archive(rng, K=0, lam=lam, d=d)
        plain = utility_hat_plain(rank_counts(g.current.f), scheme, lam)
        if not np.array_equal(rhat(g, scheme), plain[None, :]):
            mismatches += 1
    return "K=0 reduction", mismatches == 0, f"{mismatches} mismatch(es) in {2 * instances} cases"


def reference_cga(d: int, iterations: int, seed: int) -> np.ndarray:
    """Textbook compact GA on OneMax: move each differing bit 1/d toward the winner."""
    rng = np.random.default_rng(seed)
    theta = np.full(d, 0.5)
    history = []
    for _ in range(iterations):
        X = (rng.random((2, d)) < theta).astype(np.int8)
        a, b = X.sum(axis=1)
        if a != b:
            winner, loser = (X[0], X[1]) if a > b else (X[1], X[0])
            theta = np.clip(theta + (winner.astype(float) - loser) / d, 1.0 / d, 1.0 - 1.0 / d)
        history.append(theta.copy())
    return np.array(history)


def check_cga_equivalence(d: int = 16, iterations: int = 500, seed: int = 3) -> CheckResult:
    """PBIL with lambda = 2, K = 0, T = 1/4, eta = 2/d tracks the compact GA."""
    reference = reference_cga(d, iterations, seed)
    rng = np.random.default_rng(seed)
    state = PbilState(theta=BernoulliParams(np.full(d, 0.5)), eta=2.0 / d, lam=2, K=0, T=0.25)
    trajectory = []
    for _ in range(iterations):
        pbil_step(state, onemax, rng)
        trajectory.append(state.theta.theta)
    differing = int(np.sum(np.any(np.array(trajectory) != reference, axis=1)))
    return "cGA equivalence", differing == 0, f"{differing} of {iterations} iterations differ bitwise"


def check_estimators(replications: int = 2000, n: int = 200, seed: int = 4) -> CheckResult:
    """Both mixture estimators of E[x] under N(0, 1) land near 0."""
    rng = np.random.default_rng(seed)
    locs = [0.0, 1.0]
    samples = [rng.normal(loc, 1.0, size=(replications, n)) for loc in locs]
    proposals = [lambda x, loc=loc: norm.logpdf(x, loc=loc) for loc in locs]
    c = np.full(len(locs), 1.0 / len(locs))
    worst = 0.0
    for estimator in (estimator_is1, estimator_is2):
        est = estimator(lambda x: x, samples, norm.logpdf, proposals, c)
        se = est.std(ddof=1) / np.sqrt(replications)
        worst = max(worst, abs(est.mean()) / se)
    return "estimator unbiasedness", worst < 4.0, f"largest deviation {worst:.2f} SE"


def run_checks(log_scheme: WeightScheme = None) -> List[CheckResult]:
    scheme = LogHalf() if log_scheme is None else log_scheme
    return [
        check_weight_sums(scheme),
        check_weights_monotone(scheme),
        check_k0_reduction(scheme),
        check_cga_equivalence(),
        check_estimators(),
    ]


def run_selftest(log_scheme: WeightScheme = None) -> bool:
    """Print one line per check; True when all pass."""
    print("\n" + "=" * 60)
    print("SELFTEST")
    print("=" * 60)
    results = run_checks(log_scheme)
    for name, passed, detail in results:
        print(f"{'✓' if passed else '✗'} {name}: {detail}")
    failed = [name for name, passed, _ in results if not passed]
    if failed:
        logger.warning("selftest failed: %s", ", ".join(failed))
    print(f"\n{len(results) - len(failed)}/{len(results)} checks passed")
    return not failed
