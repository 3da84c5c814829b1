"""
Optimizer state machines.

Bernoulli family: PBIL / compact GA with sample reuse (three-level step
utility). Gaussian family: the pure rank-mu CMA-ES, its reuse variants
(A) reuse-mc, (B) reuse-c, the rank-one hybrid and its reuse variants
(C) reuse-mc-rank-one, (D) reuse-c-rank-one, and pure rank-mu with
importance mixing. No variant adapts a separate step size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .distributions import (
    BernoulliParams,
    GaussianParams,
    bernoulli_nat_grad,
    bernoulli_sample,
    clamp_bernoulli,
    gaussian_log_density,
    gaussian_nat_grad_cov,
    gaussian_nat_grad_mean,
    gaussian_sample,
    symmetrize,
)
from .reuse_engine import GenerationRecord, ReuseArchive, coefficient_sums, nat_grad_estimate, rhat
from .utility import LogHalf, StepThreshold, cma_rank_weights, cma_standard_weights, mueff

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]

# phase-2 draws allowed per iteration, in units of lambda
IM_DRAW_GUARD = 1000


class Variant(str, Enum):
    PBIL = "pbil"
    CGA = "cga"
    PURE_RANK_MU = "pure-rank-mu"
    REUSE_MC = "reuse-mc"
    REUSE_C = "reuse-c"
    HYBRID = "hybrid"
    REUSE_MC_RANK_ONE = "reuse-mc-rank-one"
    REUSE_C_RANK_ONE = "reuse-c-rank-one"
    IMPORTANCE_MIXING = "importance-mixing"

    @classmethod
    def parse(cls, name) -> "Variant":
        if isinstance(name, cls):
            return name
        key = str(name).strip()
        alias = _ALIASES.get(key) or _ALIASES.get(key.lower())
        if alias is not None:
            return alias
        try:
            return cls(key.lower())
        except ValueError:
            valid = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown variant {name!r}; valid variants: {valid}") from None

    @property
    def is_binary(self):
        return self in (Variant.PBIL, Variant.CGA)

    @property
    def reuses_mean(self):
        return self in (Variant.REUSE_MC, Variant.REUSE_MC_RANK_ONE)

    @property
    def reuses_cov(self):
        return self in (Variant.REUSE_MC, Variant.REUSE_C, Variant.REUSE_MC_RANK_ONE, Variant.REUSE_C_RANK_ONE)

    @property
    def rank_one(self):
        return self in (Variant.HYBRID, Variant.REUSE_MC_RANK_ONE, Variant.REUSE_C_RANK_ONE)


_ALIASES = {
    "A": Variant.REUSE_MC,
    "B": Variant.REUSE_C,
    "C": Variant.REUSE_MC_RANK_ONE,
    "D": Variant.REUSE_C_RANK_ONE,
    "rank-mu": Variant.PURE_RANK_MU,
    "im": Variant.IMPORTANCE_MIXING,
}


@dataclass(frozen=True)
class CmaRates:
    c_m: float = 1.0
    c_c: float = 0.0
    c_1: float = 0.0
    c_mu: float = 0.0


@dataclass
class StepReport:
    evaluations_consumed: int
    best_f_in_step: float
    params_after: object
    # (1/lambda) sum_i r_hat per archived generation, newest first; empty without reuse
    coefficient_sums: np.ndarray = field(default_factory=lambda: np.empty(0))


def evaluate(objective: Objective, X) -> np.ndarray:
    """Objective value of every row of X, in row order."""
    return np.fromiter((objective(x) for x in X), dtype=float, count=len(X))


def _best(f, minimize):
    if f.size == 0:
        return np.nan
    return float(f.min() if minimize else f.max())


# ----------------------------------------------------------------
# Learning rates
# ----------------------------------------------------------------

def _rank_mu_rate(d, mu_eff):
    return 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0) ** 2 + 2.0 * mu_eff / 2.0)


def learning_rates_rank_mu(d: int, lam: int, mu_eff: Optional[float] = None) -> CmaRates:
    """c_m = 1 and the default rank-mu rate; mu_eff defaults to that of the CMA weights."""
    if mu_eff is None:
        mu_eff = mueff(cma_standard_weights(lam))
    return CmaRates(c_m=1.0, c_mu=_rank_mu_rate(d, mu_eff))


def learning_rates_hybrid(d: int, lam: int, mu_eff: Optional[float] = None) -> CmaRates:
    """Rates of the rank-one plus rank-mu update, c_1 + c_mu <= 1."""
    if mu_eff is None:
        mu_eff = mueff(cma_standard_weights(lam))
    c_c = (4.0 + mu_eff / d) / (lam + 4.0 + 2.0 * mu_eff / lam)
    c_1 = 2.0 / ((d + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, _rank_mu_rate(d, mu_eff))
    return CmaRates(c_m=1.0, c_c=c_c, c_1=c_1, c_mu=c_mu)


def default_rates(variant: Variant, d: int, lam: int) -> CmaRates:
    if Variant.parse(variant).rank_one:
        return learning_rates_hybrid(d, lam)
    return learning_rates_rank_mu(d, lam)


def evolution_path_update(pc, c_c: float, mu_eff: float, weighted_step) -> np.ndarray:
    """pc <- (1 - c_c) pc + sqrt(c_c (2 - c_c) mu_eff) * weighted_step."""
    if not 0.0 < c_c <= 1.0:
        raise ValueError(f"cumulation rate must lie in (0, 1], got {c_c}")
    return (1.0 - c_c) * np.asarray(pc, dtype=float) + np.sqrt(c_c * (2.0 - c_c) * mu_eff) * np.asarray(weighted_step)


# ----------------------------------------------------------------
# PBIL / compact GA
# ----------------------------------------------------------------

@dataclass
class PbilState:
    theta: BernoulliParams
    eta: float
    lam: int = 2
    K: int = 0
    T: float = 0.25
    minimize: bool = False
    archive: ReuseArchive = field(init=False, repr=False)
    iteration: int = 0

    def __post_init__(self):
        if self.lam < 2:
            raise ValueError(f"lambda must be at least 2, got {self.lam}")
        self.archive = ReuseArchive(self.K)


def pbil_step(state: PbilState, objective: Objective, rng: np.random.Generator) -> StepReport:
    """Sample, evaluate, archive, then theta += eta * reuse natural gradient, clamped."""
    theta = state.theta
    X = bernoulli_sample(theta, state.lam, rng)
    f = evaluate(objective, X)
    state.archive.push(theta, X, f)

    r = rhat(state.archive, StepThreshold(state.T), minimize=state.minimize)
    step = nat_grad_estimate(state.archive, r, lambda Xs: bernoulli_nat_grad(theta, Xs))
    state.theta = clamp_bernoulli(BernoulliParams(theta.theta + state.eta * step), theta.dim)
    state.iteration += 1
    return StepReport(
        evaluations_consumed=state.lam,
        best_f_in_step=_best(f, state.minimize),
        params_after=state.theta,
        coefficient_sums=coefficient_sums(r),
    )


# ----------------------------------------------------------------
# CMA-ES family
# ----------------------------------------------------------------

@dataclass
class CmaState:
    params: GaussianParams
    variant: Variant
    lam: int
    rates: Optional[CmaRates] = None
    K: int = 0
    alpha: float = 0.0
    minimize: bool = True
    pc: Optional[np.ndarray] = None
    archive: ReuseArchive = field(init=False, repr=False)
    # last assembled population, for importance mixing
    previous: Optional[GenerationRecord] = field(default=None, repr=False)
    iteration: int = 0

    def __post_init__(self):
        self.variant = Variant.parse(self.variant)
        if self.variant.is_binary:
            raise ValueError(f"{self.variant.value} is not a Gaussian variant")
        if self.lam < 2:
            raise ValueError(f"lambda must be at least 2, got {self.lam}")
        if self.rates is None:
            self.rates = default_rates(self.variant, self.params.dim, self.lam)
        if self.pc is None:
            self.pc = np.zeros(self.params.dim)
        # without reuse only the current generation is ever read
        self.archive = ReuseArchive(self.K if self.variant.reuses_cov else 0)
        self.mu_eff = mueff(cma_standard_weights(self.lam))


def _rank_mu_update(state: CmaState, X, f, r_hat=None):
    """New (m, C, pc) from the current population and, for reuse variants, r_hat over the archive."""
    params = state.params
    variant = state.variant
    rates = state.rates
    w = cma_rank_weights(f, state.minimize)

    if variant.reuses_mean:
        dm = nat_grad_estimate(state.archive, r_hat, lambda Xs: gaussian_nat_grad_mean(params, Xs))
    else:
        dm = np.tensordot(w, gaussian_nat_grad_mean(params, X), axes=1)

    if variant.reuses_cov:
        dC = nat_grad_estimate(state.archive, r_hat, lambda Xs: gaussian_nat_grad_cov(params, Xs))
    else:
        dC = np.tensordot(w, gaussian_nat_grad_cov(params, X), axes=1)

    C = params.C + rates.c_mu * dC
    pc = state.pc
    if variant.rank_one:
        # the path always follows the current samples with CMA weights
        weighted_step = np.tensordot(w, gaussian_nat_grad_mean(params, X), axes=1)
        pc = evolution_path_update(pc, rates.c_c, state.mu_eff, weighted_step)
        C = C + rates.c_1 * (np.outer(pc, pc) - params.C)
    m = params.m + rates.c_m * dm
    return m, symmetrize(C), pc


def cma_step(state: CmaState, objective: Objective, rng: np.random.Generator) -> StepReport:
    """One generation of the configured Gaussian variant.

    Raises CovarianceDegeneracyError when the updated covariance is not
    positive definite; the state keeps its previous parameters in that case.
    """
    if state.variant is Variant.IMPORTANCE_MIXING:
        return importance_mixing_step(state, objective, rng)

    params = state.params
    X = gaussian_sample(params, state.lam, rng)
    f = evaluate(objective, X)
    state.archive.push(params, X, f)

    r = None
    sums = np.empty(0)
    if state.variant.reuses_cov:
        r = rhat(state.archive, LogHalf(), minimize=state.minimize)
        sums = coefficient_sums(r)
        logger.debug("iteration %d coefficient sums %s", state.iteration, np.array2string(sums, precision=3))

    m, C, pc = _rank_mu_update(state, X, f, r)
    state.params = GaussianParams(m, C)
    state.pc = pc
    state.iteration += 1
    return StepReport(
        evaluations_consumed=state.lam,
        best_f_in_step=_best(f, state.minimize),
        params_after=state.params,
        coefficient_sums=sums,
    )


def importance_mixing_step(state: CmaState, objective: Objective, rng: np.random.Generator) -> StepReport:
    """Pure rank-mu update on a population recycled from the previous one.

    Phase 1 keeps each previous point with probability
    min(1, (1 - alpha) p_t / p_{t-1}) without re-evaluating it; phase 2 draws
    from p_t and accepts with probability max(alpha, 1 - p_{t-1} / p_t) until
    lambda points are assembled. Only phase-2 acceptances are evaluated. Once
    IM_DRAW_GUARD * lambda phase-2 draws are spent in one iteration, the
    remaining slots take the next draws unconditionally.
    """
    params = state.params
    lam = state.lam
    alpha = state.alpha
    prev = state.previous

    if prev is None:
        X = gaussian_sample(params, lam, rng)
        f = evaluate(objective, X)
        evaluations = lam
    else:
        log_cur = gaussian_log_density(params, prev.X)
        log_old = gaussian_log_density(prev.params, prev.X)
        keep_prob = np.minimum(1.0, (1.0 - alpha) * np.exp(log_cur - log_old))
        keep = rng.random(lam) < keep_prob

        needed = lam - int(keep.sum())
        new_X, new_f = [], []
        budget = IM_DRAW_GUARD * lam
        attempts = 0
        forced = 0
        while len(new_X) < needed:
            batch = gaussian_sample(params, needed - len(new_X), rng)
            ratio = np.exp(gaussian_log_density(prev.params, batch) - gaussian_log_density(params, batch))
            accept = rng.random(len(batch)) < np.maximum(alpha, 1.0 - ratio)
            for x, ok in zip(batch, accept):
                attempts += 1
                if not ok:
                    if attempts <= budget:
                        continue
                    # budget spent: every further draw is taken
                    forced += 1
                new_X.append(x)
                new_f.append(float(objective(x)))
                if len(new_X) == needed:
                    break
        if forced:
            logger.warning(
                "importance mixing used its %d-draw budget; forced %d evaluation(s)", budget, forced
            )

        evaluations = len(new_X)
        X = np.concatenate([prev.X[keep], np.reshape(new_X, (-1, params.dim))])
        f = np.concatenate([prev.f[keep], np.asarray(new_f, dtype=float)])
        logger.debug("importance mixing kept %d, evaluated %d", lam - needed, evaluations)

    # the reused points enter with y = x - m_t, like fresh ones
    m, C, _ = _rank_mu_update(state, X, f)
    new_params = GaussianParams(m, C)
    state.previous = GenerationRecord(params=params, X=X, f=f, generation=state.iteration)
    state.params = new_params
    state.iteration += 1
    return StepReport(
        evaluations_consumed=evaluations,
        best_f_in_step=_best(f, state.minimize),
        params_after=state.params,
    )
