"""
Rank-based utilities.

A weight function w on quantiles is represented by its integral W, which is
all the tie-aware utility estimate needs:

    w_hat = [W(q_le) - W(q_lt)] / (q_le - q_lt)

where q_le / q_lt are the (plain or importance-sampled) probabilities of
drawing a weakly / strictly better point. With plain ranking the quantiles are
rk/lambda; with sample reuse they are likelihood-ratio weighted sums over the
whole archive and may exceed 1, so every W is defined on [0, inf).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)


class InvalidObjectiveError(ValueError):
    """Raised when an objective value cannot be ranked (NaN)."""


class QuantileOrderError(ValueError):
    """Raised when q_le <= q_lt, which no valid quantile estimate produces."""


# ----------------------------------------------------------------
# Weight integrals
# ----------------------------------------------------------------

def W_step(s, T: float = 0.25):
    """Integral of the three-level step weight with threshold T.

    The last branch (1 - s) / 2T is used for every s > 1 - T, including s > 1.
    """
    if not 0.0 < T < 0.5:
        raise ValueError(f"threshold T must lie in (0, 1/2), got {T}")
    s = np.asarray(s, dtype=float)
    out = np.where(s <= T, s / (2.0 * T), 0.5)
    out = np.where(s > 1.0 - T, (1.0 - s) / (2.0 * T), out)
    return out if out.ndim else float(out)


def W_log(s):
    """Integral of w(s) = -2 ln(2s) on s <= 1/2 (zero beyond); equals 1 past 1/2."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = 2.0 * s - 2.0 * s * np.log(2.0 * s)
    out = np.where(s <= 0.0, 0.0, np.where(s <= 0.5, inner, 1.0))
    return out if out.ndim else float(out)


class WeightScheme:
    """A weight function w given through its integral W on [0, inf)."""

    name = "scheme"

    def W(self, s):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


@dataclass(frozen=True, repr=False)
class StepThreshold(WeightScheme):
    """+1/2T on the best T fraction, -1/2T on the worst T fraction, 0 between."""

    T: float = 0.25
    name = "step"

    def __post_init__(self):
        if not 0.0 < self.T < 0.5:
            raise ValueError(f"threshold T must lie in (0, 1/2), got {self.T}")

    def W(self, s):
        return W_step(s, self.T)

    def __repr__(self):
        return f"StepThreshold(T={self.T})"


@dataclass(frozen=True, repr=False)
class LogHalf(WeightScheme):
    """The continuum limit of the CMA-ES weights."""

    name = "log-half"

    def W(self, s):
        return W_log(s)


@dataclass(frozen=True, repr=False)
class CmaStandard(WeightScheme):
    """CMA-ES default weights as a weight scheme over lambda ranks.

    W is the running sum of the rank weights at the grid points k/lambda,
    linear in between and constant (= 1) beyond s = 1, so the tie formula
    averages the weights of the tied ranks.
    """

    lam: int
    name = "cma"

    def W(self, s):
        grid = np.arange(self.lam + 1) / self.lam
        cum = np.concatenate(([0.0], np.cumsum(cma_standard_weights(self.lam))))
        out = np.interp(np.asarray(s, dtype=float), grid, cum)
        return out if out.ndim else float(out)

    def __repr__(self):
        return f"CmaStandard(lam={self.lam})"


# ----------------------------------------------------------------
# Ranking
# ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RankCounts:
    """Per-candidate counts of weakly (rk_le) and strictly (rk_lt) better samples."""

    rk_le: np.ndarray
    rk_lt: np.ndarray


@dataclass(frozen=True, eq=False)
class IsQuantiles:
    """Importance-sampled quantile estimates; q_lt < q_le, not bounded by 1.

    `width` is the ratio mass of each sample's tie group over the total. It is
    summed directly, so it stays positive where q_le - q_lt rounds to zero.
    """

    q_le: np.ndarray
    q_lt: np.ndarray
    width: Optional[np.ndarray] = None


def _as_minimized(fvals, minimize):
    f = np.asarray(fvals, dtype=float)
    if f.ndim != 1:
        raise ValueError(f"objective values must form a vector, got shape {f.shape}")
    if np.any(np.isnan(f)):
        raise InvalidObjectiveError("objective values contain NaN")
    return f if minimize else -f


def rank_counts(fvals, minimize: bool = True) -> RankCounts:
    """Count weakly and strictly better samples for each sample (ties by exact equality)."""
    f = _as_minimized(fvals, minimize)
    if f.size < 1:
        raise ValueError("at least one objective value is required")
    sorted_f = np.sort(f)
    rk_le = np.searchsorted(sorted_f, f, side="right")
    rk_lt = np.searchsorted(sorted_f, f, side="left")
    return RankCounts(rk_le=rk_le, rk_lt=rk_lt)


def is_quantiles(fvals, ratios, lam: int, n_generations: int = 1, minimize: bool = True) -> IsQuantiles:
    """Likelihood-ratio weighted quantiles over every archived sample.

    q_le(x) = sum_j 1{f_j <= f(x)} rho_j / (lam * n_generations), q_lt likewise
    with strict inequality. With all ratios equal to one and a single
    generation this is rk / lam exactly.
    """
    f = _as_minimized(fvals, minimize)
    rho = np.asarray(ratios, dtype=float)
    if rho.shape != f.shape:
        raise ValueError(f"{rho.size} ratios for {f.size} objective values")
    if np.any(~np.isfinite(rho)) or np.any(rho < 0.0):
        raise ValueError("likelihood ratios must be finite and nonnegative")

    if f.size == 0:
        return IsQuantiles(q_le=np.empty(0), q_lt=np.empty(0), width=np.empty(0))

    order = np.argsort(f, kind="stable")
    sorted_f = f[order]
    sorted_rho = rho[order]
    cum = np.concatenate(([0.0], np.cumsum(sorted_rho)))
    total = lam * n_generations
    q_le = cum[np.searchsorted(sorted_f, f, side="right")] / total
    q_lt = cum[np.searchsorted(sorted_f, f, side="left")] / total

    starts = np.flatnonzero(np.concatenate(([True], sorted_f[1:] != sorted_f[:-1])))
    group_mass = np.add.reduceat(sorted_rho, starts)
    group = np.searchsorted(starts, np.arange(f.size), side="right") - 1
    width = np.empty_like(rho)
    width[order] = group_mass[group] / total
    return IsQuantiles(q_le=q_le, q_lt=q_lt, width=width)


# ----------------------------------------------------------------
# Utility estimates
# ----------------------------------------------------------------

def utility_hat_is(q: IsQuantiles, scheme: WeightScheme) -> np.ndarray:
    """Tie-aware utility [W(q_le) - W(q_lt)] / (q_le - q_lt).

    When q carries group widths they are the denominator. A sample whose ratio
    is absorbed by rounding then has W(q_le) == W(q_lt) and gets utility 0,
    which keeps the telescoping weight sum exact.
    """
    q_le = np.asarray(q.q_le, dtype=float)
    q_lt = np.asarray(q.q_lt, dtype=float)
    width = q_le - q_lt if q.width is None else np.asarray(q.width, dtype=float)
    if np.any(width <= 0.0) or np.any(q_le < q_lt):
        raise QuantileOrderError(f"q_le must exceed q_lt; smallest gap is {width.min()}")
    return (np.asarray(scheme.W(q_le)) - np.asarray(scheme.W(q_lt))) / width


def utility_hat_plain(counts: RankCounts, scheme: WeightScheme, lam: int) -> np.ndarray:
    """Utility from plain ranking among the lam current samples."""
    # exactly what is_quantiles gives for unit ratios
    q = IsQuantiles(
        q_le=counts.rk_le / lam,
        q_lt=counts.rk_lt / lam,
        width=(counts.rk_le - counts.rk_lt) / lam,
    )
    return utility_hat_is(q, scheme)


def cma_standard_weights(lam: int) -> np.ndarray:
    """Default CMA-ES recombination weights by rank, nonnegative and summing to 1."""
    if lam < 2:
        raise ValueError(f"lambda must be at least 2, got {lam}")
    raw = np.maximum(0.0, np.log((lam + 1) / 2.0) - np.log(np.arange(1, lam + 1)))
    return raw / raw.sum()


def cma_rank_weights(fvals, minimize: bool = True) -> np.ndarray:
    """CMA weight per sample; tied samples share the mean weight of their ranks."""
    counts = rank_counts(fvals, minimize)
    lam = counts.rk_le.size
    weights = cma_standard_weights(lam)
    out = weights[counts.rk_le - 1]
    tied = counts.rk_le - counts.rk_lt > 1
    if np.any(tied):
        cum = np.concatenate(([0.0], np.cumsum(weights)))
        out = out.copy()
        out[tied] = (cum[counts.rk_le[tied]] - cum[counts.rk_lt[tied]]) / (counts.rk_le[tied] - counts.rk_lt[tied])
    return out


def mueff(weights) -> float:
    """Effective selection mass 1 / sum(w^2) of weights summing to one."""
    w = np.asarray(weights, dtype=float)
    sq = np.sum(w * w)
    if sq == 0.0:
        raise ValueError("effective selection mass is undefined for all-zero weights")
    return float(1.0 / sq)
