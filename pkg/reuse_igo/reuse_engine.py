"""
Sample reuse through importance sampling.

The archive keeps the last K+1 generations (newest first) together with the
log-likelihood table

    L[k, l, i] = ln p_{theta(t-k)}(x_i^(t-l))

so that the likelihood ratio of every archived sample against the uniform
mixture of the archived distributions costs a log-sum-exp over one axis:

    p_t(x) / p_bar(x) = (K_eff + 1) / sum_l exp(L[l, k, i] - L[0, k, i])

On every push only the new row (all samples under the new parameters) and the
new column (the new samples under all retained parameters) are evaluated.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .distributions import DimensionMismatchError, log_density
from .utility import IsQuantiles, WeightScheme, is_quantiles, utility_hat_is

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GenerationRecord:
    """One generation: the parameters it was sampled from, its samples and their values."""

    params: object
    X: np.ndarray
    f: np.ndarray
    generation: int

    def __post_init__(self):
        X = np.array(self.X, copy=True)
        f = np.array(self.f, dtype=float, copy=True)
        if X.ndim != 2 or f.shape != (X.shape[0],):
            raise ValueError(f"{f.size} objective values for samples of shape {X.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("archived objective values must be finite")
        X.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "f", f)

    @property
    def lam(self):
        return self.f.size


class ReuseArchive:
    """Rolling window over the last K+1 generations with a log-likelihood cache."""

    def __init__(self, K: int):
        if K < 0:
            raise ValueError(f"K must be nonnegative, got {K}")
        self.K = K
        self.generations = deque(maxlen=K + 1)
        self.loglik = np.empty((0, 0, 0))
        self._counter = 0

    def __len__(self):
        return len(self.generations)

    @property
    def K_eff(self):
        return len(self.generations) - 1

    @property
    def lam(self):
        return self.generations[0].lam if self.generations else 0

    @property
    def current(self) -> GenerationRecord:
        return self.generations[0]

    def push(self, params, X, f) -> "ReuseArchive":
        """Insert the newest generation, evict beyond K+1 and extend the log-likelihood table."""
        record = GenerationRecord(params=params, X=X, f=f, generation=self._counter)
        if self.generations:
            if record.lam != self.lam:
                raise ValueError(f"generation of size {record.lam} pushed into an archive of size {self.lam}")
            if record.X.shape[1] != self.current.X.shape[1]:
                raise DimensionMismatchError(
                    f"sample dimension {record.X.shape[1]} does not match archived dimension {self.current.X.shape[1]}"
                )

        kept = list(self.generations)[: self.K]
        n = len(kept) + 1
        table = np.empty((n, n, record.lam))
        if kept:
            table[1:, 1:] = self.loglik[: n - 1, : n - 1]
        # new parameters against every retained sample (row 0), new samples against old parameters (column 0)
        table[0, 0] = log_density(params, record.X)
        for l, g in enumerate(kept, start=1):
            table[0, l] = log_density(params, g.X)
            table[l, 0] = log_density(g.params, record.X)

        self.generations.appendleft(record)
        self.loglik = table
        self._counter += 1
        if not np.all(np.isfinite(table)):
            logger.warning("non-finite log-likelihood in archive at generation %d", record.generation)
        logger.debug("archive holds %d generation(s)", n)
        return self

    def stacked(self):
        """All archived samples and values, generation-major (newest first)."""
        X = np.concatenate([g.X for g in self.generations])
        f = np.concatenate([g.f for g in self.generations])
        return X, f


def archive_push(archive: ReuseArchive, params, X, f) -> ReuseArchive:
    return archive.push(params, X, f)


def likelihood_ratios(archive: ReuseArchive) -> np.ndarray:
    """rho[k, i] = p_t(x_i^(t-k)) / p_bar(x_i^(t-k)) for every archived sample."""
    if not len(archive):
        raise ValueError("likelihood ratios of an empty archive")
    L = archive.loglik
    n = L.shape[0]
    log_rho = np.log(n) - logsumexp(L - L[0][None, :, :], axis=0)
    return np.exp(log_rho)


def rhat(archive: ReuseArchive, scheme: WeightScheme, minimize: bool = True) -> np.ndarray:
    """Utility times likelihood ratio, r_hat[k, i], for every archived sample."""
    rho = likelihood_ratios(archive)
    _, f = archive.stacked()
    n, lam = rho.shape
    rho_flat = rho.ravel()
    q = is_quantiles(f, rho_flat, lam=lam, n_generations=n, minimize=minimize)

    out = np.zeros_like(rho_flat)
    # an underflowed ratio contributes nothing and leaves its quantile interval empty
    live = rho_flat > 0.0
    if np.all(live):
        out = utility_hat_is(q, scheme) * rho_flat
    else:
        q_live = IsQuantiles(q_le=q.q_le[live], q_lt=q.q_lt[live], width=q.width[live])
        out[live] = utility_hat_is(q_live, scheme) * rho_flat[live]
    return out.reshape(n, lam)


def nat_grad_estimate(archive: ReuseArchive, r_hat: np.ndarray, grad: Callable[[np.ndarray], np.ndarray]):
    """(1 / (lam (K_eff+1))) sum_k sum_i r_hat[k, i] grad(x_i^(t-k)).

    `grad` maps the stacked samples (N, d) to per-sample gradients (N, ...).
    """
    X, _ = archive.stacked()
    coeffs = np.asarray(r_hat, dtype=float).ravel()
    n = len(archive)
    return np.tensordot(coeffs, grad(X), axes=1) / (archive.lam * n)


def weight_sum_identity(archive: ReuseArchive, r_hat: np.ndarray, scheme: WeightScheme, minimize: bool = True):
    """Both sides of sum r_hat / (lam (K+1)) = W(max q_le) - W(0)."""
    n = len(archive)
    lhs = float(np.sum(r_hat) / (archive.lam * n))
    rho = likelihood_ratios(archive)
    _, f = archive.stacked()
    q = is_quantiles(f, rho.ravel(), lam=archive.lam, n_generations=n, minimize=minimize)
    rhs = float(scheme.W(q.q_le.max()) - scheme.W(0.0))
    return lhs, rhs


def coefficient_sums(r_hat: np.ndarray) -> np.ndarray:
    """Per-generation sums (1/lam) sum_i r_hat[k, i], newest generation first."""
    r_hat = np.asarray(r_hat, dtype=float)
    return r_hat.sum(axis=1) / r_hat.shape[1]


# ----------------------------------------------------------------
# Estimator oracle
#
# Two unbiased estimators of E_target[g] from samples of several proposals.
# They validate the variance claim behind the mixture weighting and are not
# used by the optimizers. Samples of proposal j are given as an array whose
# last axis holds the n_j draws; leading axes are independent replications.
# ----------------------------------------------------------------

def _check_mixture(samples, proposal_logpdfs, c):
    c = np.asarray(c, dtype=float)
    if len(samples) != len(proposal_logpdfs) or c.size != len(samples):
        raise ValueError("one sample set, one proposal and one coefficient per distribution")
    if np.any(c < 0.0) or not np.isclose(c.sum(), 1.0):
        raise ValueError("mixing coefficients must be nonnegative and sum to one")
    return c


def estimator_is1(
    g: Callable,
    samples: Sequence[np.ndarray],
    target_logpdf: Callable,
    proposal_logpdfs: Sequence[Callable],
    c,
):
    """Average of per-proposal importance sampling estimates:
    sum_j (1/n_j) sum_i g(x) c_j p_t(x) / p_j(x)."""
    c = _check_mixture(samples, proposal_logpdfs, c)
    total = 0.0
    for x, logp_j, c_j in zip(samples, proposal_logpdfs, c):
        log_p_j = logp_j(x)
        if np.any(np.isneginf(log_p_j)):
            raise ZeroDivisionError("proposal density vanishes at one of its samples")
        weight = np.exp(target_logpdf(x) - log_p_j)
        total = total + c_j * np.mean(g(x) * weight, axis=-1)
    return total


def estimator_is2(
    g: Callable,
    samples: Sequence[np.ndarray],
    target_logpdf: Callable,
    proposal_logpdfs: Sequence[Callable],
    c,
):
    """Mixture importance sampling estimate:
    sum_j (1/n_j) sum_i g(x) c_j p_t(x) / sum_k c_k p_k(x)."""
    c = _check_mixture(samples, proposal_logpdfs, c)
    with np.errstate(divide="ignore"):
        log_c = np.log(c)
    total = 0.0
    for x, c_j in zip(samples, c):
        log_mix = logsumexp([lc + logp(x) for lc, logp in zip(log_c, proposal_logpdfs)], axis=0)
        if np.any(np.isneginf(log_mix)):
            raise ZeroDivisionError("mixture density vanishes at one of the samples")
        weight = np.exp(target_logpdf(x) - log_mix)
        total = total + c_j * np.mean(g(x) * weight, axis=-1)
    return total
