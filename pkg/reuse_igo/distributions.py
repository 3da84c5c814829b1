"""
Search distributions for the IGO optimizers.

Bernoulli vectors on bit strings and multivariate Gaussians on R^d, with
sampling, log-densities and the closed-form natural gradients of the
log-likelihood. The Cholesky factor of a Gaussian covariance is computed once
per parameter snapshot and serves both sampling and log-density evaluation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import singledispatch

import numpy as np
import scipy.linalg as slin

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


class DimensionMismatchError(ValueError):
    """Raised when a sample and a parameter vector disagree on dimension."""


class CovarianceDegeneracyError(np.linalg.LinAlgError):
    """Raised when a covariance matrix is not positive definite."""


def _frozen_copy(a, dtype=float):
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class BernoulliParams:
    """Probability vector theta of a product of independent Bernoulli bits."""

    theta: np.ndarray

    def __post_init__(self):
        theta = _frozen_copy(self.theta)
        if theta.ndim != 1 or theta.size < 1:
            raise DimensionMismatchError(f"theta must be a non-empty vector, got shape {theta.shape}")
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self):
        return self.theta.size


@dataclass(frozen=True, eq=False)
class GaussianParams:
    """Mean vector m and covariance C of N(m, C).

    The lower Cholesky factor is computed on construction; a covariance that
    cannot be factorized raises CovarianceDegeneracyError.
    """

    m: np.ndarray
    C: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = _frozen_copy(self.m)
        C = _frozen_copy(self.C)
        if m.ndim != 1 or C.shape != (m.size, m.size):
            raise DimensionMismatchError(f"mean of shape {m.shape} does not fit covariance of shape {C.shape}")
        try:
            chol = slin.cholesky(C, lower=True)
        except np.linalg.LinAlgError as e:
            raise CovarianceDegeneracyError(f"covariance is not positive definite: {e}") from e
        if not np.all(np.isfinite(chol)):
            raise CovarianceDegeneracyError("covariance factor is not finite")
        chol.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self):
        return self.m.size

    @property
    def log_det(self):
        return 2.0 * np.sum(np.log(np.diag(self.chol)))


def _check_dim(x, d):
    x = np.asarray(x)
    if x.shape[-1] != d:
        raise DimensionMismatchError(f"sample dimension {x.shape[-1]} does not match parameter dimension {d}")
    return x


# ----------------------------------------------------------------
# Bernoulli family
# ----------------------------------------------------------------

def bernoulli_sample(params: BernoulliParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` bit strings, one per row."""
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    return (rng.random((count, params.dim)) < params.theta).astype(np.int8)


def bernoulli_log_density(params: BernoulliParams, x) -> np.ndarray | float:
    """Log probability mass of one bit string or of each row of a batch."""
    x = _check_dim(x, params.dim)
    theta = params.theta
    # x in {0, 1}, so select the log of the matching factor instead of multiplying
    terms = np.where(x == 1, np.log(theta), np.log1p(-theta))
    return terms.sum(axis=-1)


def bernoulli_nat_grad(params: BernoulliParams, x) -> np.ndarray:
    """Natural gradient of the log-likelihood, x - theta."""
    x = _check_dim(x, params.dim)
    return x - params.theta


def clamp_bernoulli(params: BernoulliParams, d: int) -> BernoulliParams:
    """Project theta onto [1/d, 1 - 1/d] so every bit string stays reachable."""
    if d != params.dim:
        raise DimensionMismatchError(f"clamp dimension {d} does not match parameter dimension {params.dim}")
    if d == 1:
        # the range is empty for a single bit
        return params
    return BernoulliParams(np.clip(params.theta, 1.0 / d, 1.0 - 1.0 / d))


# ----------------------------------------------------------------
# Gaussian family
# ----------------------------------------------------------------

def gaussian_sample(params: GaussianParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` points from N(m, C), one per row, as m + L z."""
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    z = rng.standard_normal((count, params.dim))
    return params.m + z @ params.chol.T


def gaussian_log_density(params: GaussianParams, x) -> np.ndarray | float:
    """Log density of one point or of each row of a batch."""
    x = _check_dim(x, params.dim)
    xc = np.atleast_2d(x - params.m)
    y = slin.solve_triangular(params.chol, xc.T, lower=True)
    maha = np.einsum("ij,ij->j", y, y)
    out = -0.5 * (params.dim * LOG_2PI + params.log_det + maha)
    return out if x.ndim > 1 else out[0]


def gaussian_nat_grad_mean(params: GaussianParams, x) -> np.ndarray:
    """Natural gradient of the log-likelihood w.r.t. the mean, x - m."""
    x = _check_dim(x, params.dim)
    return x - params.m


def gaussian_nat_grad_cov(params: GaussianParams, x) -> np.ndarray:
    """Natural gradient w.r.t. the covariance, (x - m)(x - m)^T - C.

    A batch of shape (n, d) gives an array of shape (n, d, d).
    """
    y = gaussian_nat_grad_mean(params, x)
    return y[..., :, None] * y[..., None, :] - params.C


def min_eigenvalue(C) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(slin.eigvalsh(C, subset_by_index=[0, 0])[0])


def symmetrize(C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    return 0.5 * (C + C.T)


# ----------------------------------------------------------------
# Family dispatch
# ----------------------------------------------------------------

@singledispatch
def log_density(params, x):
    raise TypeError(f"no log-density for {type(params).__name__}")


@log_density.register
def _(params: BernoulliParams, x):
    return bernoulli_log_density(params, x)


@log_density.register
def _(params: GaussianParams, x):
    return gaussian_log_density(params, x)
