"""
Benchmark objectives and their experimental metadata.

Binary functions (OneMax, LeadingOnes) are maximized with optimum d; the
continuous functions are minimized with optimum 0, at (1, ..., 1) for
Rosenbrock and at the origin for the rest. Sums run in ascending index order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

BINARY = "binary"
CONTINUOUS = "continuous"


# ----------------------------------------------------------------
# Binary functions
# ----------------------------------------------------------------

def onemax(x) -> int:
    return int(np.sum(x))


def leading_ones(x) -> int:
    """sum_j prod_{i<=j} x_i, the length of the all-ones prefix."""
    return int(np.sum(np.cumprod(np.asarray(x, dtype=np.int64))))


# ----------------------------------------------------------------
# Continuous functions
# ----------------------------------------------------------------

def sphere(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * x))


def ellipsoid(x) -> float:
    x = np.asarray(x, dtype=float)
    d = x.size
    scale = 1000.0 ** (np.arange(d) / (d - 1)) if d > 1 else np.ones(1)
    return float(np.sum((scale * x) ** 2))


def cigar(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x[0] ** 2 + np.sum((1000.0 * x[1:]) ** 2))


def rosenbrock(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (x[:-1] - 1.0) ** 2))


def ackley(x) -> float:
    x = np.asarray(x, dtype=float)
    d = x.size
    return float(
        20.0
        - 20.0 * np.exp(-0.2 * np.sqrt(np.sum(x * x) / d))
        + np.e
        - np.exp(np.sum(np.cos(2.0 * np.pi * x)) / d)
    )


def bohachevsky(x) -> float:
    x = np.asarray(x, dtype=float)
    a, b = x[:-1], x[1:]
    return float(np.sum(a ** 2 + 2.0 * b ** 2 - 0.3 * np.cos(3.0 * np.pi * a) - 0.4 * np.cos(4.0 * np.pi * b) + 0.7))


def schaffer(x) -> float:
    x = np.asarray(x, dtype=float)
    r = x[:-1] ** 2 + x[1:] ** 2
    return float(np.sum(r ** 0.25 * (np.sin(50.0 * r ** 0.1) ** 2 + 1.0)))


def rastrigin(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


BINARY_FUNCTIONS: Dict[str, Callable] = {
    "onemax": onemax,
    "leadingones": leading_ones,
}

CONTINUOUS_FUNCTIONS: Dict[str, Callable] = {
    "sphere": sphere,
    "ellipsoid": ellipsoid,
    "cigar": cigar,
    "rosenbrock": rosenbrock,
    "ackley": ackley,
    "bohachevsky": bohachevsky,
    "schaffer": schaffer,
    "rastrigin": rastrigin,
}

# functions built from consecutive pairs need two coordinates
PAIRWISE = {"rosenbrock", "bohachevsky", "schaffer"}

INIT_RANGES: Dict[str, Tuple[float, float]] = {
    "sphere": (1.0, 5.0),
    "ellipsoid": (1.0, 5.0),
    "cigar": (1.0, 5.0),
    "rastrigin": (1.0, 5.0),
    "rosenbrock": (-2.0, 2.0),
    "ackley": (1.0, 30.0),
    "bohachevsky": (1.0, 15.0),
    "schaffer": (10.0, 100.0),
}

MULTIMODAL = ("ackley", "bohachevsky", "schaffer", "rastrigin")


def function_names():
    return sorted(BINARY_FUNCTIONS) + sorted(CONTINUOUS_FUNCTIONS)


def canonical_name(name: str) -> str:
    key = str(name).strip().lower().replace("-", "").replace("_", "")
    if key not in BINARY_FUNCTIONS and key not in CONTINUOUS_FUNCTIONS:
        raise ValueError(f"unknown function {name!r}; valid names: {', '.join(function_names())}")
    return key


def eval_binary(name: str, x) -> int:
    key = canonical_name(name)
    if key not in BINARY_FUNCTIONS:
        raise ValueError(f"{name!r} is not a binary function")
    if np.size(x) < 1:
        raise ValueError("bit string must be nonempty")
    return BINARY_FUNCTIONS[key](x)


def eval_continuous(name: str, x) -> float:
    key = canonical_name(name)
    if key not in CONTINUOUS_FUNCTIONS:
        raise ValueError(f"{name!r} is not a continuous function")
    if key in PAIRWISE and np.size(x) < 2:
        raise ValueError(f"{name} needs at least two coordinates")
    return CONTINUOUS_FUNCTIONS[key](x)


@dataclass(frozen=True)
class BenchmarkSpec:
    """A benchmark instance with its initialization and termination rules."""

    name: str
    kind: str
    d: int
    optimum: float
    budget: int
    init_range: Optional[Tuple[float, float]] = None
    theta0: float = 0.5
    eigen_floor: float = 1e-30
    target: float = 1e-10

    @property
    def is_binary(self):
        return self.kind == BINARY

    @property
    def minimize(self):
        return not self.is_binary

    @property
    def sigma(self):
        if self.init_range is None:
            return None
        a, b = self.init_range
        return (b - a) / 2.0

    def objective(self) -> Callable[[np.ndarray], float]:
        if self.is_binary:
            return BINARY_FUNCTIONS[self.name]
        return CONTINUOUS_FUNCTIONS[self.name]


def default_spec(name: str, d: int) -> BenchmarkSpec:
    key = canonical_name(name)
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    if key in BINARY_FUNCTIONS:
        budget = 300 * d if key == "onemax" else 40000 * d
        return BenchmarkSpec(name=key, kind=BINARY, d=d, optimum=float(d), budget=budget)
    if key in PAIRWISE and d < 2:
        raise ValueError(f"{key} needs d >= 2, got {d}")
    return BenchmarkSpec(
        name=key,
        kind=CONTINUOUS,
        d=d,
        optimum=0.0,
        budget=d * 10**6,
        init_range=INIT_RANGES[key],
        eigen_floor=1e-60 if key == "schaffer" else 1e-30,
    )


def default_population_size(d: int) -> int:
    """The CMA-ES default 4 + floor(3 ln d)."""
    return 4 + int(np.floor(3.0 * np.log(d)))


def population_grid(name: str, d: int) -> list:
    """Population sizes swept for a function: relative to d on unimodal
    functions, doubling every other step from a base size on multimodal ones."""
    key = canonical_name(name)
    if key in MULTIMODAL:
        base = {"ackley": 2.0 * np.log(d), "bohachevsky": d, "schaffer": 2.0 * d, "rastrigin": 10.0 * d}[key]
        grid = [2 * int(np.floor(2.0 ** (i / 2.0 - 1.0) * base)) for i in range(8)]
    else:
        grid = [default_population_size(d)] + [int(round(c * d)) for c in (0.2, 0.4, 0.8, 1, 2, 4, 8, 16)]
    out = []
    for lam in grid:
        lam = max(2, lam)
        if lam not in out:
            out.append(lam)
    return out
