"""Tests for the benchmark objectives and their metadata."""

import numpy as np
import pytest

from reuse_igo.benchmarks import (
    CONTINUOUS_FUNCTIONS,
    canonical_name,
    default_population_size,
    default_spec,
    eval_binary,
    eval_continuous,
    population_grid,
)


class TestBinary:
    def test_onemax(self):
        assert eval_binary("OneMax", np.ones(7, dtype=int)) == 7
        assert eval_binary("onemax", np.zeros(7, dtype=int)) == 0

    def test_leading_ones(self):
        assert eval_binary("LeadingOnes", np.array([1, 1, 0, 1])) == 2
        assert eval_binary("leadingones", np.array([0, 1, 1, 1])) == 0
        assert eval_binary("leading_ones", np.ones(5, dtype=int)) == 5

    def test_onemax_increases_with_each_flip(self):
        rng = np.random.default_rng(0)
        x = rng.integers(0, 2, size=20)
        for i in np.flatnonzero(x == 0):
            y = x.copy()
            y[i] = 1
            assert eval_binary("onemax", y) > eval_binary("onemax", x)

    def test_leading_ones_never_decreases_when_prefix_grows(self):
        x = np.array([1, 1, 0, 0, 1, 0])
        before = eval_binary("leadingones", x)
        x[2] = 1
        assert eval_binary("leadingones", x) >= before

    def test_empty(self):
        with pytest.raises(ValueError):
            eval_binary("onemax", np.array([], dtype=int))


class TestContinuous:
    def test_optima(self):
        for name in CONTINUOUS_FUNCTIONS:
            x = np.ones(6) if name == "rosenbrock" else np.zeros(6)
            assert eval_continuous(name, x) == pytest.approx(0.0, abs=1e-12)

    def test_hand_values(self):
        assert eval_continuous("sphere", np.ones(3)) == 3.0
        assert eval_continuous("ellipsoid", np.ones(2)) == pytest.approx(1.0 + 1000.0 ** 2)
        assert eval_continuous("cigar", np.array([2.0, 1.0])) == pytest.approx(4.0 + 1e6)
        assert eval_continuous("rosenbrock", np.zeros(2)) == pytest.approx(1.0)
        assert eval_continuous("rastrigin", np.ones(2)) == pytest.approx(2.0)

    def test_nonnegative_on_random_points(self):
        rng = np.random.default_rng(1)
        for name in CONTINUOUS_FUNCTIONS:
            for _ in range(10_000 // len(CONTINUOUS_FUNCTIONS)):
                x = rng.uniform(-10, 10, size=5)
                assert eval_continuous(name, x) >= -1e-12

    def test_pairwise_functions_need_two_coordinates(self):
        with pytest.raises(ValueError):
            eval_continuous("rosenbrock", np.ones(1))

    def test_ellipsoid_single_coordinate(self):
        assert eval_continuous("ellipsoid", np.array([3.0])) == 9.0

    def test_unknown_name_lists_valid(self):
        with pytest.raises(ValueError, match="sphere"):
            canonical_name("griewank")


class TestSpecs:
    def test_schaffer(self):
        spec = default_spec("Schaffer", 10)
        assert spec.init_range == (10.0, 100.0)
        assert spec.sigma == 45.0
        assert spec.eigen_floor == 1e-60
        assert spec.minimize

    def test_sphere(self):
        spec = default_spec("sphere", 20)
        assert spec.sigma == 2.0
        assert spec.eigen_floor == 1e-30
        assert spec.budget == 20 * 10**6
        assert spec.target == 1e-10

    def test_binary_budgets(self):
        assert default_spec("onemax", 512).budget == 153_600
        assert default_spec("leadingones", 10).budget == 400_000
        spec = default_spec("onemax", 8)
        assert spec.optimum == 8.0 and spec.theta0 == 0.5 and not spec.minimize

    def test_population_size(self):
        assert default_population_size(20) == 12
        assert default_population_size(1) == 4

    def test_unimodal_grid(self):
        assert population_grid("ellipsoid", 20) == [12, 4, 8, 16, 20, 40, 80, 160, 320]

    def test_multimodal_grid(self):
        grid = population_grid("rastrigin", 20)
        assert grid[0] == 2 * int(np.floor(0.5 * 200))
        assert len(grid) == 8
        assert grid == sorted(grid)
