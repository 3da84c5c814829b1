"""Tests for trial execution, experiments and result persistence."""

import json

import numpy as np
import pandas as pd
import pytest
from scipy.stats import mannwhitneyu

from reuse_igo.harness import (
    BUDGET,
    DEGENERACY,
    OPTIMUM_SAMPLED,
    TARGET_REACHED,
    TRIAL_COLUMNS,
    ConfigError,
    ExperimentConfig,
    ExperimentSummary,
    TrialResult,
    load_results,
    persist_results,
    run_experiment,
    run_trial,
)


def _trial(i, success, evaluations):
    reason = OPTIMUM_SAMPLED if success else BUDGET
    return TrialResult(trial=i, seed=i, success=success, evaluations=evaluations, best_f=0.0, iterations=1, reason=reason)


def _onemax_config(**kwargs):
    values = dict(function="onemax", d=8, variant="cga", eta=1 / 8, trials=5, seed=0)
    values.update(kwargs)
    return ExperimentConfig(**values)


class TestConfig:
    def test_defaults(self):
        config = ExperimentConfig(function="Sphere", d=20, variant="A")
        assert config.function == "sphere"
        assert config.variant == "reuse-mc"
        assert config.lam == 12
        assert config.trials == 50
        assert config.effective_budget == 20 * 10**6

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            (dict(function="nope"), "function"),
            (dict(variant="nope"), "variant"),
            (dict(lam=1), "lambda"),
            (dict(K=-1), "K"),
            (dict(trials=0), "trials"),
            (dict(eta=None), "eta"),
            (dict(eta=-0.1), "eta"),
            (dict(lam=4), "lambda"),
            (dict(T=0.1), "T"),
            (dict(variant="A"), "variant"),
            (dict(budget=-5), "budget"),
            (dict(d="eight"), "d"),
            (dict(d=float("inf")), "d"),
            (dict(budget=float("nan")), "budget"),
            (dict(eta=float("inf")), "eta"),
            (dict(T=float("nan")), "T"),
            (dict(target=float("-inf")), "target"),
            (dict(alpha=float("nan")), "alpha"),
        ],
    )
    def test_invalid_fields_are_named(self, kwargs, field):
        with pytest.raises(ConfigError) as excinfo:
            _onemax_config(**kwargs)
        assert excinfo.value.field == field
        assert str(excinfo.value).startswith(field)

    def test_alpha_range(self):
        with pytest.raises(ConfigError, match="alpha"):
            ExperimentConfig(function="sphere", d=4, variant="im", alpha=1.5)

    def test_continuous_ignores_eta(self):
        assert ExperimentConfig(function="sphere", d=4, variant="A", eta=0.5).eta is None

    def test_dict_round_trip(self):
        config = _onemax_config(K=3, budget=100)
        assert ExperimentConfig.from_dict(config.to_dict()) == config


class TestRunTrial:
    def test_easy_onemax_succeeds(self):
        config = _onemax_config(trials=50)
        results = [run_trial(config, seed) for seed in range(50)]
        assert sum(r.success for r in results) >= 49
        assert all(r.reason in (OPTIMUM_SAMPLED, BUDGET) for r in results)

    def test_zero_budget_fails_immediately(self):
        result = run_trial(_onemax_config(budget=0), seed=1)
        assert not result.success
        assert result.reason == BUDGET
        assert result.evaluations == 0

    def test_budget_overshoot_is_below_one_generation(self):
        config = ExperimentConfig(function="sphere", d=4, variant="A", lam=8, budget=20)
        result = run_trial(config, seed=2)
        assert result.reason == BUDGET
        assert 20 <= result.evaluations < 20 + 8

    def test_deterministic(self):
        config = ExperimentConfig(function="sphere", d=3, variant="B", K=2, budget=2000)
        assert run_trial(config, seed=5) == run_trial(config, seed=5)

    def test_sphere_reaches_target(self):
        config = ExperimentConfig(function="sphere", d=3, variant="A", K=1)
        result = run_trial(config, seed=3)
        assert result.success
        assert result.reason == TARGET_REACHED
        assert result.best_f < 1e-10

    def test_degeneracy_is_a_failure(self, monkeypatch):
        from reuse_igo import harness
        from reuse_igo.distributions import CovarianceDegeneracyError

        def broken_step(state, objective, rng):
            raise CovarianceDegeneracyError("not positive definite")

        original = harness._initial_state
        monkeypatch.setattr(harness, "_initial_state", lambda *a: (original(*a)[0], broken_step))
        result = run_trial(ExperimentConfig(function="sphere", d=3, variant="A"), seed=0)
        assert not result.success
        assert result.reason == DEGENERACY

    @pytest.mark.parametrize("variant", ["pure-rank-mu", "A", "B", "hybrid", "C", "D", "im"])
    def test_evaluation_accounting(self, variant):
        config = ExperimentConfig(function="ellipsoid", d=4, variant=variant, K=2, alpha=0.1, budget=3000)
        result = run_trial(config, seed=4, record_trace=True)
        trace = result.trace
        assert trace["step_evaluations"].sum() == result.evaluations
        assert trace["evaluations"].iloc[-1] == result.evaluations
        assert (trace["min_eigenvalue"].dropna() > 0).all()

    def test_trace_has_coefficient_sums_for_reuse(self):
        config = ExperimentConfig(function="sphere", d=4, variant="A", K=2, budget=200)
        trace = run_trial(config, seed=0, record_trace=True).trace
        assert {"s0", "s1", "s2"} <= set(trace.columns)


class TestSummary:
    def test_metric_all_successful(self):
        summary = ExperimentSummary(_onemax_config(), [_trial(i, True, 1000) for i in range(50)])
        assert summary.performance_metric == 1000.0

    def test_metric_half_successful(self):
        trials = [_trial(i, i < 25, 1000) for i in range(50)]
        summary = ExperimentSummary(_onemax_config(), trials)
        assert summary.success_probability == 0.5
        assert summary.performance_metric == 2000.0

    def test_metric_without_success(self):
        summary = ExperimentSummary(_onemax_config(), [_trial(0, False, 10)])
        assert summary.mean_evals_success is None
        assert summary.performance_metric is None

    def test_parallel_equals_sequential(self):
        config = ExperimentConfig(function="sphere", d=3, variant="A", K=1, trials=4, budget=3000, seed=11)
        sequential = run_experiment(config, jobs=1)
        parallel = run_experiment(config, jobs=3)
        assert sequential.trials == parallel.trials
        assert [t.trial for t in parallel.trials] == [0, 1, 2, 3]
        assert [t.seed for t in parallel.trials] == [11, 12, 13, 14]


class TestPersistence:
    def test_round_trip(self, tmp_path):
        summary = run_experiment(_onemax_config(trials=3))
        persist_results(summary, tmp_path)
        loaded = load_results(tmp_path)
        assert loaded.config == summary.config
        assert loaded.trials == summary.trials
        assert loaded.to_dict() == summary.to_dict()

    def test_zero_budget_summary_is_strict_json(self, tmp_path):
        summary = run_experiment(_onemax_config(trials=2, budget=0))
        persist_results(summary, tmp_path)

        def reject(token):
            raise ValueError(f"non-standard JSON constant {token}")

        text = (tmp_path / "summary.json").read_text()
        data = json.loads(text, parse_constant=reject)
        assert [t["best_f"] for t in data["trials"]] == [None, None]
        loaded = load_results(tmp_path)
        assert [t.best_f for t in loaded.trials] == [-np.inf, -np.inf]
        assert loaded.trials == summary.trials

    def test_csv_layout(self, tmp_path):
        summary = run_experiment(_onemax_config(trials=50))
        persist_results(summary, tmp_path)
        frame = pd.read_csv(tmp_path / "trials.csv")
        assert list(frame.columns) == TRIAL_COLUMNS
        assert len(frame) == 50
        with open(tmp_path / "trials.csv") as f:
            assert len(f.read().splitlines()) == 51

    def test_empty(self, tmp_path):
        persist_results(ExperimentSummary(_onemax_config()), tmp_path)
        with open(tmp_path / "trials.csv") as f:
            assert f.read().strip() == ",".join(TRIAL_COLUMNS)
        with open(tmp_path / "summary.json") as f:
            data = json.load(f)
        assert data["trials"] == []
        assert data["performance_metric"] is None

    def test_traces_written(self, tmp_path):
        config = ExperimentConfig(function="sphere", d=3, variant="A", trials=2, budget=100)
        written = persist_results(run_experiment(config, record_trace=True), tmp_path)
        assert (tmp_path / "trace_0.csv").exists() and (tmp_path / "trace_1.csv").exists()
        assert len(written) == 4


@pytest.mark.slow
class TestTrends:
    def test_onemax_improves_with_reuse(self):
        evaluations = {}
        for K in (0, 1, 3):
            config = ExperimentConfig(function="onemax", d=128, variant="cga", eta=1 / 128, K=K, trials=50)
            summary = run_experiment(config, jobs=4)
            assert summary.success_probability == 1.0
            evaluations[K] = np.array([t.evaluations for t in summary.trials])
        assert np.median(evaluations[1]) < np.median(evaluations[0])
        assert mannwhitneyu(evaluations[1], evaluations[0], alternative="less").pvalue < 0.05

    @pytest.mark.parametrize("function", ["sphere", "ellipsoid"])
    def test_gaussian_improves_with_reuse(self, function):
        means = {}
        for K in (0, 5):
            config = ExperimentConfig(function=function, d=20, variant="A", K=K, trials=20)
            summary = run_experiment(config, jobs=4)
            assert summary.success_count == 20
            means[K] = summary.mean_evals_success
        assert means[5] <= 0.9 * means[0]

    def test_rank_one_reuse_solves_cigar(self):
        config = ExperimentConfig(function="cigar", d=20, variant="D", K=0, trials=20)
        summary = run_experiment(config, jobs=4)
        assert summary.success_count == 20
