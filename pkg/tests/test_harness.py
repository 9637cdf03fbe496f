"""Harness: metrics, training loop, λ selection, run configs and small end-to-end experiments."""
import numpy as np
import pytest

from bfreg.exceptions import ConfigurationError, DivergenceError, InputError
from bfreg.modules.harness import (
    Evaluator, ExperimentReport, ReplicationResult, Standardizer, StrategySummary, TrainConfig,
    apply_overrides, build_run_config, build_specs, histogram_counts, histogram_rows, interpolate_fields,
    lambda_grid_search, load_run_config, preset, prepare_replication, ratio_checks, relative_rmse,
    replication_rows, run_replications, select_lambda, shock_positions, sparsity_check, train,
    train_lambda_grid, train_lofi_network,
)
from bfreg.modules.harness.schemas import ArchConfig
from bfreg.modules.linalg import Rng
from bfreg.modules.network import (
    ActivationKind, LayerSpec, NetworkParams, forward_batch, init_params, param_count,
)
from bfreg.modules.problems import Split, nozzle_field, nozzle_grid
from bfreg.modules.regularization import RegStrategy, StrategyConfig
from bfreg.utils.export_service import dumps_json


def _small_run(**changes) -> dict:
    data = {
        "problem": "beam",
        "arch": {"kind": "fnn", "hidden": [5], "activation": "elu"},
        "strategies": [
            {"type": "none"},
            {"type": "l1_standard", "lambda_grid": [1e-3, 1e-2]},
            {"type": "l1_bifidelity_diff", "lambda": 1e-4},
            {"type": "l1_bifidelity_weighted", "lambda": 1e-4},
        ],
        "counts": {"N_l": 20, "N_h": 3, "N_val": 8, "R": 2, "inits": 2},
        "optimizer": {"name": "adam", "eta": 1e-2, "iters": 25},
        "lofi": {"lambda": 1e-3, "eta": 1e-2, "iters": 25},
        "n_elems": 50,
    }
    data.update(changes)
    return data


def _result(eps_v, lam=0.1, failed=False, replication=0, label="s"):
    return ReplicationResult(replication, label, lam, float("nan") if failed else eps_v, failed=failed)


def _summary(label, kind, eps_values, sparsity=0.0):
    reps = [ReplicationResult(i, label, 0.0, e, sparsity=sparsity) for i, e in enumerate(eps_values)]
    return StrategySummary(label, kind, [0.0], None, {}, reps)


# ═══════════════════════════════════════
# Metrics
# ═══════════════════════════════════════
class TestMetrics:
    def test_relative_rmse(self):
        assert relative_rmse([[3.0], [4.0]], [[3.0], [4.0]]) == 0.0
        assert relative_rmse([[3.0], [4.0]], [[0.0], [0.0]]) == pytest.approx(1.0)
        assert relative_rmse([[3.0], [4.0]], [[3.0], [0.0]]) == pytest.approx(0.8)

    def test_vector_samples_are_stacked(self):
        assert relative_rmse([[3.0, 0.0], [0.0, 4.0]], [[0.0, 0.0], [0.0, 4.0]]) == pytest.approx(0.6)

    def test_zero_norm_targets(self):
        with pytest.raises(InputError, match="zero norm"):
            relative_rmse([[0.0], [0.0]], [[1.0], [0.0]])

    def test_count_mismatch(self):
        with pytest.raises(ConfigurationError):
            relative_rmse([[1.0]], [[1.0], [2.0]])

    def test_shock_positions_with_fallback(self):
        grid = nozzle_grid(52)
        fields = np.stack([nozzle_field(0.0, 52), np.sin(grid)])
        positions = shock_positions(fields, grid)
        assert abs(positions[0] - np.pi / 2) < np.pi / 51
        assert positions[1] == grid[-1]

    def test_shock_evaluator_on_exact_fields(self):
        grid = nozzle_grid(40)
        fields = np.stack([nozzle_field(d, 40) for d in (-0.4, 0.1, 0.6)])
        split = Split(fields, fields.copy())
        specs = [LayerSpec(40, 40, ActivationKind.identity())]
        identity_net = NetworkParams([(np.eye(40), np.zeros(40))])
        evaluator = Evaluator.from_split(specs, split, Standardizer.fit(split, False, False), "shock", grid)
        assert evaluator(identity_net) == 0.0

    def test_non_finite_prediction_scores_inf(self, elu_specs, elu_params, toy_batch):
        x, y = toy_batch
        evaluator = Evaluator.from_split(elu_specs, Split(x, y), Standardizer.fit(Split(x, y), False, False))
        broken = NetworkParams.unflatten(np.full(param_count(elu_specs), np.nan), elu_specs)
        assert evaluator(broken) == np.inf


# ═══════════════════════════════════════
# Standardization
# ═══════════════════════════════════════
class TestStandardizer:
    def test_zero_std_column_passes_through_centred(self):
        split = Split(np.array([[1.0, 5.0], [3.0, 5.0]]), np.array([[2.0], [4.0]]))
        s = Standardizer.fit(split)
        assert s.x_std.tolist() == [1.0, 1.0]
        assert s.transform_x(split.x).tolist() == [[-1.0, 0.0], [1.0, 0.0]]
        assert np.allclose(s.inverse_y(s.transform_y(split.y)), split.y)

    def test_disabled(self):
        split = Split(np.array([[1.0], [3.0]]), np.array([[2.0], [4.0]]))
        s = Standardizer.fit(split, standardize_x=False, standardize_y=False)
        assert np.array_equal(s.transform(split).x, split.x)


# ═══════════════════════════════════════
# Training loop
# ═══════════════════════════════════════
class TestTrain:
    def test_descends_and_keeps_the_best_iterate(self, elu_specs, elu_params, toy_batch, rng):
        x, y = toy_batch
        data = Split(x, y)
        config = TrainConfig(elu_specs, RegStrategy.none(), eta=1e-2, max_iters=200)
        result = train(config, data, data, elu_params.flatten(), rng)
        assert len(result.trace) == 201
        assert result.best_eps_v < result.trace[0].eps_v
        first_min = min(range(len(result.trace)), key=lambda i: result.trace[i].eps_v)
        assert result.best_iter == result.trace[first_min].iteration
        evaluator = Evaluator.from_split(elu_specs, data, Standardizer.fit(data, False, False))
        assert evaluator(result.params) == pytest.approx(result.best_eps_v, rel=1e-12)

    def test_evaluation_schedule(self, elu_specs, elu_params, toy_batch, rng):
        data = Split(*toy_batch)
        config = TrainConfig(elu_specs, RegStrategy.l1_standard(1e-3), eta=1e-3, max_iters=20, eval_every=7)
        result = train(config, data, data, elu_params.flatten(), rng)
        assert [row.iteration for row in result.trace] == [0, 7, 14, 20]

    def test_deterministic_with_minibatches_and_dropout(self, elu_specs, elu_params, toy_batch):
        data = Split(*toy_batch)
        config = TrainConfig(elu_specs, RegStrategy.dropout(0.3), eta=1e-2, max_iters=30, batch_size=5)
        a = train(config, data, data, elu_params.flatten(), Rng(1))
        b = train(config, data, data, elu_params.flatten(), Rng(1))
        assert np.array_equal(a.theta, b.theta)

    def test_initial_parameters_untouched(self, elu_specs, elu_params, toy_batch, rng):
        data = Split(*toy_batch)
        theta0 = elu_params.flatten()
        before = theta0.copy()
        train(TrainConfig(elu_specs, RegStrategy.none(), eta=1e-2, max_iters=5), data, data, theta0, rng)
        assert np.array_equal(theta0, before)

    def test_strong_difference_penalty_pulls_to_theta_lf(self, elu_specs, elu_params, toy_batch, rng):
        x, y = toy_batch
        theta_lf = init_params(elu_specs, Rng(11)).flatten()
        lf_net = NetworkParams.unflatten(theta_lf, elu_specs)
        val = Split(x, forward_batch(lf_net, elu_specs, x))
        config = TrainConfig(elu_specs, RegStrategy.l1_bifidelity_diff(10.0, theta_lf), eta=1e-2, max_iters=400)
        theta0 = elu_params.flatten()
        result = train(config, Split(x, y), val, theta0, rng)
        start = np.sum(np.abs(theta0 - theta_lf))
        assert np.sum(np.abs(result.theta - theta_lf)) < 0.1 * start

    def test_reweighted_run_returns_its_final_state(self, elu_specs, elu_params, toy_batch, rng):
        data = Split(*toy_batch)
        config = TrainConfig(elu_specs, RegStrategy.l1_reweighted_hf(1e-3), eta=1e-2, max_iters=10)
        result = train(config, data, data, elu_params.flatten(), rng)
        assert result.final_state is not None
        assert result.final_state.current_weights.shape == (param_count(elu_specs),)

    def test_divergence_raises(self, elu_specs, elu_params, toy_batch, rng):
        data = Split(*toy_batch)
        config = TrainConfig(elu_specs, RegStrategy.none(), eta=1e8, max_iters=200, optimizer="sgd")
        with pytest.raises(DivergenceError) as info:
            with np.errstate(all="ignore"):
                train(config, data, data, elu_params.flatten(), rng)
        assert info.value.exit_code == 2

    def test_wrong_initial_length(self, elu_specs, toy_batch, rng):
        data = Split(*toy_batch)
        with pytest.raises(ConfigurationError, match="length"):
            train(TrainConfig(elu_specs, RegStrategy.none(), 1e-2, 5), data, data, np.zeros(3), rng)

    def test_invalid_train_config(self, elu_specs):
        with pytest.raises(ConfigurationError):
            TrainConfig(elu_specs, RegStrategy.none(), eta=1e-2, max_iters=0)

    def test_lofi_network_needs_standard_l1(self, elu_specs, toy_batch, rng):
        data = Split(*toy_batch)
        config = TrainConfig(elu_specs, RegStrategy.none(), 1e-2, 5)
        with pytest.raises(ConfigurationError, match="l1_standard"):
            train_lofi_network(config, data, Standardizer.fit(data), rng)

    def test_lofi_network(self, elu_specs, toy_batch, rng):
        data = Split(*toy_batch)
        config = TrainConfig(elu_specs, RegStrategy.l1_standard(1e-4), 1e-2, 20)
        theta_lf, result = train_lofi_network(config, data, Standardizer.fit(data), rng)
        assert theta_lf.shape == (param_count(elu_specs),)
        assert np.isfinite(result.best_eps_v)


# ═══════════════════════════════════════
# λ selection
# ═══════════════════════════════════════
class TestSelectLambda:
    def test_smallest_mean(self):
        chosen, summary = select_lambda({0.1: [_result(0.3), _result(0.5)], 1.0: [_result(0.2), _result(0.2)]})
        assert chosen == 1.0
        assert summary[repr(0.1)]["mean_eps_v"] == pytest.approx(0.4)

    def test_tie_goes_to_larger_lambda(self):
        chosen, _ = select_lambda({1e-3: [_result(0.25), _result(0.75)], 1e-2: [_result(0.5), _result(0.5)]})
        assert chosen == 1e-2

    def test_all_failed_lambda_is_never_selected(self):
        chosen, summary = select_lambda({1.0: [_result(0, failed=True)], 0.1: [_result(0.5)]})
        assert chosen == 0.1
        assert summary[repr(1.0)]["mean_eps_v"] is None
        assert summary[repr(1.0)]["n_failed"] == 1

    def test_failures_are_excluded_from_the_mean(self):
        _, summary = select_lambda({0.1: [_result(0.5), _result(0, failed=True)]})
        assert summary[repr(0.1)]["mean_eps_v"] == 0.5

    def test_singleton_grid(self):
        assert select_lambda({0.3: [_result(0.9)]})[0] == 0.3

    def test_nothing_succeeded(self):
        assert select_lambda({0.3: [_result(0, failed=True)]})[0] is None

    def test_grid_search_visits_every_lambda_once(self):
        cfg = StrategyConfig(type="l1_standard", lambda_grid=[1e-3, 1e-2, 1e-1])
        means = {1e-3: 0.4, 1e-2: 0.1, 1e-1: 0.3}
        visited = []

        def results_for(lam):
            visited.append(lam)
            return [_result(means[lam] - 0.05, lam), _result(means[lam] + 0.05, lam, replication=1)]

        chosen, per_lambda, summary = lambda_grid_search(cfg, results_for)
        assert chosen == 1e-2
        assert visited == [1e-3, 1e-2, 1e-1]
        assert [r.replication for r in per_lambda[1e-2]] == [0, 1]
        assert summary[repr(1e-1)]["mean_eps_v"] == pytest.approx(0.3)

    def test_unregularized_grid_is_the_single_zero(self):
        chosen, per_lambda, _ = lambda_grid_search(StrategyConfig(type="none"), lambda lam: [_result(0.2, lam)])
        assert chosen == 0.0 and list(per_lambda) == [0.0]


# ═══════════════════════════════════════
# Run configuration
# ═══════════════════════════════════════
class TestRunConfig:
    def test_overrides(self):
        data = apply_overrides({"a": {"b": 1}}, ["a.b=2", "a.c=[1, 2]", "d=text"])
        assert data == {"a": {"b": 2, "c": [1, 2]}, "d": "text"}

    def test_override_into_a_list(self):
        data = apply_overrides({"strategies": [{"lambda": 1}]}, ["strategies.0.lambda=0.5"])
        assert data["strategies"][0]["lambda"] == 0.5

    @pytest.mark.parametrize("item", ["novalue", "=3", "strategies.4.lambda=1"])
    def test_bad_override(self, item):
        with pytest.raises(ConfigurationError):
            apply_overrides({"strategies": [{}]}, [item])

    def test_unknown_key_is_named(self):
        data = _small_run()
        data["counts"]["N_hh"] = 3
        with pytest.raises(ConfigurationError, match="counts.N_hh"):
            build_run_config(data)

    def test_single_strategy_shorthand(self):
        data = _small_run()
        del data["strategies"]
        data["strategy"] = {"type": "l1_standard"}
        data["lambda_grid"] = [0.1, 1.0]
        run = build_run_config(data)
        assert run.strategies[0].grid() == [0.1, 1.0]

    def test_duplicate_labels(self):
        with pytest.raises(ConfigurationError, match="unique"):
            build_run_config(_small_run(strategies=[{"type": "none"}, {"type": "none"}]))

    def test_preset_then_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"counts": {"N_h": 4}}')
        run = load_run_config(path, ["optimizer.iters=7"], base=preset("beam", "desk"))
        assert run.scale == "desk" and run.counts.N_h == 4 and run.counts.N_l == 250
        assert run.optimizer.iters == 7

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_run_config(tmp_path / "missing.json")

    def test_unknown_scale(self):
        with pytest.raises(ConfigurationError):
            preset("beam", "huge")

    def test_presets_validate(self):
        for problem in ("beam", "nozzle"):
            for scale in ("desk", "full"):
                assert build_run_config(preset(problem, scale)).problem == problem

    def test_desk_presets_keep_the_lambda_grids_and_inits(self):
        for problem in ("beam", "nozzle"):
            desk, full = preset(problem, "desk"), preset(problem, "full")
            assert desk["strategies"] == full["strategies"]
            assert desk["counts"]["inits"] == full["counts"]["inits"] == 10
            assert desk["counts"]["R"] < full["counts"]["R"]
            assert desk["optimizer"]["iters"] < full["optimizer"]["iters"]
            for strategy in desk["strategies"]:
                grid = strategy.get("lambda_grid", [])
                assert all(b / a == pytest.approx(10.0) for a, b in zip(grid, grid[1:])), strategy["name"]

    def test_build_specs(self):
        specs, n_enc = build_specs(ArchConfig(hidden=[5, 5]), 4, 1)
        assert [(s.in_dim, s.out_dim) for s in specs] == [(4, 5), (5, 5), (5, 1)] and n_enc is None
        specs, n_enc = build_specs(ArchConfig(kind="autoencoder", encoder=[8, 4], decoder=[8]), 16, 16)
        assert n_enc == 2 and specs[-1].out_dim == 16
        with pytest.raises(ConfigurationError):
            build_specs(ArchConfig(kind="autoencoder", encoder=[4]), 16, 8)


# ═══════════════════════════════════════
# Report pieces
# ═══════════════════════════════════════
class TestReportPieces:
    def test_histogram_counts(self):
        hist = histogram_counts(np.array([0.0, 1e-9, 5e-3, -5e-3, 20.0]), -8, 1)
        assert len(hist["edges"]) == 10
        assert hist["underflow"] == 2 and hist["overflow"] == 1
        assert hist["counts"][5] == 2 and sum(hist["counts"]) == 2

    def test_ratio_checks(self):
        report = ExperimentReport("beam", 1, [
            _summary("none", "none", [0.2, 0.2]),
            _summary("diff", "l1_bifidelity_diff", [0.05, 0.05]),
            _summary("weighted", "l1_bifidelity_weighted", [0.15, 0.15]),
        ], config={})
        checks = ratio_checks(report)
        assert checks["diff"]["ratio_to_none"] == pytest.approx(0.25) and checks["diff"]["status"] == "pass"
        assert checks["weighted"]["status"] == "fail"

    def test_sparsity_check(self):
        report = ExperimentReport("beam", 1, [
            _summary("none", "none", [0.2], sparsity=0.0),
            _summary("l1", "l1_standard", [0.1], sparsity=0.4),
        ], config={})
        assert sparsity_check(report)["status"] == "pass"
        report.strategies.pop()
        assert sparsity_check(report)["status"] == "skipped"

    def test_interpolate_fields(self):
        split = Split(np.stack([nozzle_field(0.2, 20)]), np.stack([nozzle_field(0.2, 20)]))
        fine = interpolate_fields(split, 39)
        assert fine.x.shape == (1, 39)
        assert np.allclose(fine.x[0, ::2], split.x[0])
        assert np.array_equal(fine.x, fine.y)


# ═══════════════════════════════════════
# End-to-end experiment
# ═══════════════════════════════════════
class TestExperiment:
    @pytest.fixture(scope="class")
    def report(self):
        return run_replications(build_run_config(_small_run()), Rng(3), keep_params=True)

    def test_report_is_deterministic(self, report):
        again = run_replications(build_run_config(_small_run()), Rng(3), keep_params=True)
        assert dumps_json(again.to_dict()) == dumps_json(report.to_dict())

    def test_summary_statistics_recompute(self, report):
        for summary in report.strategies:
            eps = [r.eps_v for r in summary.replications if not r.failed]
            assert summary.mean_eps_v == pytest.approx(np.mean(eps), rel=1e-12)
            assert summary.std_eps_v == pytest.approx(np.std(eps), abs=1e-15)
            assert len(summary.replications) == 2

    def test_lambda_selection_is_reported(self, report):
        assert report.strategy("none").selected_lambda is None
        l1 = report.strategy("l1_standard")
        assert l1.selected_lambda in (1e-3, 1e-2)
        assert set(l1.per_lambda) == {repr(1e-3), repr(1e-2)}
        assert {r.lam for r in l1.replications} == {l1.selected_lambda}

    def test_histograms_cover_every_parameter(self, report):
        n = param_count(build_specs(ArchConfig(hidden=[5]), 4, 1)[0])
        for summary in report.strategies:
            for r in summary.replications:
                hist = r.histograms["abs_theta"]
                assert hist["underflow"] + sum(hist["counts"]) + hist["overflow"] == n
        assert "abs_theta_minus_lf" in report.strategy("l1_bifidelity_diff").replications[0].histograms

    def test_low_fidelity_networks_trained(self, report):
        assert len(report.lofi) == 2
        assert all(entry["error"] is None for entry in report.lofi)

    def test_checks_and_k_values(self, report):
        assert set(report.checks) == {"ratio", "sparsity", "k_ordering"}
        diff = report.strategy("l1_bifidelity_diff").replications[0]
        assert diff.strategy_k["name"] == "K_std_BF" and diff.strategy_k["value"] > 0
        assert report.strategy("none").replications[0].strategy_k is None

    def test_parameter_dumps(self, report):
        assert set(report.params) == {"none", "l1_standard", "l1_bifidelity_diff", "l1_bifidelity_weighted",
                                      "theta_lf"}

    def test_flat_tables(self, report):
        assert len(replication_rows(report)) == 4 * 2
        rows = histogram_rows(report)
        assert {row["histogram"] for row in rows} >= {"abs_theta", "hidden_weights", "hidden_biases"}

    def test_timing_stays_out_of_the_report(self, report):
        assert len(report.timing) == 2
        assert "timing" not in report.to_dict() and "runtime" not in report.to_dict()

    def test_replications_are_independent_of_the_count(self, report):
        single = run_replications(build_run_config(_small_run()), Rng(3), replications=1)
        for label in ("none", "l1_bifidelity_diff", "l1_bifidelity_weighted"):
            assert single.strategy(label).replications[0].eps_v == report.strategy(label).replications[0].eps_v

    def test_grid_search_on_prepared_replications_matches_the_report(self, report):
        run = build_run_config(_small_run())
        contexts = [prepare_replication(run, r, Rng(3)) for r in range(2)]
        l1_cfg = run.strategies[1]
        chosen, per_lambda, summary = train_lambda_grid(run, l1_cfg, contexts, s_index=1)
        assert set(per_lambda) == {1e-3, 1e-2}
        assert all(len(results) == 2 for results in per_lambda.values())
        means = {lam: np.mean([r.eps_v for r in results]) for lam, results in per_lambda.items()}
        assert chosen == min(sorted(means, reverse=True), key=means.get)
        assert summary == report.strategy("l1_standard").per_lambda
        assert chosen == report.strategy("l1_standard").selected_lambda
