"""Regularization: penalties, subgradients, weight states, dropout and config resolution."""
import numpy as np
import pytest
from pydantic import ValidationError

from bfreg.exceptions import ConfigurationError
from bfreg.modules.linalg import Rng
from bfreg.modules.network import finite_difference_gradient
from bfreg.modules.regularization import (
    RegState, RegStrategy, StrategyConfig, StrategyKind, apply_dropout, bifidelity_weights, dropout_masks,
    initial_state, penalty, sign_right, strategy_from_config, subgradient, update_reweight_state,
)

THETA_LF = np.array([0.5, -0.25, 0.0, 2.0])


def _strategies(n: int, rng: Rng):
    theta_lf = rng.generator.standard_normal(n)
    return [
        RegStrategy.l2(0.3),
        RegStrategy.l1_standard(0.3),
        RegStrategy.l1_reweighted_hf(0.3),
        RegStrategy.l1_bifidelity_diff(0.3, theta_lf),
        RegStrategy.l1_bifidelity_weighted(0.3, theta_lf),
    ]


# ═══════════════════════════════════════
# Sign convention
# ═══════════════════════════════════════
class TestSign:
    def test_zero_maps_to_plus_one(self):
        assert sign_right(np.array([-2.0, 0.0, 3.0])).tolist() == [-1.0, 1.0, 1.0]

    def test_l1_subgradient_at_origin_is_plus_lambda(self):
        g = subgradient(RegStrategy.l1_standard(0.7), None, np.zeros(3))
        assert g.tolist() == [0.7, 0.7, 0.7]

    def test_difference_subgradient_at_theta_lf(self):
        strategy = RegStrategy.l1_bifidelity_diff(0.2, THETA_LF)
        assert np.allclose(subgradient(strategy, None, THETA_LF.copy()), 0.2)

    def test_l2_subgradient_at_origin_is_zero(self):
        assert np.array_equal(subgradient(RegStrategy.l2(1.0), None, np.zeros(4)), np.zeros(4))


# ═══════════════════════════════════════
# Penalties
# ═══════════════════════════════════════
class TestPenalty:
    def test_none_and_dropout_are_free(self):
        theta = np.array([1.0, -2.0])
        assert penalty(RegStrategy.none(), None, theta) == 0.0
        assert penalty(RegStrategy.dropout(0.5), None, theta) == 0.0

    def test_l2_is_the_norm(self):
        assert penalty(RegStrategy.l2(2.0), None, np.array([3.0, 4.0])) == pytest.approx(10.0)

    def test_l1_standard(self):
        assert penalty(RegStrategy.l1_standard(0.5), None, np.array([1.0, -2.0, 0.0])) == pytest.approx(1.5)

    def test_bifidelity_difference(self):
        strategy = RegStrategy.l1_bifidelity_diff(1.0, THETA_LF)
        theta = THETA_LF + np.array([0.1, -0.1, 0.2, 0.0])
        assert penalty(strategy, None, theta) == pytest.approx(0.4)

    def test_weighted_uses_state(self):
        state = RegState(np.array([2.0, 0.5]))
        strategy = RegStrategy.l1_reweighted_hf(1.0)
        assert penalty(strategy, state, np.array([1.0, -4.0])) == pytest.approx(4.0)

    def test_weighted_without_state_is_rejected(self):
        with pytest.raises(ConfigurationError, match="weight state"):
            penalty(RegStrategy.l1_reweighted_hf(1.0), None, np.ones(2))

    def test_theta_lf_length_checked(self):
        with pytest.raises(ConfigurationError, match="theta_lf"):
            penalty(RegStrategy.l1_bifidelity_diff(1.0, THETA_LF), None, np.ones(3))

    def test_subgradient_matches_finite_differences(self):
        """Away from kinks the subgradient is the gradient; 100 random points per strategy."""
        n = 12
        root = Rng(99)
        for s_index, strategy in enumerate(_strategies(n, root.split(0))):
            for k in range(100):
                theta = root.split(1).split(s_index).split(k).generator.standard_normal(n)
                state = initial_state(strategy, theta)
                kinks_at_lf = strategy.kind == StrategyKind.L1_BIFIDELITY_DIFF
                reference = strategy.theta_lf if kinks_at_lf else np.zeros(n)
                away = np.abs(theta - reference) > 1e-4
                numeric = finite_difference_gradient(lambda t: penalty(strategy, state, t), theta, h=1e-7)
                exact = subgradient(strategy, state, theta)
                assert np.allclose(exact[away], numeric[away], rtol=1e-6, atol=1e-6), (strategy.kind, k)

    def test_subgradient_inequality_at_kinks(self):
        """R(θ') >= R(θ) + g·(θ' - θ) with θ sitting on the kink in half of its entries."""
        n = 8
        root = Rng(41)
        theta_lf = root.split(0).generator.standard_normal(n)
        strategies = [
            RegStrategy.l1_standard(0.3),
            RegStrategy.l1_reweighted_hf(0.3),
            RegStrategy.l1_bifidelity_diff(0.3, theta_lf),
            RegStrategy.l1_bifidelity_weighted(0.3, theta_lf),
            RegStrategy.l2(0.3),
        ]
        for s_index, strategy in enumerate(strategies):
            stream = root.split(1).split(s_index)
            theta = stream.split(0).generator.standard_normal(n)
            kink = theta_lf if strategy.kind == StrategyKind.L1_BIFIDELITY_DIFF else np.zeros(n)
            theta[::2] = kink[::2]
            if strategy.kind == StrategyKind.L2:
                theta = np.zeros(n)
            state = initial_state(strategy, stream.split(1).generator.standard_normal(n))
            g = subgradient(strategy, state, theta)
            base = penalty(strategy, state, theta)
            for k in range(200):
                other = theta + stream.split(2).split(k).generator.standard_normal(n)
                assert penalty(strategy, state, other) >= base + g @ (other - theta) - 1e-12, (strategy.kind, k)

    def test_weighted_bifidelity_with_zero_theta_lf_is_scaled_standard(self):
        lam, eps_w = 1e-3, 1e-2
        weighted = RegStrategy.l1_bifidelity_weighted(lam, np.zeros(6), eps_w=eps_w)
        standard = RegStrategy.l1_standard(lam / eps_w)
        theta = Rng(8).generator.standard_normal(6)
        theta[2] = 0.0
        state = initial_state(weighted, theta)
        assert penalty(weighted, state, theta) == pytest.approx(penalty(standard, None, theta), rel=1e-12)
        assert np.allclose(subgradient(weighted, state, theta), subgradient(standard, None, theta),
                           rtol=1e-12, atol=0)


# ═══════════════════════════════════════
# Weight states
# ═══════════════════════════════════════
class TestWeights:
    def test_reweight_from_previous_iterate(self):
        strategy = RegStrategy.l1_reweighted_hf(1.0, eps_w=0.5)
        state = update_reweight_state(strategy, np.array([0.5, -1.5, 0.0]))
        assert state.current_weights.tolist() == pytest.approx([1.0, 0.5, 2.0])

    def test_reweight_only_for_strategy_ii(self):
        with pytest.raises(ConfigurationError):
            update_reweight_state(RegStrategy.l1_standard(1.0), np.ones(2))

    def test_bifidelity_weights(self):
        state = bifidelity_weights(np.array([1.0, -3.0]), eps_w=1.0)
        assert state.current_weights.tolist() == pytest.approx([0.5, 0.25])

    def test_bifidelity_weights_zero_eps_needs_nonzero_theta_lf(self):
        assert bifidelity_weights(np.array([2.0]), eps_w=0.0).current_weights[0] == pytest.approx(0.5)
        with pytest.raises(ConfigurationError):
            bifidelity_weights(THETA_LF, eps_w=0.0)

    def test_initial_states(self):
        theta0 = np.array([1.0, 0.0, -1.0, 0.5])
        assert np.array_equal(initial_state(RegStrategy.l1_standard(1.0), theta0).current_weights, np.ones(4))
        weighted = RegStrategy.l1_bifidelity_weighted(1.0, THETA_LF, eps_w=1e-5)
        expected = 1.0 / (np.abs(THETA_LF) + 1e-5)
        assert np.allclose(initial_state(weighted, theta0).current_weights, expected)

    def test_state_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            RegState(np.array([1.0, 0.0]))


# ═══════════════════════════════════════
# Strategy validation
# ═══════════════════════════════════════
class TestStrategy:
    def test_regularized_kinds_need_positive_lambda(self):
        with pytest.raises(ConfigurationError, match="lambda"):
            RegStrategy.l1_standard(0.0)

    def test_bifidelity_needs_finite_theta_lf(self):
        with pytest.raises(ConfigurationError):
            RegStrategy.l1_bifidelity_diff(1.0, np.array([np.nan]))

    def test_with_lambda_keeps_the_rest(self):
        strategy = RegStrategy.l1_bifidelity_weighted(1.0, THETA_LF, eps_w=1e-3).with_lambda(0.1)
        assert strategy.lam == 0.1 and strategy.eps_w == 1e-3 and strategy.is_bifidelity

    def test_dropout_probability_range(self):
        with pytest.raises(ConfigurationError):
            RegStrategy.dropout(1.0)


# ═══════════════════════════════════════
# Dropout
# ═══════════════════════════════════════
class TestDropout:
    def test_masks_are_scaled_and_output_layer_free(self, rng):
        masks = dropout_masks([50, 40], 200, 0.6, rng)
        assert masks[-1] is None
        assert masks[0].shape == (200, 50)
        assert set(np.unique(masks[0])) <= {0.0, 1.0 / 0.4}
        assert abs(masks[0].mean() - 1.0) < 0.1

    def test_zero_probability(self, rng):
        assert dropout_masks([3], 4, 0.0, rng) == [None, None]

    def test_apply_dropout_inference_is_identity(self, rng):
        out = np.ones((3, 4))
        assert apply_dropout(out, 0.5, rng, training=False) is out

    def test_apply_dropout_preserves_the_mean(self, rng):
        p, n = 0.6, 100_000
        out = apply_dropout(np.ones(n), p, rng, training=True)
        assert set(np.unique(out)) <= {0.0, 1.0 / (1.0 - p)}
        sigma = np.sqrt(p / (1.0 - p) / n)
        assert abs(out.mean() - 1.0) < 3.0 * sigma


# ═══════════════════════════════════════
# Config form
# ═══════════════════════════════════════
class TestStrategyConfig:
    def test_lambda_alias(self):
        cfg = StrategyConfig.model_validate({"type": "l1_standard", "lambda": 0.01})
        strategy = strategy_from_config(cfg)
        assert strategy.kind == StrategyKind.L1_STANDARD and strategy.lam == 0.01

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            StrategyConfig.model_validate({"type": "l1_standard", "lambda": 0.01, "lamda": 1})

    def test_grid(self):
        assert StrategyConfig(type="none").grid() == [0.0]
        assert StrategyConfig(type="l2", lambda_grid=[1e-3, 1e-2]).grid() == [1e-3, 1e-2]
        with pytest.raises(ValueError):
            StrategyConfig(type="l1_standard").grid()

    def test_label_defaults_to_type(self):
        assert StrategyConfig(type="dropout", dropout_p=0.6).label == "dropout"
        assert StrategyConfig(type="dropout", name="p60", dropout_p=0.6).label == "p60"

    def test_bifidelity_needs_theta_lf(self):
        cfg = StrategyConfig.model_validate({"type": "l1_bifidelity_diff", "lambda": 1e-4})
        with pytest.raises(ConfigurationError, match="theta_lf"):
            strategy_from_config(cfg)
        assert strategy_from_config(cfg, theta_lf=THETA_LF).is_bifidelity
