"""Run configuration, reward shaping, directives, and the training loop."""

import numpy as np
import pytest

from fairfleet.errors import ConfigurationError
from fairfleet.learner import PPOHyper
from fairfleet.policy import BUDGET_FRACTIONS, speed_levels
from fairfleet.scenario import default_scenario
from fairfleet.sim import Environment
from fairfleet.trainer import (
    AUTO_CAP_FRACTION,
    N_HIGH_ACTIONS,
    REFERENCE_UNCONSTRAINED_EMISSIONS,
    PolicySet,
    RewardComponents,
    RunConfig,
    _high_action_mask,
    _issue_directive,
    central_input_dim,
    high_input_dim,
    low_input_dim,
    resolve_c_max,
    run_episode,
    shape_rewards,
    train,
)


def test_shape_rewards_components():
    con, fair, adj = shape_rewards(
        np.array([-0.3]), 1.0, np.array([0.15]), np.array([-0.02])
    )
    np.testing.assert_allclose(con, [-0.15], atol=1e-15)
    np.testing.assert_allclose(fair, [-0.02], atol=1e-15)
    np.testing.assert_allclose(adj, [-0.47], atol=1e-15)


def test_shape_rewards_all_off_is_identity():
    base = np.array([-0.5, -0.1, 0.0])
    con, fair, adj = shape_rewards(base, 0.0, np.array([1.0, 2.0, 0.0]), np.zeros(3))
    np.testing.assert_array_equal(con, np.zeros(3))
    np.testing.assert_array_equal(fair, np.zeros(3))
    np.testing.assert_array_equal(adj, base)


def test_resolve_c_max():
    assert resolve_c_max(RunConfig(cap_enabled=False, c_max=5.0)) is None
    auto = resolve_c_max(RunConfig(cap_enabled=True, c_max="auto"))
    assert abs(auto - AUTO_CAP_FRACTION * REFERENCE_UNCONSTRAINED_EMISSIONS) < 1e-12
    assert resolve_c_max(RunConfig(cap_enabled=True, c_max=None)) == auto
    assert resolve_c_max(RunConfig(cap_enabled=True, c_max=800.0)) == 800.0
    with pytest.raises(ConfigurationError):
        resolve_c_max(RunConfig(cap_enabled=True, c_max=-1.0))


def test_run_config_validation():
    with pytest.raises(ConfigurationError):
        RunConfig(centralized_baseline=True, hierarchy_enabled=True)
    with pytest.raises(ConfigurationError):
        RunConfig(fairness_mode="nash")
    with pytest.raises(ConfigurationError):
        RunConfig(fairness_timing="weekly")
    with pytest.raises(ConfigurationError):
        RunConfig(mask_fraction=1.5)
    with pytest.raises(ConfigurationError):
        RunConfig(episodes=0)
    with pytest.raises(ConfigurationError):
        RunConfig(dual_mode="adaptive")
    with pytest.raises(ConfigurationError):
        RunConfig(alpha_lambda=-0.1)
    with pytest.raises(ConfigurationError):
        RunConfig(c_max="tight")
    RunConfig(centralized_baseline=True, hierarchy_enabled=False)


def test_input_dims():
    assert low_input_dim(5) == 41
    assert high_input_dim(5) == 39
    assert central_input_dim(5) == 170


def test_decomposition_error_detects_drift():
    base = np.full((3, 2), -0.1)
    con = np.zeros((3, 2))
    fair = np.zeros((3, 2))
    comps = RewardComponents(base, con, fair, base.copy())
    assert comps.max_decomposition_error() == 0.0
    broken = base.copy()
    broken[1, 1] += 1e-3
    comps = RewardComponents(base, con, fair, broken)
    assert abs(comps.max_decomposition_error() - 1e-3) < 1e-15


def test_high_action_mask_layout():
    env = Environment(default_scenario(), 10, 123, p_storm=0.0)
    n_frac = len(BUDGET_FRACTIONS)
    for i in range(env.scenario.n_vessels):
        mask = _high_action_mask(env, i)
        assert mask.shape == (N_HIGH_ACTIONS,)
        # budget choices for route 0 are always open; whole route rows toggle
        assert np.all(mask[:n_frac] == 1.0)
        rows = mask.reshape(-1, n_frac)
        for row in rows:
            assert row.sum() in (0.0, float(n_frac))


def test_issue_directive_budget_math():
    env = Environment(default_scenario(), 10, 5, p_storm=0.0, cap=10.0)
    levels = speed_levels(env.scenario.v_max)
    d = _issue_directive(env, 0, action=4, c_max=10.0, levels=levels,
                         window_hours=10.0, t=0)
    assert d.route_choice == 1
    # fraction 0.5 of the full remaining cap, split across five vessels
    assert abs(d.budget - 1.0) < 1e-12
    np.testing.assert_array_equal(d.mask, [1.0, 1.0, 0.0, 0.0, 0.0])
    assert abs(d.speed_cap - (1.0 / (3.0e-4 * 10.0)) ** (1 / 3)) < 1e-9

    free = _issue_directive(env, 0, action=0, c_max=None, levels=levels,
                            window_hours=10.0, t=0)
    assert np.isinf(free.budget)
    np.testing.assert_array_equal(free.mask, np.ones(5))
    assert free.speed_cap == env.scenario.v_max


def _small_config(**overrides):
    defaults = dict(
        run_id="t", episodes=2, horizon=10, storms_enabled=False,
        hyper=PPOHyper(minibatch=16),
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


def _fresh_episode(config, seed=0, cap=None):
    from fairfleet.policy import init_policy
    from fairfleet.seeding import (
        STREAM_ACTION,
        STREAM_POLICY_INIT_HIGH,
        STREAM_POLICY_INIT_LOW,
        stream_rng,
    )
    from fairfleet.trainer import N_SPEED_LEVELS

    sc = default_scenario()
    n = sc.n_vessels
    policies = PolicySet(
        low=init_policy(low_input_dim(n), N_SPEED_LEVELS, stream_rng(seed, STREAM_POLICY_INIT_LOW)),
        high=init_policy(high_input_dim(n), N_HIGH_ACTIONS, stream_rng(seed, STREAM_POLICY_INIT_HIGH)),
    )
    env = Environment(sc, config.horizon, 99, p_storm=0.0, cap=cap)
    return run_episode(env, config, policies, stream_rng(seed, STREAM_ACTION),
                       lam=0.0, c_max=cap, epsilon=0.0)


def test_run_episode_audits_clean():
    config = _small_config()
    out = _fresh_episode(config)
    assert out.components.max_decomposition_error() == 0.0
    assert out.mask_violations == 0
    assert out.components.base.shape == (10, 5)
    assert np.all(np.diff(out.cum_history) >= 0.0)
    assert all(len(t) == 10 for t in out.low_trajs)
    # one high window for a 10-tick horizon at the default period
    assert all(len(t) == 1 for t in out.high_trajs)
    assert out.lam_end == 0.0


def test_offline_fairness_folds_uniformly():
    config = _small_config(fairness_enabled=True, fairness_mode="maxmin",
                           fairness_timing="offline")
    out = _fresh_episode(config)
    fair = out.components.fairness
    # the episode-level delta lands identically on every tick row
    np.testing.assert_allclose(fair, np.tile(fair[0], (10, 1)), atol=1e-15)
    assert np.all(fair <= 0.0)
    assert np.any(fair < 0.0)
    recomposed = out.components.base + out.components.constraint + fair
    np.testing.assert_allclose(out.components.adjusted, recomposed, atol=1e-15)


def test_tight_cap_ratchets_lambda():
    config = _small_config(cap_enabled=True, c_max=0.05)
    out = _fresh_episode(config, cap=0.05)
    assert out.lam_end > 0.0
    assert np.all(out.components.constraint <= 0.0)


def test_train_two_episodes_deterministic():
    config = _small_config()
    sc = default_scenario()
    r1 = train(sc, config, seed=0)
    r2 = train(sc, config, seed=0)
    assert [rec.to_json() for rec in r1.records] == [rec.to_json() for rec in r2.records]
    assert r1.agent_steps == 2 * 10 * 5
    assert len(r1.records) == 2
    assert all(rec.mask_violations == 0 for rec in r1.records)
    assert all(rec.decomposition_error == 0.0 for rec in r1.records)
    r3 = train(sc, config, seed=1)
    assert [rec.to_json() for rec in r3.records] != [rec.to_json() for rec in r1.records]


def test_lambda_persistence_accounting():
    # Episode rollouts are identical across the two modes for the first two
    # episodes (lambda only enters learning, not acting), so the persistent
    # run's second-episode dual equals the fresh run's plus its own carryover.
    sc = default_scenario()
    base = dict(cap_enabled=True, c_max=0.5, alpha_lambda=0.005)
    rp = train(sc, _small_config(**base, lambda_persist=True), seed=3)
    rn = train(sc, _small_config(**base, lambda_persist=False), seed=3)
    lam_p = [rec.lam for rec in rp.records]
    lam_n = [rec.lam for rec in rn.records]
    assert lam_p[0] == lam_n[0] > 0.0
    assert abs((lam_p[1] - lam_n[1]) - lam_p[0]) < 1e-9


def test_centralized_baseline_path():
    config = _small_config(hierarchy_enabled=False, centralized_baseline=True)
    sc = default_scenario()
    result = train(sc, config, seed=0)
    assert result.policies.central is not None
    assert result.policies.low is None and result.policies.high is None
    assert len(result.records) == 2
    assert all(rec.mask_violations == 0 for rec in result.records)


def test_flat_low_only_path():
    config = _small_config(hierarchy_enabled=False)
    result = train(default_scenario(), config, seed=0)
    assert result.policies.low is not None
    assert result.policies.high is None
