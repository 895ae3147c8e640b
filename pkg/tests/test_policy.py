"""Policy networks, feasibility masks, schedules, and checkpoints."""

import numpy as np
import pytest

from fairfleet.errors import ConfigurationError, ContractError, DomainError
from fairfleet.policy import (
    PolicyParams,
    act,
    assemble_input,
    derive_feasible_mask,
    epsilon_at,
    forward,
    init_policy,
    load_params,
    param_count,
    save_params,
    speed_levels,
)
from fairfleet.sim import Observation


def test_speed_levels():
    np.testing.assert_array_equal(speed_levels(20.0), [0.0, 5.0, 10.0, 15.0, 20.0])


def test_param_count_matches_flat_length():
    rng = np.random.default_rng(0)
    params = init_policy(12, 5, rng, n_heads=3, n_hidden=8)
    assert len(params.flat) == param_count(12, 8, 5, 3)
    # blocks tile the flat vector exactly
    w1, b1, w2, b2 = params._split()
    assert w1.shape == (12, 8)
    assert b1.shape == (8,)
    assert w2.shape == (8, 16)
    assert b2.shape == (16,)


def test_init_bounds_and_zero_biases():
    rng = np.random.default_rng(7)
    params = init_policy(16, 5, rng, n_heads=2, n_hidden=32)
    assert np.all(np.abs(params.w1) <= 1.0 / np.sqrt(16))
    assert np.all(np.abs(params.w2) <= 1.0 / np.sqrt(32))
    assert np.all(params.b1 == 0.0)
    assert np.all(params.b2 == 0.0)
    with pytest.raises(ConfigurationError):
        init_policy(0, 5, rng)
    with pytest.raises(ConfigurationError):
        init_policy(16, 1, rng)


def test_zero_params_give_uniform_over_permitted():
    params = PolicyParams(4, 6, 5, 1, np.zeros(param_count(4, 6, 5, 1)))
    mask = np.array([[1.0, 1.0, 0.0, 1.0, 0.0]])
    probs, values = forward(params, np.ones((1, 4)), mask)
    np.testing.assert_allclose(probs[0, 0], [1 / 3, 1 / 3, 0.0, 1 / 3, 0.0], atol=1e-15)
    assert values[0] == 0.0


def test_forward_contract_errors():
    rng = np.random.default_rng(0)
    params = init_policy(4, 5, rng, n_hidden=6)
    with pytest.raises(ContractError):
        forward(params, np.ones((1, 3)), np.ones((1, 5)))
    with pytest.raises(ContractError):
        forward(params, np.ones((1, 4)), np.ones((1, 4)))
    with pytest.raises(ContractError):
        forward(params, np.ones((1, 4)), np.zeros((1, 5)))


def test_act_respects_mask_and_logp():
    rng = np.random.default_rng(3)
    params = init_policy(6, 5, rng, n_heads=2, n_hidden=8)
    x = rng.normal(size=(4, 6))
    mask = np.tile(np.array([[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]]), (4, 1))
    act_rng = np.random.default_rng(11)
    for epsilon in (0.0, 0.3):
        actions, logp, values = act(params, x, mask, act_rng, epsilon=epsilon)
        assert actions.shape == (4, 2)
        m3 = mask.reshape(4, 2, 5)
        for b in range(4):
            for h in range(2):
                assert m3[b, h, actions[b, h]] == 1.0
        # logged probability is the sampling distribution's, mixture included
        probs, _ = forward(params, x, mask)
        if epsilon > 0.0:
            uniform = m3 / m3.sum(axis=2, keepdims=True)
            probs = (1.0 - epsilon) * probs + epsilon * uniform
        expected = np.zeros(4)
        for b in range(4):
            for h in range(2):
                expected[b] += np.log(probs[b, h, actions[b, h]])
        np.testing.assert_allclose(logp, expected, atol=1e-12)
        assert values.shape == (4,)


def test_act_greedy_breaks_ties_low():
    params = PolicyParams(3, 4, 4, 1, np.zeros(param_count(3, 4, 4, 1)))
    mask = np.array([[0.0, 1.0, 1.0, 1.0]])
    actions, _, _ = act(params, np.zeros((1, 3)), mask, np.random.default_rng(0), greedy=True)
    assert actions[0, 0] == 1


def test_derive_feasible_mask_budget_cases():
    levels = speed_levels(20.0)
    mask, cap = derive_feasible_mask(0.375, 10.0, 3.0e-4, levels)
    np.testing.assert_array_equal(mask, [1.0, 1.0, 0.0, 0.0, 0.0])
    assert abs(cap - 5.0) < 1e-12
    mask, cap = derive_feasible_mask(np.inf, 10.0, 3.0e-4, levels)
    np.testing.assert_array_equal(mask, np.ones(5))
    assert cap == 20.0
    mask, cap = derive_feasible_mask(0.0, 10.0, 3.0e-4, levels)
    np.testing.assert_array_equal(mask, [1.0, 0.0, 0.0, 0.0, 0.0])
    assert cap == 0.0
    # a large budget admits everything; cap clamps at the top rung
    mask, cap = derive_feasible_mask(1e9, 10.0, 3.0e-4, levels)
    np.testing.assert_array_equal(mask, np.ones(5))
    assert cap == 20.0


def test_derive_feasible_mask_domain():
    levels = speed_levels(20.0)
    with pytest.raises(DomainError):
        derive_feasible_mask(1.0, 0.0, 3.0e-4, levels)
    with pytest.raises(DomainError):
        derive_feasible_mask(1.0, 10.0, -1.0, levels)
    with pytest.raises(DomainError):
        derive_feasible_mask(-0.1, 10.0, 3.0e-4, levels)


def test_assemble_input_layout():
    obs = Observation(values=np.arange(17.0), present=np.ones(17, dtype=bool))
    obs.present[3] = False
    x = assemble_input(obs, agent=2, n_agents=5, extras=np.array([0.5, 0.9]))
    assert x.shape == (17 + 17 + 5 + 2,)
    np.testing.assert_array_equal(x[:17], np.arange(17.0))
    assert x[17 + 3] == 0.0 and x[17 + 4] == 1.0
    onehot = x[34:39]
    np.testing.assert_array_equal(onehot, [0.0, 0.0, 1.0, 0.0, 0.0])
    np.testing.assert_array_equal(x[39:], [0.5, 0.9])
    assert assemble_input(obs, 0, 5).shape == (39,)


def test_epsilon_schedule():
    assert epsilon_at(0) == 0.2
    assert abs(epsilon_at(250) - 0.105) < 1e-12
    assert epsilon_at(500) == 0.01
    assert epsilon_at(1199) == 0.01


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(42)
    params = init_policy(10, 5, rng, n_heads=2, n_hidden=16)
    path = str(tmp_path / "p.bin")
    save_params(path, params, seed=7, step_count=12345)
    loaded, seed, steps = load_params(path)
    assert (seed, steps) == (7, 12345)
    assert (loaded.n_in, loaded.n_hidden, loaded.n_actions, loaded.n_heads) == (10, 16, 5, 2)
    np.testing.assert_array_equal(loaded.flat, params.flat)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ConfigurationError):
        load_params(str(path))


def test_checkpoint_rejects_truncation(tmp_path):
    rng = np.random.default_rng(0)
    params = init_policy(6, 5, rng, n_hidden=8)
    path = str(tmp_path / "t.bin")
    save_params(path, params, seed=0, step_count=0)
    blob = open(path, "rb").read()
    with open(path, "wb") as fh:
        fh.write(blob[:-16])
    with pytest.raises(ConfigurationError):
        load_params(path)
