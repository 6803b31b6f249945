from dataclasses import replace

import numpy as np
import pytest

from ictd.exception import ParameterError
from ictd.mrp import Trajectory, gen_boyan_representable, sample_trajectory, stationary_distribution, true_value
from ictd.numerics import make_rng, weighted_norm
from ictd.oracles import (batch_avg_td, batch_rg, batch_td0, batch_td_lambda, eligibility_traces, online_td0,
                          running_mean_rewards)
from ictd.prompt import build_avg_reward_prompt, build_prompt, context_from_prompt
from ictd.verify import random_preconditioners


def _context(rng, n=5, d=3, gamma=0.9, rewards=None):
    phis = rng.uniform(-1, 1, size=(n + 1, d))
    rewards = rng.uniform(-1, 1, size=n) if rewards is None else rewards
    return context_from_prompt(build_prompt(phis[:n], phis[1:], rewards, gamma, phis[n]))


def test_zero_rewards_keep_zero_weights(rng):
    ctx = _context(rng, rewards=np.zeros(5))
    C_list = random_preconditioners(rng, 3, 4)
    for oracle in (batch_td0, batch_rg):
        assert all(np.all(w == 0) for w in oracle(ctx, C_list))


def test_single_step_by_hand():
    ctx = context_from_prompt(build_prompt([[1.0, -2.0]], [[0.5, 0.5]], [3.0], 0.9, [0.0, 1.0]))
    w = batch_td0(ctx, [np.eye(2)])
    assert np.array_equal(w[0], np.zeros(2))
    assert np.allclose(w[1], [3.0, -6.0])


def test_layer_count_must_match(rng):
    with pytest.raises(ParameterError):
        batch_td0(_context(rng), random_preconditioners(rng, 3, 2), L=3)


def test_rg_without_discount_is_td(rng):
    ctx = _context(rng, gamma=0.0)
    C_list = random_preconditioners(rng, 3, 5)
    for a, b in zip(batch_rg(ctx, C_list), batch_td0(ctx, C_list)):
        assert np.allclose(a, b, atol=1e-15)


def test_td_lambda_degenerates_to_td0(rng):
    ctx = _context(rng)
    C_list = random_preconditioners(rng, 3, 6)
    for a, b in zip(batch_td_lambda(ctx, C_list, lam=0.0), batch_td0(ctx, C_list)):
        assert np.array_equal(a, b)


def test_undamped_trace_is_plain_sum(rng):
    top = rng.uniform(-1, 1, size=(2, 3))
    assert np.allclose(eligibility_traces(top, 1.0)[1], top[0] + top[1])


def test_lambda_range(rng):
    with pytest.raises(ParameterError):
        batch_td_lambda(_context(rng), random_preconditioners(rng, 3, 1), lam=-0.1)


def _avg_context(rng, rewards):
    n = len(rewards)
    phis = rng.uniform(-1, 1, size=(n + 1, 2))
    return context_from_prompt(build_avg_reward_prompt(phis[:n], phis[1:], rewards, phis[n]))


def test_running_mean():
    assert np.allclose(running_mean_rewards(np.array([1.0, 3.0, 5.0])), [1.0, 2.0, 3.0])


def test_average_reward_constant_rewards(rng):
    ctx = _avg_context(rng, np.full(6, 0.7))
    for w in batch_avg_td(ctx, random_preconditioners(rng, 2, 5)):
        assert np.allclose(w, 0.0, atol=1e-12)


def test_average_reward_single_transition(rng):
    ctx = _avg_context(rng, np.array([2.0]))
    assert all(np.all(w == 0) for w in batch_avg_td(ctx, [np.eye(2)] * 3))


def test_online_td0_zero_features():
    traj = Trajectory(states=np.zeros(6, dtype=int), rewards=np.ones(5), features=np.zeros((6, 2)))
    w0 = np.array([0.3, -0.4])
    weights = online_td0(traj, 0.1, 0.9, w0)
    assert weights.shape == (6, 2)
    assert np.all(weights == w0)


def test_online_td0_rejects_nonpositive_steps():
    traj = Trajectory(states=np.zeros(3, dtype=int), rewards=np.ones(2), features=np.ones((3, 1)))
    with pytest.raises(ParameterError):
        online_td0(traj, [0.1, 0.0], 0.9)


def test_first_online_step_is_single_transition_batch_step(boyan_task, rng):
    traj = sample_trajectory(boyan_task, 10, rng)
    alpha = 0.05
    online = online_td0(traj, alpha, 0.9)[1]
    phi = traj.features
    ctx = context_from_prompt(build_prompt(phi[:1], phi[1:2], traj.rewards[:1], 0.9, phi[1]))
    assert np.allclose(online, batch_td0(ctx, [alpha * np.eye(boyan_task.d)])[1], atol=1e-15)


@pytest.mark.slow
def test_online_td0_converges_on_representable_task():
    rng = make_rng(21)
    task, _ = gen_boyan_representable(6, 3, 0.9, rng)
    T = 1_000_000
    traj = sample_trajectory(task, T, rng)
    steps = 0.05 / (1.0 + np.arange(T) / 20_000)
    w = online_td0(traj, steps, 0.9)[-1]
    d_p = stationary_distribution(task.mrp.P)
    assert weighted_norm(task.features.Phi @ w - true_value(task.mrp, 0.9), d_p) < 0.05


@pytest.mark.parametrize("oracle", [batch_td0, batch_rg])
def test_transition_order_does_not_matter(rng, oracle):
    ctx = _context(rng, n=7)
    C_list = random_preconditioners(rng, 3, 8)
    perm = rng.permutation(ctx.n)
    shuffled = replace(ctx, top=ctx.top[perm], middle=ctx.middle[perm], rewards=ctx.rewards[perm])
    assert np.allclose(oracle(shuffled, C_list)[-1], oracle(ctx, C_list)[-1], rtol=0.0, atol=1e-12)


@pytest.mark.parametrize("oracle", [batch_td0, batch_rg])
def test_step_scales_with_preconditioner(rng, oracle):
    ctx = _context(rng)
    C1, C2 = random_preconditioners(rng, 3, 2)
    s = -2.5
    assert np.allclose(oracle(ctx, [s * C1])[1], s * oracle(ctx, [C1])[1], rtol=0.0, atol=1e-14)
    base = oracle(ctx, [C1, C2])
    scaled = oracle(ctx, [C1, s * C2])
    assert np.array_equal(scaled[1], base[1])
    assert np.allclose(scaled[2] - scaled[1], s * (base[2] - base[1]), rtol=0.0, atol=1e-14)
