import numpy as np
import pytest

from ictd.attention import predict
from ictd.constructions import construct_td
from ictd.exception import BoundsError, ParameterError
from ictd.mrp import sample_trajectory
from ictd.prompt import (PromptKind, build_avg_reward_prompt, build_prompt, context_from_prompt, evaluate_states,
                         query_substitute, sliding_prompts)


def test_single_transition_layout():
    prompt = build_prompt([[1.0, 0.0]], [[0.0, 1.0]], [1.0], 0.9, [1.0, 0.0])
    expected = np.array([[1, 1], [0, 0], [0, 0], [0.9, 0], [1, 0]], dtype=float)
    assert np.array_equal(prompt.Z, expected)
    assert prompt.d == 2 and prompt.n == 1


def test_trailing_phi_is_accepted():
    with_tail = build_prompt([[1.0], [2.0], [3.0]], [[2.0], [3.0]], [1.0, 1.0], 0.5, [1.0])
    without = build_prompt([[1.0], [2.0]], [[2.0], [3.0]], [1.0, 1.0], 0.5, [1.0])
    assert np.array_equal(with_tail.Z, without.Z)


def test_zero_discount_zeroes_middle_block(rng):
    phis = rng.uniform(-1, 1, size=(5, 3))
    prompt = build_prompt(phis[:4], phis[1:], rng.uniform(-1, 1, 4), 0.0, phis[4])
    assert np.all(prompt.Z[3:6] == 0)


def test_query_column_contract(prompt):
    d, n = prompt.d, prompt.n
    assert np.all(prompt.Z[d:, n] == 0)


def test_dimension_mismatch():
    with pytest.raises(ParameterError):
        build_prompt([[1.0, 0.0]], [[0.0, 1.0]], [1.0], 0.9, [1.0, 0.0, 0.0])
    with pytest.raises(ParameterError):
        build_prompt([[1.0, 0.0]], [[0.0, 1.0], [1.0, 1.0]], [1.0], 0.9, [1.0, 0.0])


def test_sliding_prompts_match_literal_columns(boyan_task, rng):
    n, gamma = 5, 0.9
    traj = sample_trajectory(boyan_task, n + 4, rng)
    phi, R = traj.features, traj.rewards
    for t in (0, 1, 2):
        z0, z0_next, reward = sliding_prompts(traj, n, gamma, t)
        for j in range(n):
            assert np.array_equal(z0.Z[:, j], np.concatenate([phi[t + j], gamma * phi[t + j + 1], [R[t + j]]]))
            assert np.array_equal(z0_next.Z[:, j],
                                  np.concatenate([phi[t + j + 1], gamma * phi[t + j + 2], [R[t + j + 1]]]))
        assert np.array_equal(z0.query, phi[t + n + 1])
        assert np.array_equal(z0_next.query, phi[t + n + 2])
        assert reward == R[t + n + 1]


def test_consecutive_windows_overlap(boyan_task, rng):
    n = 4
    traj = sample_trajectory(boyan_task, n + 4, rng)
    a, _, _ = sliding_prompts(traj, n, 0.9, 0)
    b, _, _ = sliding_prompts(traj, n, 0.9, 1)
    assert np.array_equal(a.Z[:, 1:n], b.Z[:, :n - 1])


def test_sliding_prompts_need_enough_transitions(boyan_task, rng):
    traj = sample_trajectory(boyan_task, 6, rng)
    with pytest.raises(BoundsError):
        sliding_prompts(traj, 5, 0.9, 0)


def test_average_reward_prompt(rng):
    phis = rng.uniform(-1, 1, size=(4, 2))
    prompt = build_avg_reward_prompt(phis[:3], phis[1:], [1.0, 2.0, 3.0], phis[3])
    assert prompt.kind == PromptKind.AVERAGE_REWARD
    assert prompt.Z.shape == (6, 4)
    assert np.all(prompt.Z[-1] == 0)
    assert np.array_equal(prompt.Z[2:4, :2], prompt.Z[0:2, 1:3])


def test_query_substitute(prompt, rng):
    same = query_substitute(prompt, prompt.query)
    assert np.array_equal(same.Z, prompt.Z)
    phi_s = rng.uniform(-1, 1, size=prompt.d)
    moved = query_substitute(prompt, phi_s)
    assert np.array_equal(moved.Z[:, :prompt.n], prompt.Z[:, :prompt.n])
    assert np.array_equal(moved.query, phi_s)
    with pytest.raises(ParameterError):
        query_substitute(prompt, np.ones(prompt.d + 1))


def test_substitute_equals_rebuild(rng):
    phis = rng.uniform(-1, 1, size=(6, 3))
    rewards = rng.uniform(-1, 1, size=5)
    base = build_prompt(phis[:5], phis[1:], rewards, 0.9, phis[0])
    rebuilt = build_prompt(phis[:5], phis[1:], rewards, 0.9, phis[5])
    assert np.array_equal(query_substitute(base, phis[5]).Z, rebuilt.Z)


def test_context_round_trip(prompt):
    ctx = context_from_prompt(prompt)
    assert ctx.n == prompt.n and ctx.d == prompt.d
    rebuilt = build_prompt(ctx.top, ctx.middle / prompt.gamma, ctx.rewards, prompt.gamma, ctx.query)
    assert np.allclose(rebuilt.Z, prompt.Z, atol=1e-15)


def test_evaluate_states_matches_per_state_prompts(prompt, rng):
    params = construct_td([np.eye(prompt.d)] * 2)
    Phi = rng.uniform(-1, 1, size=(4, prompt.d))
    values = evaluate_states(prompt, params, Phi)
    for phi_s, value in zip(Phi, values):
        assert value == predict(query_substitute(prompt, phi_s), params)
