import numpy as np
import pytest

from ictd.exception import ConfigError, ConvergenceError, DomainError, ParameterError
from ictd.mrp import (FeatureMap, FiniteMrp, Task, gen_boyan, gen_boyan_representable, gen_cartpole,
                      sample_trajectory, stationary_distribution, task_from_document, task_set_from_document,
                      task_set_to_document, task_to_document, true_value)
from ictd.numerics import make_rng


def test_boyan_sparsity_pattern(boyan_task):
    P = boyan_task.mrp.P
    m = boyan_task.mrp.m
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
    for i in range(m - 2):
        assert set(np.flatnonzero(P[i])) <= {i + 1, i + 2}
    assert P[m - 2, m - 1] == 1.0
    assert P[m - 2].sum() == 1.0
    assert np.all(P[m - 1] > 0)
    assert np.all(np.abs(boyan_task.features.Phi) <= 1.0)
    assert np.all(np.abs(boyan_task.mrp.r) <= 1.0)


def test_boyan_is_deterministic_per_seed():
    a = gen_boyan(6, 3, make_rng(5))
    b = gen_boyan(6, 3, make_rng(5))
    assert np.array_equal(a.mrp.P, b.mrp.P)
    assert np.array_equal(a.features.Phi, b.features.Phi)


def test_boyan_needs_three_states(rng):
    with pytest.raises(ParameterError):
        gen_boyan(2, 3, rng)


def test_invalid_mrp_rejected():
    with pytest.raises(DomainError):
        FiniteMrp(p0=np.array([0.5, 0.5]), P=np.array([[0.5, 0.6], [0.5, 0.5]]), r=np.zeros(2))


def test_stationary_distribution_small_chains():
    assert np.allclose(stationary_distribution(np.full((2, 2), 0.5)), [0.5, 0.5])
    assert np.allclose(stationary_distribution(np.array([[0.9, 0.1], [0.5, 0.5]])), [5 / 6, 1 / 6])


def test_stationary_distribution_rejects_reducible_chain():
    with pytest.raises(ConvergenceError):
        stationary_distribution(np.eye(2))


def test_stationary_distribution_of_boyan_chain(boyan_task):
    d_p = stationary_distribution(boyan_task.mrp.P)
    assert d_p.sum() == pytest.approx(1.0)
    assert np.max(np.abs(d_p @ boyan_task.mrp.P - d_p)) < 1e-10


def test_true_value_bellman_fixed_point(boyan_task):
    mrp = boyan_task.mrp
    v = true_value(mrp, 0.9)
    assert np.max(np.abs(v - (mrp.r + 0.9 * mrp.P @ v))) < 1e-9
    assert np.allclose(true_value(mrp, 0.0), mrp.r)
    zero = FiniteMrp(p0=mrp.p0, P=mrp.P, r=np.zeros(mrp.m))
    assert np.array_equal(true_value(zero, 0.9), np.zeros(mrp.m))


def test_representable_task_value_is_linear(rng):
    task, w_star = gen_boyan_representable(8, 3, 0.9, rng)
    assert np.allclose(true_value(task.mrp, 0.9), task.features.Phi @ w_star, atol=1e-10)
    myopic, w0 = gen_boyan_representable(5, 2, 0.0, rng)
    assert np.allclose(myopic.mrp.r, myopic.features.Phi @ w0)
    with pytest.raises(ParameterError):
        gen_boyan_representable(5, 2, 1.0, rng)


def test_trajectory_is_consistent_with_task(boyan_task, rng):
    traj = sample_trajectory(boyan_task, 200, rng)
    assert traj.length == 200
    assert len(traj.states) == 201
    assert np.array_equal(traj.rewards, boyan_task.mrp.r[traj.states[:-1]])
    assert np.array_equal(traj.features, boyan_task.features.Phi[traj.states])
    for s, s_next in zip(traj.states[:-1], traj.states[1:]):
        assert boyan_task.mrp.P[s, s_next] > 0


def test_deterministic_chain_cycles(rng):
    P = np.roll(np.eye(4), 1, axis=1)
    mrp = FiniteMrp(p0=np.array([1.0, 0.0, 0.0, 0.0]), P=P, r=np.arange(4.0))
    task = Task(mrp=mrp, features=FeatureMap(np.eye(4)), gamma=0.5)
    traj = sample_trajectory(task, 9, rng)
    assert list(traj.states) == [0, 1, 2, 3, 0, 1, 2, 3, 0, 1]


def test_same_seed_same_trajectory(boyan_task):
    a = sample_trajectory(boyan_task, 50, make_rng(3))
    b = sample_trajectory(boyan_task, 50, make_rng(3))
    assert np.array_equal(a.states, b.states)


def test_visit_frequencies_match_stationary_distribution(boyan_task):
    traj = sample_trajectory(boyan_task, 200_000, make_rng(8))
    counts = np.bincount(traj.states, minlength=boyan_task.mrp.m) / len(traj.states)
    tv = 0.5 * np.abs(counts - stationary_distribution(boyan_task.mrp.P)).sum()
    assert tv < 0.03


def test_cartpole_trajectory(rng):
    task = gen_cartpole(4, rng)
    assert not task.is_finite and task.d == 4
    traj = sample_trajectory(task, 1000, rng)
    assert traj.features.shape == (1001, 4)
    assert np.all(np.isfinite(traj.features)) and np.all(np.abs(traj.rewards) <= 1.0)
    assert traj.resets.any()


def test_finite_task_document_round_trip(boyan_task):
    restored = task_from_document(task_to_document(boyan_task))
    assert np.array_equal(restored.mrp.P, boyan_task.mrp.P)
    assert np.array_equal(restored.features.Phi, boyan_task.features.Phi)
    assert restored.gamma == boyan_task.gamma


def test_cartpole_task_document_keeps_tiles(rng):
    task = gen_cartpole(3, rng)
    traj = sample_trajectory(task, 20, rng)
    restored = task_from_document(task_to_document(task))
    for state, phi in zip(traj.states, traj.features):
        assert np.array_equal(restored.features.features(state), phi)
    assert restored.mrp.physics == task.mrp.physics


def test_task_set_document(rng):
    tasks = [gen_boyan(4, 2, rng) for _ in range(3)]
    doc = task_set_to_document(tasks, seed=5)
    assert (doc.seed, doc.count, len(doc.tasks)) == (5, 3, 3)
    restored = task_set_from_document(doc)
    assert [t.mrp.P.tolist() for t in restored] == [t.mrp.P.tolist() for t in tasks]


def test_frozen_task_set_keeps_one_shared_task(rng):
    task = gen_cartpole(3, rng)
    doc = task_set_to_document([task] * 6, frozen=True)
    assert len(doc.tasks) == 1
    restored = task_set_from_document(doc)
    assert len(restored) == 6 and all(t is restored[0] for t in restored)


def test_task_set_count_checked(rng):
    doc = task_set_to_document([gen_boyan(4, 2, rng)])
    with pytest.raises(ConfigError):
        task_set_from_document(doc.model_copy(update={"count": 2}))
