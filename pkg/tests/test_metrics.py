import numpy as np
import pytest

from ictd.attention import TransformerParams, forward
from ictd.autodiff import query_gradient
from ictd.constructions import construct_td, theta_star
from ictd.exception import DegenerateInputError
from ictd.metrics import (elementwise_stats, evaluate_record, implicit_weight_similarity, msve, normalize_for_viz,
                          sensitivity_similarity, td_weight, value_difference)
from ictd.mrp import gen_cartpole, stationary_distribution, true_value
from ictd.prompt import build_prompt
from ictd.training import evaluation_prompt


@pytest.fixture
def td_reference():
    return construct_td([0.5 * np.eye(4)] * 3)


@pytest.fixture
def eval_prompt(boyan_task, rng):
    return evaluation_prompt(boyan_task, 8, rng)


def test_msve(boyan_task):
    v = true_value(boyan_task.mrp, boyan_task.gamma)
    d_p = stationary_distribution(boyan_task.mrp.P)
    assert msve(v, v, d_p) == 0.0
    assert msve(v + 1.0, v, d_p) == pytest.approx(1.0, abs=1e-12)
    assert msve(lambda s: v[s], v, d_p) == 0.0


def test_stats_of_td_construction():
    stats = elementwise_stats(*construct_td([np.eye(3)]).layers[0], 3)
    assert stats == {"p_bottom_right": 1.0, "p_avg_abs_others": 0.0, "q_trace_left": -3.0, "q_trace_right": 3.0,
                     "q_avg_abs_others": 0.0}


def test_stats_of_theta_star():
    stats = elementwise_stats(*theta_star(2.0, -0.5, 0.0, 3).layers[0], 3)
    assert stats["p_bottom_right"] == 1.0
    assert stats["q_trace_left"] == -3.0
    assert stats["q_trace_right"] == 0.0
    assert stats["p_avg_abs_others"] == 0.0 and stats["q_avg_abs_others"] == 0.0


def test_normalize_flips_and_scales(rng):
    P, Q = rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
    P[-1, -1] = -abs(P[-1, -1])
    nP, nQ = normalize_for_viz(P, Q)
    assert nP[-1, -1] > 0
    assert np.max(np.abs(nP)) == 1.0 and np.max(np.abs(nQ)) == 1.0
    sP, sQ = normalize_for_viz(7.0 * P, 7.0 * Q)
    assert np.allclose(sP, nP) and np.allclose(sQ, nQ)


def test_normalize_rejects_zero_matrix():
    with pytest.raises(DegenerateInputError):
        normalize_for_viz(np.zeros((3, 3)), np.eye(3))


def test_sign_flip_is_a_symmetry(small_params, rng):
    P, Q = small_params
    d = 2
    assert elementwise_stats(-P, -Q, d) == elementwise_stats(P, Q, d)
    phis = rng.uniform(-1, 1, size=(5, d))
    z = build_prompt(phis[:4], phis[1:], rng.uniform(-1, 1, 4), 0.9, phis[4])
    a = TransformerParams(layers=((P, Q),), L=2)
    b = TransformerParams(layers=((-P, -Q),), L=2)
    assert forward(z, a).output == pytest.approx(forward(z, b).output, abs=1e-15)


def test_query_gradient_of_td_construction_is_its_weight(td_reference, eval_prompt):
    assert np.allclose(query_gradient(eval_prompt, td_reference), td_weight(td_reference, eval_prompt), atol=1e-10)


def test_reference_compared_with_itself(td_reference, boyan_task, eval_prompt):
    assert value_difference(td_reference, td_reference, boyan_task, eval_prompt) == 0.0
    assert implicit_weight_similarity(td_reference, td_reference, boyan_task, eval_prompt) == pytest.approx(1.0)
    assert sensitivity_similarity(td_reference, td_reference, boyan_task, eval_prompt) == pytest.approx(1.0)


def test_value_difference_detects_other_step_size(td_reference, boyan_task, eval_prompt):
    doubled = construct_td([np.eye(4)] * 3)
    assert value_difference(doubled, td_reference, boyan_task, eval_prompt) > 0.0


def test_zero_rewards_have_no_implicit_weight(td_reference, boyan_task, rng):
    phis = rng.uniform(0, 1, size=(7, 4))
    prompt = build_prompt(phis[:6], phis[1:], np.zeros(6), 0.9, phis[6])
    assert implicit_weight_similarity(td_reference, td_reference, boyan_task, prompt) == 0.0


def test_record_for_finite_task(td_reference, boyan_task, eval_prompt):
    record = evaluate_record(td_reference, td_reference, boyan_task, eval_prompt, seed=3, task_index=1, step=7)
    assert record.msve is not None and record.msve >= 0.0
    assert record.vd == 0.0
    assert record.seed == 3 and record.step == 7
    without_reference = evaluate_record(td_reference, None, boyan_task, eval_prompt, 3, 1, 7)
    assert without_reference.vd is None and without_reference.ss is None


def test_record_for_streaming_task(rng):
    task = gen_cartpole(3, rng)
    prompt = evaluation_prompt(task, 5, rng)
    record = evaluate_record(construct_td([np.eye(3)]), construct_td([np.eye(3)]), task, prompt, 0, 0, 1)
    assert record.msve is None and record.vd is None and record.iws is None
    assert record.q_trace_right == 3.0
