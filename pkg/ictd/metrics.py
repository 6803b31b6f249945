"""
Training and evaluation metrics.

Value-based metrics evaluate a transformer at every state of a finite task by
substituting phi(s) as the query of a fixed prompt, then weight the result
by the stationary distribution d_p of the task.

The comparison metrics take ``theta_td`` as a batch TD(0) construction (see
``ictd.constructions.construct_td``); its preconditioners are read back from
the next-feature block of Q.
"""

from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from ictd.attention import TransformerParams
from ictd.autodiff import query_gradient
from ictd.exception import DegenerateInputError
from ictd.mrp import Task, stationary_distribution, true_value
from ictd.numerics import Matrix, cosine_similarity, weighted_least_squares, weighted_norm
from ictd.oracles import batch_td0
from ictd.prompt import Prompt, context_from_prompt, evaluate_states, query_substitute


class MetricRecord(BaseModel):
    seed: int = Field(..., description="Seed of the training run")
    task_index: int = Field(..., description="Index of the training task")
    step: int = Field(..., description="Parameter updates applied so far")
    msve: Optional[float] = Field(None, description="MSVE on the evaluation task (finite tasks only)")
    p_bottom_right: float = Field(..., description="Normalized P0[-1, -1]")
    p_avg_abs_others: float = Field(..., description="Mean |P0| without the bottom-right entry")
    q_trace_left: float = Field(..., description="tr(Q0[:d, :d])")
    q_trace_right: float = Field(..., description="tr(Q0[:d, d:2d])")
    q_avg_abs_others: float = Field(..., description="Mean |Q0| without both trace diagonals")
    vd: Optional[float] = Field(None, description="Value difference to batch TD")
    iws: Optional[float] = Field(None, description="Implicit weight similarity to batch TD")
    ss: Optional[float] = Field(None, description="Sensitivity similarity to batch TD")


def msve(value_fn: Union[np.ndarray, Callable[[int], float]], v_true: np.ndarray, d_p: np.ndarray) -> float:
    v_true = np.asarray(v_true, dtype=np.float64)
    values = (np.array([value_fn(s) for s in range(len(v_true))]) if callable(value_fn)
              else np.asarray(value_fn, dtype=np.float64))
    return weighted_norm(values - v_true, d_p) ** 2


def normalize_for_viz(P: Matrix, Q: Matrix) -> Tuple[Matrix, Matrix]:
    """
    Scale P and Q by their largest absolute entry, then negate both if the
    bottom-right entry of P is negative.
    """
    p_max = np.max(np.abs(P))
    q_max = np.max(np.abs(Q))
    if p_max == 0 or q_max == 0:
        raise DegenerateInputError("cannot normalize an all-zero parameter matrix")
    P, Q = P / p_max, Q / q_max
    if P[-1, -1] < 0:
        P, Q = -P, -Q
    return P, Q


def elementwise_stats(P0: Matrix, Q0: Matrix, d: int) -> Dict[str, float]:
    P, Q = normalize_for_viz(P0, Q0)
    p_others = np.abs(P).sum() - abs(P[-1, -1])
    diagonals = np.zeros(Q.shape, dtype=bool)
    idx = np.arange(d)
    diagonals[idx, idx] = True
    diagonals[idx, d + idx] = True
    return {
        "p_bottom_right": float(P[-1, -1]),
        "p_avg_abs_others": float(p_others / (P.size - 1)),
        "q_trace_left": float(np.trace(Q[:d, :d])),
        "q_trace_right": float(np.trace(Q[:d, d:2 * d])),
        "q_avg_abs_others": float(np.abs(Q[~diagonals]).mean()),
    }

#--------------------------------------------------

def _state_values(params, task: Task, prompt: Prompt) -> np.ndarray:
    return evaluate_states(prompt, params, task.features.Phi)


def td_weight(theta_td: TransformerParams, prompt: Prompt) -> np.ndarray:
    """Final batch TD(0) weight of a TD construction on the prompt's context."""
    d = prompt.d
    C_list = [Q[:d, d:2 * d].T for _, Q in theta_td.unshare().layers]
    return batch_td0(context_from_prompt(prompt), C_list)[-1]


def value_difference(theta_tf: TransformerParams, theta_td: TransformerParams, task: Task, prompt: Prompt) -> float:
    d_p = stationary_distribution(task.mrp.P)
    gap = _state_values(theta_tf, task, prompt) - _state_values(theta_td, task, prompt)
    return weighted_norm(gap, d_p) ** 2


def implicit_weight_similarity(theta_tf: TransformerParams, theta_td: TransformerParams, task: Task,
                               prompt: Prompt) -> float:
    d_p = stationary_distribution(task.mrp.P)
    Phi = task.features.Phi
    w_tf = weighted_least_squares(Phi, _state_values(theta_tf, task, prompt), d_p)
    return cosine_similarity(w_tf, td_weight(theta_td, prompt))


def sensitivity_similarity(theta_tf: TransformerParams, theta_td: TransformerParams, task: Task,
                           prompt: Prompt) -> float:
    d_p = stationary_distribution(task.mrp.P)
    similarities = []
    for phi_s in task.features.Phi:
        z = query_substitute(prompt, phi_s)
        similarities.append(cosine_similarity(query_gradient(z, theta_tf), query_gradient(z, theta_td)))
    return float(np.clip(d_p @ np.array(similarities), -1.0, 1.0))


def evaluate_record(params: TransformerParams, theta_td: Optional[TransformerParams], task: Task,
                    prompt: Prompt, seed: int, task_index: int, step: int) -> MetricRecord:
    """
    One metric row. Value-based fields stay empty for streaming tasks, and
    comparison fields stay empty without a TD reference.
    """
    P0, Q0 = params.layer(0)
    record = dict(seed=seed, task_index=task_index, step=step, **elementwise_stats(P0, Q0, prompt.d))
    if task.is_finite:
        d_p = stationary_distribution(task.mrp.P)
        record["msve"] = msve(_state_values(params, task, prompt), true_value(task.mrp, task.gamma), d_p)
        if theta_td is not None:
            record["vd"] = value_difference(params, theta_td, task, prompt)
            record["iws"] = implicit_weight_similarity(params, theta_td, task, prompt)
            record["ss"] = sensitivity_similarity(params, theta_td, task, prompt)
    return MetricRecord(**record)
