"""
Multi-task TD pretraining.

For every task a trajectory of tau+1 transitions is sampled and a window of
n transitions slides over it. Each window gives (Z0, Z0', R) and one
semi-gradient step

    theta <- theta + alpha * (R + gamma TF(Z0') - TF(Z0)) * grad TF(Z0)

taken with Adam. The target TF(Z0') is a constant: only Z0 is differentiated.

Random streams are split per run: parameter init, training tasks,
trajectories, evaluation. All k training tasks are drawn before the first
update, so a recorded task set can stand in for the task stream. Metric
records draw only from the evaluation stream, so the parameter trajectory
is the same whether or not metrics are computed.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ictd import autodiff
from ictd.attention import AttentionKind, MaskKind, MaskVariant, TransformerParams, forward
from ictd.config import TrainConfig
from ictd.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, VTD_ALPHA_LIMIT, XAVIER_GAIN
from ictd.constructions import construct_td
from ictd.exception import ConfigError, DivergenceError
from ictd.metrics import MetricRecord, evaluate_record
from ictd.mrp import Task, Trajectory, gen_boyan, gen_boyan_representable, gen_cartpole, sample_trajectory
from ictd.numerics import SeededRng, make_rng, spawn_rngs
from ictd.prompt import Prompt, build_prompt, sliding_prompts

_VTD_ALPHA_CACHE: Dict[Tuple, float] = {}


def init_params(cfg: TrainConfig, rng: SeededRng) -> TransformerParams:
    """Xavier-uniform P and Q for every stored layer; nothing is pinned."""
    dim = 2 * cfg.d + 1
    bound = XAVIER_GAIN * np.sqrt(6.0 / (dim + dim))
    count = 1 if cfg.shared else cfg.L
    layers = tuple(
        (rng.uniform(-bound, bound, size=(dim, dim)), rng.uniform(-bound, bound, size=(dim, dim)))
        for _ in range(count)
    )
    return TransformerParams(layers=layers, L=cfg.L, shared=cfg.shared,
                             attn=AttentionKind(cfg.attn), mask=MaskKind(MaskVariant.TD0))

#--------------------------------------------------

@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, arrays: Sequence[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays])


def adam_update(arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState, alpha: float,
                weight_decay: float = 0.0) -> Tuple[List[np.ndarray], AdamState]:
    """One bias-corrected Adam descent step with decoupled multiplicative decay."""
    t = state.t + 1
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    updated, ms, vs = [], [], []
    for x, g, m, v in zip(arrays, grads, state.m, state.v):
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * (g * g)
        step = alpha * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        updated.append(x * (1.0 - alpha * weight_decay) - step)
        ms.append(m)
        vs.append(v)
    return updated, AdamState(m=ms, v=vs, t=t)


def _flatten(pairs) -> List[np.ndarray]:
    return [matrix for pair in pairs for matrix in pair]


def adam_step(params: TransformerParams, grads: autodiff.ParamGrads, state: Optional[AdamState], alpha: float,
              weight_decay: float) -> Tuple[TransformerParams, AdamState]:
    """Adam on every stored (P, Q); ``grads`` are loss gradients."""
    arrays = _flatten(params.layers)
    if state is None:
        state = AdamState.zeros_like(arrays)
    updated, state = adam_update(arrays, _flatten(grads), state, alpha, weight_decay)
    layers = tuple((updated[i], updated[i + 1]) for i in range(0, len(updated), 2))
    return TransformerParams(layers=layers, L=params.L, shared=params.shared, attn=params.attn,
                             mask=params.mask), state

#--------------------------------------------------

def sample_task(cfg: TrainConfig, rng: SeededRng) -> Task:
    if cfg.task_source == "boyan":
        return gen_boyan(cfg.states, cfg.d, rng, cfg.gamma)
    if cfg.task_source == "boyan-representable":
        return gen_boyan_representable(cfg.states, cfg.d, cfg.gamma, rng)[0]
    return gen_cartpole(cfg.d, rng, cfg.gamma, tuple(cfg.tile_widths))


def td_windows(trajectory: Trajectory, cfg: TrainConfig) -> Iterator[Tuple[Prompt, Prompt, float]]:
    for t in range(cfg.tau - cfg.n):
        yield sliding_prompts(trajectory, cfg.n, cfg.gamma, t)


def evaluation_prompt(task: Task, n: int, rng: SeededRng) -> Prompt:
    """Prompt over a fresh trajectory of n transitions, querying its last state."""
    traj = sample_trajectory(task, n, rng)
    phi = traj.features
    return build_prompt(phi[:n], phi[1:n + 1], traj.rewards, task.gamma, phi[n])


@dataclass
class TrainResult:
    params: TransformerParams
    records: List[MetricRecord] = field(default_factory=list)
    snapshots: List[Tuple[int, TransformerParams]] = field(default_factory=list)
    alpha_td: Optional[float] = None
    steps: int = 0


class RunStreams(NamedTuple):
    init: SeededRng
    tasks: SeededRng
    trajectories: SeededRng
    eval: SeededRng


def run_streams(seed: int) -> RunStreams:
    return RunStreams(*spawn_rngs(seed, len(RunStreams._fields)))


def training_tasks(cfg: TrainConfig, rng: Optional[SeededRng] = None) -> List[Task]:
    """The k training tasks of a run; a frozen run repeats one task object."""
    rng = run_streams(cfg.seed).tasks if rng is None else rng
    if cfg.freeze_task:
        return [sample_task(cfg, rng)] * cfg.k
    return [sample_task(cfg, rng) for _ in range(cfg.k)]


def train(cfg: TrainConfig, with_metrics: bool = True, tasks: Optional[Sequence[Task]] = None) -> TrainResult:
    """
    Multi-task TD pretraining of one seed.

    Args:
        tasks: Recorded training tasks; drawn from the task stream when None.
    """
    if cfg.tau < cfg.n + 2:
        raise ConfigError(f"tau={cfg.tau} is too short for context length n={cfg.n}")
    streams = run_streams(cfg.seed)
    tasks = training_tasks(cfg, streams.tasks) if tasks is None else list(tasks)
    if len(tasks) != cfg.k:
        raise ConfigError(f"{len(tasks)} training tasks given for k={cfg.k}")
    params = init_params(cfg, streams.init)
    state: Optional[AdamState] = None

    theta_td = None
    alpha_td = None
    if with_metrics and cfg.comparison_metrics and cfg.task_source != "cartpole":
        alpha_td = fit_alpha_for_vtd(cfg)
        theta_td = construct_td([alpha_td * np.eye(cfg.d)] * cfg.L)

    if cfg.freeze_task:
        logging.warning({"event": "frozen_task", "seed": cfg.seed,
                         "message": "training on a single frozen task; in-context TD is not expected to emerge"})

    result = TrainResult(params=params, alpha_td=alpha_td)
    step = 0
    for task_index, task in enumerate(tasks):
        trajectory = sample_trajectory(task, cfg.tau + 1, streams.trajectories)
        for z0, z0_next, reward in td_windows(trajectory, cfg):
            tf = forward(z0, params).output
            tf_next = forward(z0_next, params).output
            delta = reward + cfg.gamma * tf_next - tf
            grads = autodiff.grad_output(z0, params)
            loss_grads = tuple((-delta * dP, -delta * dQ) for dP, dQ in grads)
            params, state = adam_step(params, loss_grads, state, cfg.alpha, cfg.weight_decay)
            step += 1
            if not all(np.all(np.isfinite(m)) for m in _flatten(params.layers)):
                raise DivergenceError(f"parameters became non-finite at step {step}")
            if with_metrics and step % cfg.log_every == 0:
                result.records.append(_record(params, theta_td, cfg, streams.eval, task_index, step))

        if (task_index + 1) % cfg.snapshot_every == 0:
            result.snapshots.append((task_index + 1, params))

    if with_metrics and step % cfg.log_every != 0:
        result.records.append(_record(params, theta_td, cfg, streams.eval, cfg.k - 1, step))
    result.params = params
    result.steps = step
    logging.info({"event": "train_finished", "seed": cfg.seed, "steps": step, "records": len(result.records)})
    return result


def _record(params: TransformerParams, theta_td: Optional[TransformerParams], cfg: TrainConfig,
            eval_rng: SeededRng, task_index: int, step: int) -> MetricRecord:
    task = sample_task(cfg, eval_rng)
    prompt = evaluation_prompt(task, cfg.n, eval_rng)
    record = evaluate_record(params, theta_td, task, prompt, cfg.seed, task_index, step)
    logging.info({"event": "train_progress", **record.model_dump()})
    return record

#--------------------------------------------------

def td_direction(d: int) -> np.ndarray:
    """dQ/dalpha of the batch TD construction with C = alpha I."""
    E = np.zeros((2 * d + 1, 2 * d + 1))
    E[:d, :d] = -np.eye(d)
    E[:d, d:2 * d] = np.eye(d)
    return E


def alpha_gradient(z0: Prompt, alpha: float, L: int) -> float:
    """d TF(z0) / d alpha for construct_td([alpha I] * L)."""
    params = construct_td([alpha * np.eye(z0.d)] * L)
    E = td_direction(z0.d)
    return float(sum(np.sum(dQ * E) for _, dQ in autodiff.grad_output(z0, params)))


def fit_alpha_for_vtd(cfg: TrainConfig, rng: Optional[SeededRng] = None) -> float:
    """
    Learning rate of the batch TD reference, trained by multi-task TD with
    alpha as the only parameter. Fits without an explicit stream are cached
    per (L, n, d, gamma, task_source) and use a fixed stream.

    Raises:
        DivergenceError: if |alpha| exceeds ``VTD_ALPHA_LIMIT``.
    """
    key = (cfg.L, cfg.n, cfg.d, cfg.gamma, cfg.task_source, cfg.states, cfg.tau, cfg.vtd_fit_tasks)
    cached = rng is None
    if cached and key in _VTD_ALPHA_CACHE:
        return _VTD_ALPHA_CACHE[key]
    rng = make_rng(0) if rng is None else rng

    alpha = np.zeros(1)
    state = AdamState.zeros_like([alpha])
    for _ in range(cfg.vtd_fit_tasks):
        task = sample_task(cfg, rng)
        trajectory = sample_trajectory(task, cfg.tau + 1, rng)
        for z0, z0_next, reward in td_windows(trajectory, cfg):
            params = construct_td([alpha[0] * np.eye(cfg.d)] * cfg.L)
            delta = reward + cfg.gamma * forward(z0_next, params).output - forward(z0, params).output
            grad = np.array([-delta * alpha_gradient(z0, alpha[0], cfg.L)])
            (alpha,), state = adam_update([alpha], [grad], state, cfg.alpha)
            if abs(alpha[0]) > VTD_ALPHA_LIMIT or not np.isfinite(alpha[0]):
                raise DivergenceError(f"batch TD learning-rate fit diverged (alpha={alpha[0]:.3e})")

    alpha_star = float(alpha[0])
    logging.info({"event": "vtd_alpha_fitted", "alpha": alpha_star, "L": cfg.L, "n": cfg.n, "d": cfg.d,
                  "gamma": cfg.gamma, "task_source": cfg.task_source})
    if cached:
        _VTD_ALPHA_CACHE[key] = alpha_star
    return alpha_star
