"""
Numerical verification of the weight constructions.

verify_equivalence runs a construction and its iterative oracle side by side
on random prompts and compares -<phi_query, w_l> with the bottom-right entry
of Z_l at every layer. verify_invariant_set estimates the expected multi-task
TD update at theta*(eta, c, c') by Monte Carlo and checks that it stays inside
the family. demo_msve_vs_context evaluates the TD construction on
representable tasks over a grid of context lengths.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ictd.attention import forward, two_head_forward
from ictd.autodiff import tf1_closed_form
from ictd.config import DemoConfig, InvariantSetConfig, VerifyConfig
from ictd.constants import INVARIANT_SET_MIN_SAMPLES, INVARIANT_SET_SE_BAND
from ictd.constructions import (construct_avg_td, construct_rg, construct_td, construct_td_lambda,
                                construct_td_one_layer, is_in_theta_star, theta_star)
from ictd.exception import ConfigError, ParameterError
from ictd.metrics import msve
from ictd.mrp import (Task, gen_boyan, gen_boyan_representable, sample_trajectory, stationary_distribution,
                      true_value)
from ictd.numerics import Matrix, SeededRng, spawn_rngs
from ictd.oracles import batch_avg_td, batch_rg, batch_td0, batch_td_lambda
from ictd.prompt import Prompt, build_avg_reward_prompt, build_prompt, context_from_prompt, evaluate_states, sliding_prompts

TINY = np.finfo(np.float64).tiny


def random_prompt(rng: SeededRng, n: int, d: int, average_reward: bool = False) -> Prompt:
    """Prompt with phi, R ~ U(-1, 1) and gamma ~ U(0, 1)."""
    phis = rng.uniform(-1.0, 1.0, size=(n + 1, d))
    rewards = rng.uniform(-1.0, 1.0, size=n)
    query = rng.uniform(-1.0, 1.0, size=d)
    if average_reward:
        return build_avg_reward_prompt(phis[:n], phis[1:], rewards, query)
    return build_prompt(phis[:n], phis[1:], rewards, float(rng.uniform(0.0, 1.0)), query)


def random_preconditioners(rng: SeededRng, d: int, L: int, scale: float = 0.1) -> List[Matrix]:
    return [rng.uniform(-scale, scale, size=(d, d)) for _ in range(L)]


@dataclass
class EquivalenceReport:
    kind: str
    rows: List[Dict] = field(default_factory=list)
    summary: List[Dict] = field(default_factory=list)
    max_abs_diff: float = 0.0
    tolerance: float = 0.0

    @property
    def passed(self) -> bool:
        return self.max_abs_diff <= self.tolerance


def _run_kind(kind: str, prompt: Prompt, C_list: List[Matrix], lam: float) -> Tuple[List[Matrix], List[np.ndarray]]:
    """Layer trace of the construction and the oracle weights."""
    ctx = context_from_prompt(prompt)
    if kind == "td0":
        return forward(prompt, construct_td(C_list)).trace, batch_td0(ctx, C_list)
    if kind == "td0-onelayer":
        C_list = C_list[:1]
        return forward(prompt, construct_td_one_layer(C_list[0])).trace, batch_td0(ctx, C_list)
    if kind == "rg":
        return forward(prompt, construct_rg(C_list)).trace, batch_rg(ctx, C_list)
    if kind == "td-lambda":
        return forward(prompt, construct_td_lambda(C_list, lam)).trace, batch_td_lambda(ctx, C_list, lam=lam)
    if kind == "avg":
        return two_head_forward(prompt, construct_avg_td(C_list)).trace, batch_avg_td(ctx, C_list)
    raise ParameterError(f"unknown construction '{kind}'")


def verify_equivalence(cfg: VerifyConfig) -> EquivalenceReport:
    """Per-layer |-<phi_query, w_l> - Z_l[-1, -1]| over ``cfg.seeds`` random prompts."""
    L = cfg.layers
    if cfg.kind == "td0-onelayer":
        L = min(L, 1)
    report = EquivalenceReport(kind=cfg.kind, tolerance=cfg.tolerance)
    per_layer = np.zeros((cfg.seeds, L + 1))
    for s, rng in enumerate(spawn_rngs(cfg.seed, cfg.seeds)):
        prompt = random_prompt(rng, cfg.n, cfg.d, average_reward=cfg.kind == "avg")
        C_list = random_preconditioners(rng, cfg.d, 1 if cfg.kind == "td0-onelayer" else L)
        trace, weights = _run_kind(cfg.kind, prompt, C_list, cfg.lam)
        for l in range(L + 1):
            diff = abs(-float(prompt.query @ weights[l]) - float(trace[l][-1, -1]))
            per_layer[s, l] = diff
            if l > 0:
                report.rows.append({"kind": cfg.kind, "seed": s, "layer": l, "abs_diff": diff,
                                    "log10_diff": float(np.log10(max(diff, TINY)))})

    logs = np.log10(np.maximum(per_layer, TINY))
    for l in range(L + 1):
        report.summary.append({"kind": cfg.kind, "layer": l, "max_log10_diff": float(logs[:, l].max()),
                               "mean_log10_diff": float(logs[:, l].mean()),
                               "passed": bool(per_layer[:, l].max() <= cfg.tolerance)})
    report.max_abs_diff = float(per_layer.max())
    logging.info({"event": "equivalence_checked", "kind": cfg.kind, "layers": L, "seeds": cfg.seeds,
                  "max_abs_diff": report.max_abs_diff, "passed": report.passed})
    return report


def theta_star_subfamily_check(eta: float, c: float, d: int, n: int, rng: SeededRng, samples: int = 30) -> float:
    """
    Largest gap between theta*(eta, c, 0) and one batch TD(0) step with
    C = -eta c I on random prompts.
    """
    params = theta_star(eta, c, 0.0, d)
    C = [-eta * c * np.eye(d)]
    worst = 0.0
    for _ in range(samples):
        prompt = random_prompt(rng, n, d)
        w1 = batch_td0(context_from_prompt(prompt), C)[-1]
        worst = max(worst, abs(forward(prompt, params).output - float(prompt.query @ w1)))
    return worst

#--------------------------------------------------

def demo_tasks(cfg: DemoConfig, rng: Optional[SeededRng] = None) -> List[Task]:
    """Representable chains with between states_min and states_max states."""
    rng = spawn_rngs(cfg.seed, 2)[0] if rng is None else rng
    tasks = []
    for _ in range(cfg.tasks):
        m = int(rng.integers(cfg.states_min, cfg.states_max + 1))
        tasks.append(gen_boyan_representable(m, cfg.d, cfg.gamma, rng)[0])
    return tasks


def demo_msve_vs_context(cfg: DemoConfig, tasks: Optional[Sequence[Task]] = None) -> List[Dict]:
    """
    MSVE of the C = alpha I TD construction against context length.

    A handful of short contexts make batch TD expand rather than contract,
    so the mean is heavy-tailed at large alpha; the median is reported too.
    """
    task_rng, trajectory_rng = spawn_rngs(cfg.seed, 2)
    tasks = demo_tasks(cfg, task_rng) if tasks is None else list(tasks)
    if len(tasks) != cfg.tasks:
        raise ConfigError(f"{len(tasks)} demo tasks given for tasks={cfg.tasks}")
    params = construct_td([cfg.alpha * np.eye(cfg.d)] * cfg.L)
    grid = range(1, cfg.context_max + 1)
    errors = np.zeros((cfg.tasks, len(grid)))
    for i, task in enumerate(tasks):
        trajectory = sample_trajectory(task, cfg.context_max, trajectory_rng)
        v_true = true_value(task.mrp, task.gamma)
        d_p = stationary_distribution(task.mrp.P)
        phi, R = trajectory.features, trajectory.rewards
        for j, t in enumerate(grid):
            prompt = build_prompt(phi[:t], phi[1:t + 1], R[:t], task.gamma, phi[t])
            errors[i, j] = msve(evaluate_states(prompt, params, task.features.Phi), v_true, d_p)

    rows = []
    for j, t in enumerate(grid):
        column = errors[:, j]
        std_error = float(column.std(ddof=1) / np.sqrt(cfg.tasks)) if cfg.tasks > 1 else 0.0
        rows.append({"context_length": t, "mean_msve": float(column.mean()), "std_error": std_error,
                     "median_msve": float(np.median(column)), "task_count": cfg.tasks})
    logging.info({"event": "demo_finished", "tasks": cfg.tasks, "alpha": cfg.alpha,
                  "first_msve": rows[0]["mean_msve"], "last_msve": rows[-1]["mean_msve"],
                  "last_median_msve": rows[-1]["median_msve"]})
    return rows

#--------------------------------------------------

@dataclass
class InvariantSetReport:
    rows: List[Dict]
    samples: int
    start_in_family: bool = True
    update_in_family: bool = True

    @property
    def coordinates_passed(self) -> bool:
        return all(row["passed"] for row in self.rows if not row["on_pattern"])

    @property
    def passed(self) -> bool:
        return self.start_in_family and self.coordinates_passed and self.update_in_family

    def mean_off_pattern_se(self) -> float:
        return float(np.mean([row["std_error"] for row in self.rows if not row["on_pattern"]]))

    def max_off_pattern_se(self) -> float:
        return float(max(row["std_error"] for row in self.rows if not row["on_pattern"]))


def _update_coordinates(delta: float, grads, d: int) -> List[Tuple[str, str, bool, float]]:
    """Named coordinates of one sampled update, flagged on- or off-pattern."""
    off = ~np.eye(d, dtype=bool)
    coords = []
    for j in range(d):
        coords.append((f"p[{j}]", "p_top", False, delta * grads.grad_p[j]))
        coords.append((f"p[{d + j}]", "p_middle", False, delta * grads.grad_p[d + j]))
        coords.append((f"q_a[{j}]", "q_a", False, delta * grads.grad_qa[j]))
    coords.append((f"p[{2 * d}]", "p_reward", True, delta * grads.grad_p[2 * d]))
    for name, block in (("Q_a", grads.grad_Qa), ("Q_a_prime", grads.grad_Qa_prime)):
        update = delta * block
        for i, j in zip(*np.nonzero(off)):
            coords.append((f"{name}[{i},{j}]", f"{name}_offdiag", False, update[i, j]))
        diag = np.diag(update)
        for j in range(d):
            coords.append((f"{name}[{j},{j}]-mean", f"{name}_diag_spread", False, diag[j] - diag.mean()))
        coords.append((f"{name}_diag_mean", f"{name}_diag", True, diag.mean()))
    return coords


def _update_matrices(delta: float, grads, d: int) -> Tuple[Matrix, Matrix]:
    """One sampled update as full (P, Q) matrices; only the last row of P and the first d columns of Q move."""
    rows = 2 * d + 1
    dP = np.zeros((rows, rows))
    dP[2 * d] = delta * grads.grad_p
    dQ = np.zeros((rows, rows))
    dQ[:d, :d] = delta * grads.grad_Qa
    dQ[d:2 * d, :d] = delta * grads.grad_Qa_prime
    dQ[2 * d, :d] = delta * grads.grad_qa
    return dP, dQ


def invariant_set_tasks(cfg: InvariantSetConfig, rng: Optional[SeededRng] = None) -> List[Task]:
    rng = spawn_rngs(cfg.seed, 2)[0] if rng is None else rng
    return [gen_boyan(cfg.states, cfg.d, rng, cfg.gamma) for _ in range(cfg.samples)]


def verify_invariant_set(cfg: InvariantSetConfig, perturb: bool = False,
                         tasks: Optional[Sequence[Task]] = None) -> InvariantSetReport:
    """
    Monte-Carlo estimate of the expected update at theta*(eta, c, c').

    Each sample takes a Boyan task, a trajectory of n+2 transitions and the
    prompts at offset 0. Off-pattern coordinates pass when their mean lies
    within ``INVARIANT_SET_SE_BAND`` standard errors of zero. The starting
    point must satisfy ``is_in_theta_star`` exactly and the point after the
    mean update within the same band of the largest off-pattern standard
    error. ``perturb`` sets Q0[2d, 0] = 0.5, which moves the start off the
    family. Tasks come from the run's task stream unless given.
    """
    if cfg.samples < INVARIANT_SET_MIN_SAMPLES:
        raise ParameterError(f"need at least {INVARIANT_SET_MIN_SAMPLES} samples, got {cfg.samples}")
    d, n = cfg.d, cfg.n
    P0, Q0 = theta_star(cfg.eta, cfg.c, cfg.c_prime, d).layers[0]
    if perturb:
        Q0 = Q0.copy()
        Q0[2 * d, 0] = 0.5
    task_rng, trajectory_rng = spawn_rngs(cfg.seed, 2)
    tasks = invariant_set_tasks(cfg, task_rng) if tasks is None else list(tasks)
    if len(tasks) != cfg.samples:
        raise ConfigError(f"{len(tasks)} tasks given for samples={cfg.samples}")

    names: List[Tuple[str, str, bool]] = []
    values = []
    step_P, step_Q = np.zeros_like(P0), np.zeros_like(Q0)
    for task in tasks:
        trajectory = sample_trajectory(task, n + 2, trajectory_rng)
        z0, z0_next, reward = sliding_prompts(trajectory, n, cfg.gamma, 0)
        current = tf1_closed_form(z0, P0, Q0)
        delta = reward + cfg.gamma * tf1_closed_form(z0_next, P0, Q0).value - current.value
        coords = _update_coordinates(delta, current, d)
        if not names:
            names = [c[:3] for c in coords]
        values.append([c[3] for c in coords])
        dP, dQ = _update_matrices(delta, current, d)
        step_P += dP
        step_Q += dQ

    values = np.array(values)
    means = values.mean(axis=0)
    std_errors = values.std(axis=0, ddof=1) / np.sqrt(cfg.samples)
    rows = []
    for (coordinate, block, on_pattern), mean, se in zip(names, means, std_errors):
        z = float(mean / se) if se > 0 else (0.0 if mean == 0 else float(np.inf))
        rows.append({"coordinate": coordinate, "block": block, "on_pattern": on_pattern, "mean": float(mean),
                     "std_error": float(se), "z_score": z,
                     "passed": bool(on_pattern or abs(mean) <= INVARIANT_SET_SE_BAND * se)})
    report = InvariantSetReport(rows=rows, samples=cfg.samples, start_in_family=is_in_theta_star(P0, Q0, d))
    band = INVARIANT_SET_SE_BAND * report.max_off_pattern_se()
    report.update_in_family = is_in_theta_star(P0 + step_P / cfg.samples, Q0 + step_Q / cfg.samples, d, band)
    logging.info({"event": "invariant_set_checked", "perturbed": perturb, "samples": cfg.samples,
                  "start_in_family": report.start_in_family, "update_in_family": report.update_in_family,
                  "coordinates_passed": report.coordinates_passed, "passed": report.passed})
    return report
