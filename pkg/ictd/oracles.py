"""
Iterative reference implementations of the batch TD family and online TD(0).

Every batch oracle starts at w_0 = 0 and runs one preconditioned update per
layer over the whole context with w held fixed inside the sum:

    w_{l+1} = w_l + (1/n) C_l sum_i delta_i(w_l) x_i

TD(0) uses x_i = phi_{i-1}, residual gradient x_i = phi_{i-1} - gamma phi_i,
TD(lambda) the trace e_i = sum_{k<=i} lambda^{i-k} phi_{k-1}. The discounted
next feature gamma phi_i is read from the context as stored in the prompt.
"""

from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from ictd.exception import ParameterError
from ictd.mrp import Trajectory
from ictd.numerics import Matrix
from ictd.prompt import Context


def _layer_count(C_list: Sequence[Matrix], L: Optional[int]) -> int:
    if L is not None and L != len(C_list):
        raise ParameterError(f"{len(C_list)} preconditioners given for L={L}")
    return len(C_list)


def _td_residuals(ctx: Context, w: np.ndarray) -> np.ndarray:
    return ctx.rewards + ctx.middle @ w - ctx.top @ w


def _iterate(ctx: Context, C_list: Sequence[Matrix], L: Optional[int], directions: Matrix,
             residuals: Callable[[Context, np.ndarray], np.ndarray]) -> List[np.ndarray]:
    L = _layer_count(C_list, L)
    w = np.zeros(ctx.d)
    weights = [w]
    for l in range(L):
        w = w + np.asarray(C_list[l]) @ (directions.T @ residuals(ctx, w)) / ctx.n
        weights.append(w)
    return weights


def batch_td0(ctx: Context, C_list: Sequence[Matrix], L: Optional[int] = None) -> List[np.ndarray]:
    return _iterate(ctx, C_list, L, ctx.top, _td_residuals)


def batch_rg(ctx: Context, C_list: Sequence[Matrix], L: Optional[int] = None) -> List[np.ndarray]:
    return _iterate(ctx, C_list, L, ctx.top - ctx.middle, _td_residuals)


def eligibility_traces(top: Matrix, lam: float) -> Matrix:
    """Row i is e_i = lambda e_{i-1} + phi_{i-1}."""
    traces = np.empty_like(top)
    running = np.zeros(top.shape[1])
    for i, phi in enumerate(top):
        running = lam * running + phi
        traces[i] = running
    return traces


def batch_td_lambda(ctx: Context, C_list: Sequence[Matrix], L: Optional[int] = None,
                    lam: float = 0.0) -> List[np.ndarray]:
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {lam}")
    return _iterate(ctx, C_list, L, eligibility_traces(ctx.top, lam), _td_residuals)


def running_mean_rewards(rewards: np.ndarray) -> np.ndarray:
    return np.cumsum(rewards) / np.arange(1, len(rewards) + 1)


def batch_avg_td(ctx: Context, C_list: Sequence[Matrix], L: Optional[int] = None) -> List[np.ndarray]:
    """Differential TD with the running mean reward in place of discounting."""
    centered = ctx.rewards - running_mean_rewards(ctx.rewards)
    return _iterate(ctx, C_list, L, ctx.top,
                    lambda c, w: centered + c.middle @ w - c.top @ w)


def online_td0(trajectory: Trajectory, alphas: Union[float, Sequence[float]], gamma: float,
               w0: Optional[np.ndarray] = None) -> Matrix:
    """Linear semi-gradient TD(0) along a trajectory; row t is w_t."""
    phi = trajectory.features
    T = trajectory.length
    steps = np.broadcast_to(np.asarray(alphas, dtype=np.float64), (T,))
    if np.any(steps <= 0):
        raise ParameterError("step sizes must be positive")
    weights = np.empty((T + 1, phi.shape[1]))
    weights[0] = np.zeros(phi.shape[1]) if w0 is None else w0
    for t in range(T):
        w = weights[t]
        delta = trajectory.rewards[t] + gamma * phi[t + 1] @ w - phi[t] @ w
        weights[t + 1] = w + steps[t] * delta * phi[t]
    return weights
