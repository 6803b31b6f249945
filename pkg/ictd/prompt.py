"""
Prompt matrices for in-context policy evaluation.

A discounted prompt Z0 has 2d+1 rows and n+1 columns. Context column j
(1-based, j <= n) stacks (phi_{j-1}; gamma phi_j; R_j); the last column holds
the query (phi_query; 0; 0). An average-reward prompt adds a zero memory row
and stores undiscounted next features. Internally columns are 0-based, so
context column j lives at index j-1 and the query at index n.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ictd.exception import BoundsError, ParameterError
from ictd.mrp import Trajectory
from ictd.numerics import Matrix


class PromptKind(str, Enum):
    DISCOUNTED = "discounted"
    AVERAGE_REWARD = "average-reward"


@dataclass(frozen=True, eq=False)
class Prompt:
    Z: Matrix
    d: int
    n: int
    kind: PromptKind = PromptKind.DISCOUNTED
    gamma: Optional[float] = None

    def __post_init__(self):
        rows = 2 * self.d + (1 if self.kind == PromptKind.DISCOUNTED else 2)
        if self.Z.shape != (rows, self.n + 1):
            raise ParameterError(f"{self.kind.value} prompt with d={self.d}, n={self.n} must be "
                                 f"{rows}x{self.n + 1}, got {self.Z.shape}")

    @property
    def query(self) -> np.ndarray:
        return self.Z[:self.d, -1]


@dataclass(frozen=True, eq=False)
class Context:
    """The transitions of a prompt, read back column by column."""
    top: Matrix
    middle: Matrix
    rewards: np.ndarray
    query: np.ndarray
    gamma: Optional[float] = None

    @property
    def n(self) -> int:
        return len(self.rewards)

    @property
    def d(self) -> int:
        return self.top.shape[1]


def _as_rows(vectors, name: str) -> Matrix:
    rows = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if rows.ndim != 2:
        raise ParameterError(f"{name} must be a sequence of feature vectors")
    return rows


def _context_block(phis, next_phis, rewards, query) -> Tuple[Matrix, Matrix, np.ndarray, np.ndarray]:
    rewards = np.asarray(rewards, dtype=np.float64).ravel()
    n = len(rewards)
    if n < 1:
        raise ParameterError("a prompt needs at least one context transition")
    phis = _as_rows(phis, "phis")
    next_phis = _as_rows(next_phis, "next_phis")
    query = np.asarray(query, dtype=np.float64).ravel()
    d = len(query)
    if phis.shape[1] != d or next_phis.shape[1] != d:
        raise ParameterError(f"feature dimensions disagree: phis {phis.shape}, "
                             f"next_phis {next_phis.shape}, query {query.shape}")
    if phis.shape[0] not in (n, n + 1) or next_phis.shape[0] != n:
        raise ParameterError(f"{n} rewards need {n} (or {n + 1}) phis and {n} next_phis, "
                             f"got {phis.shape[0]} and {next_phis.shape[0]}")
    return phis[:n], next_phis, rewards, query


def build_prompt(phis, next_phis, rewards, gamma: float, query) -> Prompt:
    """
    Discounted prompt from phi_0..phi_{n-1} (a trailing phi_n is accepted and
    ignored), phi_1..phi_n, R_1..R_n and the query features.
    """
    top, nxt, rewards, query = _context_block(phis, next_phis, rewards, query)
    n, d = top.shape
    Z = np.zeros((2 * d + 1, n + 1))
    Z[:d, :n] = top.T
    Z[d:2 * d, :n] = gamma * nxt.T
    Z[2 * d, :n] = rewards
    Z[:d, n] = query
    return Prompt(Z=Z, d=d, n=n, kind=PromptKind.DISCOUNTED, gamma=float(gamma))


def build_avg_reward_prompt(phis, next_phis, rewards, query) -> Prompt:
    """Average-reward prompt; the memory row starts at zero."""
    top, nxt, rewards, query = _context_block(phis, next_phis, rewards, query)
    n, d = top.shape
    Z = np.zeros((2 * d + 2, n + 1))
    Z[:d, :n] = top.T
    Z[d:2 * d, :n] = nxt.T
    Z[2 * d, :n] = rewards
    Z[:d, n] = query
    return Prompt(Z=Z, d=d, n=n, kind=PromptKind.AVERAGE_REWARD)


def sliding_prompts(trajectory: Trajectory, n: int, gamma: float, t: int = 0) -> Tuple[Prompt, Prompt, float]:
    """
    The pair of prompts and the reward of one multi-task TD update.

    Z0 uses transitions t..t+n-1 and queries phi_{t+n+1}; Z0' shifts the
    window by one and queries phi_{t+n+2}. The returned reward is R_{t+n+2}.

    Raises:
        BoundsError: if the trajectory has fewer than t+n+2 transitions.
    """
    if n < 1 or t < 0:
        raise ParameterError(f"need n >= 1 and t >= 0, got n={n}, t={t}")
    if trajectory.length < t + n + 2:
        raise BoundsError(f"window at offset {t} with n={n} needs {t + n + 2} transitions, "
                          f"trajectory has {trajectory.length}")
    phi = trajectory.features
    R = trajectory.rewards
    # R[i] is R_{i+1}
    z0 = build_prompt(phi[t:t + n], phi[t + 1:t + n + 1], R[t:t + n], gamma, phi[t + n + 1])
    z0_next = build_prompt(phi[t + 1:t + n + 1], phi[t + 2:t + n + 2], R[t + 1:t + n + 1], gamma, phi[t + n + 2])
    return z0, z0_next, float(R[t + n + 1])


def query_substitute(prompt: Prompt, phi_s) -> Prompt:
    phi_s = np.asarray(phi_s, dtype=np.float64).ravel()
    if phi_s.shape != (prompt.d,):
        raise ParameterError(f"query must have {prompt.d} entries, got {phi_s.shape}")
    Z = prompt.Z.copy()
    Z[:prompt.d, -1] = phi_s
    return Prompt(Z=Z, d=prompt.d, n=prompt.n, kind=prompt.kind, gamma=prompt.gamma)


def context_from_prompt(prompt: Prompt) -> Context:
    d, n = prompt.d, prompt.n
    Z = prompt.Z
    return Context(
        top=Z[:d, :n].T.copy(),
        middle=Z[d:2 * d, :n].T.copy(),
        rewards=Z[2 * d, :n].copy(),
        query=Z[:d, n].copy(),
        gamma=prompt.gamma,
    )


def evaluate_states(prompt: Prompt, params, Phi: Matrix) -> np.ndarray:
    """Transformer prediction for every state, substituting phi(s) as the query."""
    from ictd.attention import predict

    return np.array([predict(query_substitute(prompt, phi_s), params) for phi_s in np.asarray(Phi)])
