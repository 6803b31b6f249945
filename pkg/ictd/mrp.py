"""
Markov reward processes, feature maps and evaluation-task generators.

Finite tasks are Boyan-style chains: state i moves to i+1 or i+2, state m-1
moves to m, and state m jumps back to a random state, so the chain never
terminates. CartPole tasks wrap ``ictd.cartpole`` and are sampled step by
step. Both kinds produce the same ``Trajectory`` value so that prompts can be
built without caring where the transitions came from.

State indices are 0-based internally (state 1 of the chain is row 0).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from ictd.artifacts import MatrixDocument, matrix_from_document, matrix_to_document
from ictd.cartpole import DEFAULT_TILE_WIDTHS, CartPoleEnv, CartPolePhysics, TileCoder, sample_physics
from ictd.constants import MAX_CONDITION, ROW_SUM_TOL, STATIONARY_MAX_ITER, STATIONARY_TOL
from ictd.exception import ConfigError, ConvergenceError, DimensionError, DomainError, ParameterError, SingularityError
from ictd.numerics import Matrix, SeededRng


@dataclass(frozen=True, eq=False)
class FiniteMrp:
    p0: np.ndarray
    P: Matrix
    r: np.ndarray

    def __post_init__(self):
        m = len(self.p0)
        if self.P.shape != (m, m) or self.r.shape != (m,):
            raise DimensionError(f"p0 {self.p0.shape}, P {self.P.shape} and r {self.r.shape} disagree")
        if np.any(self.P < 0) or np.any(self.p0 < 0):
            raise DomainError("probabilities must be non-negative")
        if np.max(np.abs(self.P.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise DomainError("transition matrix is not row-stochastic")
        if abs(self.p0.sum() - 1.0) > ROW_SUM_TOL:
            raise DomainError("initial distribution does not sum to 1")

    @property
    def m(self) -> int:
        return len(self.p0)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    Phi: Matrix

    @property
    def d(self) -> int:
        return self.Phi.shape[1]

    def __call__(self, state: int) -> np.ndarray:
        return self.Phi[state]


@dataclass(frozen=True, eq=False)
class Task:
    mrp: Union[FiniteMrp, CartPoleEnv]
    features: Union[FeatureMap, TileCoder]
    gamma: float
    generator: str = "boyan"
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ParameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        if isinstance(self.mrp, FiniteMrp) and self.features.Phi.shape[0] != self.mrp.m:
            raise DimensionError(f"{self.features.Phi.shape[0]} feature rows for {self.mrp.m} states")

    @property
    def d(self) -> int:
        return self.features.d if isinstance(self.features, FeatureMap) else self.features.dim

    @property
    def is_finite(self) -> bool:
        return isinstance(self.mrp, FiniteMrp)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """S_0..S_T, R_1..R_T, phi(S_0)..phi(S_T) and CartPole reset flags."""
    states: np.ndarray
    rewards: np.ndarray
    features: Matrix
    resets: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def length(self) -> int:
        return len(self.rewards)

#--------------------------------------------------

def _boyan_transitions(m: int, rng: SeededRng) -> Matrix:
    P = np.zeros((m, m))
    for i in range(m - 2):
        epsilon = rng.uniform(0.0, 1.0)
        P[i, i + 1] = epsilon
        P[i, i + 2] = 1.0 - epsilon
    P[m - 2, m - 1] = 1.0
    z = rng.uniform(0.0, 1.0, size=m)
    P[m - 1] = z / z.sum()
    return P


def _check_sizes(m: int, d: int) -> None:
    if m < 3:
        raise ParameterError(f"a Boyan chain needs at least 3 states, got {m}")
    if d < 1:
        raise ParameterError(f"feature dimension must be >= 1, got {d}")


def gen_boyan(m: int, d: int, rng: SeededRng, gamma: float = 0.9) -> Task:
    """Random Boyan chain whose value function is generally not representable."""
    _check_sizes(m, d)
    Phi = rng.uniform(-1.0, 1.0, size=(m, d))
    p0 = rng.uniform(0.0, 1.0, size=m)
    p0 = p0 / p0.sum()
    r = rng.uniform(-1.0, 1.0, size=m)
    P = _boyan_transitions(m, rng)
    return Task(mrp=FiniteMrp(p0=p0, P=P, r=r), features=FeatureMap(Phi), gamma=gamma, generator="boyan")


def gen_boyan_representable(m: int, d: int, gamma: float, rng: SeededRng) -> Tuple[Task, np.ndarray]:
    """
    Random Boyan chain with v = Phi w* exactly.

    Returns:
        The task and the ground-truth weight w*.
    """
    _check_sizes(m, d)
    if not 0.0 <= gamma < 1.0:
        raise ParameterError(f"gamma must lie in [0, 1), got {gamma}")
    w_star = rng.uniform(-1.0, 1.0, size=d)
    Phi = rng.uniform(-1.0, 1.0, size=(m, d))
    v = Phi @ w_star
    p0 = rng.uniform(0.0, 1.0, size=m)
    p0 = p0 / p0.sum()
    P = _boyan_transitions(m, rng)
    r = (np.eye(m) - gamma * P) @ v
    task = Task(mrp=FiniteMrp(p0=p0, P=P, r=r), features=FeatureMap(Phi), gamma=gamma,
                generator="boyan-representable")
    return task, w_star


def gen_cartpole(d: int, rng: SeededRng, gamma: float = 0.9,
                 tile_widths: Tuple[float, ...] = DEFAULT_TILE_WIDTHS) -> Task:
    """CartPole task with random physics, random policy and tile-coded random features."""
    if d < 1:
        raise ParameterError(f"feature dimension must be >= 1, got {d}")
    physics = sample_physics(rng)
    env = CartPoleEnv(physics=physics, epsilon=float(rng.uniform(0.0, 1.0)))
    coder = TileCoder(dim=d, seed=int(rng.integers(2 ** 63)), widths=tuple(tile_widths))
    return Task(mrp=env, features=coder, gamma=gamma, generator="cartpole")


def sample_trajectory(task: Task, length: int, rng: SeededRng) -> Trajectory:
    """S_0 ~ p0, S_{t+1} ~ P(.|S_t), R_{t+1} = r(S_t); ``length`` transitions."""
    if length < 1:
        raise ParameterError(f"trajectory length must be >= 1, got {length}")
    if task.is_finite:
        return _sample_finite(task, length, rng)
    return _sample_cartpole(task, length, rng)


def _sample_finite(task: Task, length: int, rng: SeededRng) -> Trajectory:
    mrp = task.mrp
    p0_cdf = np.cumsum(mrp.p0)
    p0_cdf[-1] = 1.0
    cdf = np.cumsum(mrp.P, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(length + 1)

    states = np.empty(length + 1, dtype=np.int64)
    states[0] = np.searchsorted(p0_cdf, u[0], side="right")
    for t in range(length):
        states[t + 1] = np.searchsorted(cdf[states[t]], u[t + 1], side="right")
    return Trajectory(
        states=states,
        rewards=mrp.r[states[:-1]].copy(),
        features=task.features.Phi[states].copy(),
        resets=np.zeros(length, dtype=bool),
    )


def _sample_cartpole(task: Task, length: int, rng: SeededRng) -> Trajectory:
    env, coder = task.mrp, task.features
    state = env.reset(rng)
    states = [state]
    rewards = np.empty(length)
    resets = np.zeros(length, dtype=bool)
    for t in range(length):
        rewards[t] = coder.reward(state)
        state, resets[t] = env.advance(state, rng)
        states.append(state)
    features = np.stack([coder.features(s) for s in states])
    return Trajectory(states=np.stack(states), rewards=rewards, features=features, resets=resets)

#--------------------------------------------------

def stationary_distribution(P: Matrix) -> np.ndarray:
    """
    d_p with d_p^T P = d_p^T by power iteration from the uniform distribution.

    Raises:
        ConvergenceError: if the chain is reducible, or the residual is still
            above ``STATIONARY_TOL`` after ``STATIONARY_MAX_ITER`` iterations
            (periodic chains).
    """
    P = np.asarray(P, dtype=np.float64)
    m = P.shape[0]
    if P.ndim != 2 or P.shape != (m, m):
        raise DimensionError(f"transition matrix must be square, got {P.shape}")
    if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
        raise DomainError("transition matrix is not row-stochastic")

    components, _ = connected_components(P > 0, directed=True, connection="strong")
    if components > 1:
        raise ConvergenceError(f"chain is reducible ({components} communicating classes); "
                               f"stationary distribution is not unique")

    dist = np.full(m, 1.0 / m)
    residual = np.inf
    for _ in range(STATIONARY_MAX_ITER):
        nxt = dist @ P
        residual = float(np.max(np.abs(nxt - dist)))
        dist = nxt
        if residual < STATIONARY_TOL:
            return dist / dist.sum()
    raise ConvergenceError(f"power iteration did not converge (residual {residual:.3e})", residual=residual)


def true_value(mrp: FiniteMrp, gamma: float) -> np.ndarray:
    """Solves (I - gamma P) v = r."""
    if not 0.0 <= gamma < 1.0:
        raise ParameterError(f"gamma must lie in [0, 1), got {gamma}")
    A = np.eye(mrp.m) - gamma * mrp.P
    condition = float(np.linalg.cond(A))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularityError(f"Bellman system is singular (condition {condition:.3e})", condition=condition)
    return linalg.solve(A, mrp.r)

#--------------------------------------------------

class TileEntry(BaseModel):
    tile: List[int] = Field(..., description="Tile index per state dimension")
    phi: List[float] = Field(..., description="Feature vector of the tile")
    reward: float = Field(..., description="Reward of the tile")


class TaskDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    generator: str = Field(..., description="boyan | boyan-representable | cartpole")
    gamma: float = Field(..., description="Discount factor")
    seed: Optional[int] = Field(None, description="Seed the task was drawn with")
    p0: Optional[List[float]] = Field(None, description="Initial distribution (finite tasks)")
    P: Optional[MatrixDocument] = Field(None, description="Transition matrix (finite tasks)")
    r: Optional[List[float]] = Field(None, description="Reward vector (finite tasks)")
    Phi: Optional[MatrixDocument] = Field(None, description="Feature matrix (finite tasks)")
    physics: Optional[Dict[str, float]] = Field(None, description="CartPole physical parameters")
    epsilon: Optional[float] = Field(None, description="Right-push probability of the policy")
    feature_dim: Optional[int] = Field(None, description="Tile feature dimension")
    tile_widths: Optional[List[float]] = Field(None, description="Tile width per state dimension")
    tile_seed: Optional[int] = Field(None, description="Seed of the tile coder")
    tile_rng_state: Optional[Dict[str, Any]] = Field(None, description="Tile coder generator state")
    tiles: Optional[List[TileEntry]] = Field(None, description="Memoized tiles")


def task_to_document(task: Task) -> TaskDocument:
    if task.is_finite:
        return TaskDocument(
            generator=task.generator, gamma=task.gamma, seed=task.seed,
            p0=[float(x) for x in task.mrp.p0],
            P=matrix_to_document(task.mrp.P),
            r=[float(x) for x in task.mrp.r],
            Phi=matrix_to_document(task.features.Phi),
        )
    env, coder = task.mrp, task.features
    return TaskDocument(
        generator=task.generator, gamma=task.gamma, seed=task.seed,
        physics={name: float(getattr(env.physics, name))
                 for name in ("m_cart", "m_pole", "g", "l_pole", "tau", "f")},
        epsilon=env.epsilon,
        feature_dim=coder.dim,
        tile_widths=list(coder.widths),
        tile_seed=coder.seed,
        tile_rng_state=coder.rng_state,
        tiles=[TileEntry(tile=list(key), phi=[float(x) for x in phi], reward=reward)
               for key, (phi, reward) in coder.table.items()],
    )


def task_from_document(doc: TaskDocument) -> Task:
    if doc.generator == "cartpole":
        if doc.physics is None or doc.epsilon is None or doc.feature_dim is None:
            raise ConfigError("cartpole task document lacks physics, epsilon or feature_dim")
        coder = TileCoder(dim=doc.feature_dim, seed=doc.tile_seed or 0,
                          widths=tuple(doc.tile_widths or DEFAULT_TILE_WIDTHS))
        table = {tuple(entry.tile): (np.array(entry.phi), entry.reward) for entry in doc.tiles or []}
        coder.restore(doc.tile_rng_state or coder.rng_state, table)
        env = CartPoleEnv(physics=CartPolePhysics(**doc.physics), epsilon=doc.epsilon)
        return Task(mrp=env, features=coder, gamma=doc.gamma, generator=doc.generator, seed=doc.seed)

    if doc.p0 is None or doc.P is None or doc.r is None or doc.Phi is None:
        raise ConfigError(f"{doc.generator} task document lacks p0, P, r or Phi")
    mrp = FiniteMrp(p0=np.array(doc.p0), P=matrix_from_document(doc.P), r=np.array(doc.r))
    logging.debug({"event": "task_loaded", "generator": doc.generator, "states": mrp.m})
    return Task(mrp=mrp, features=FeatureMap(matrix_from_document(doc.Phi)), gamma=doc.gamma,
                generator=doc.generator, seed=doc.seed)


class TaskSetDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: Optional[int] = Field(None, description="Seed of the run that drew the tasks")
    count: int = Field(..., ge=0, description="Number of tasks in the set")
    frozen: bool = Field(False, description="One task repeated count times")
    tasks: List[TaskDocument] = Field(..., description="Tasks in draw order; a single entry when frozen")


def task_set_to_document(tasks: List[Task], seed: Optional[int] = None, frozen: bool = False) -> TaskSetDocument:
    """Snapshot of a task set. Take it before sampling: CartPole tile tables grow as states are visited."""
    kept = tasks[:1] if frozen else tasks
    return TaskSetDocument(seed=seed, count=len(tasks), frozen=frozen, tasks=[task_to_document(t) for t in kept])


def task_set_from_document(doc: TaskSetDocument) -> List[Task]:
    if doc.frozen:
        if len(doc.tasks) != 1:
            raise ConfigError(f"frozen task set holds {len(doc.tasks)} tasks, expected 1")
        return [task_from_document(doc.tasks[0])] * doc.count
    if len(doc.tasks) != doc.count:
        raise ConfigError(f"task set declares {doc.count} tasks but holds {len(doc.tasks)}")
    return [task_from_document(d) for d in doc.tasks]
