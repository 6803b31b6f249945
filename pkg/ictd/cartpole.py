"""
CartPole as an infinite-horizon Markov reward process.

Physics follow the standard cart-pole equations with semi-implicit Euler
integration. A fixed random policy pushes right with probability epsilon.
When the pole falls or the cart leaves the track the state is re-drawn from
p0 = U(-0.05, 0.05)^4, so trajectories never terminate.

Features and rewards come from a tile coder with random projections: every
tile gets phi ~ U(-1, 1)^d and r ~ U(-1, 1) the first time it is visited and
keeps them afterwards. The memo table belongs to one task and is not shared
between workers.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from ictd.exception import ParameterError

DEFAULT_TILE_WIDTHS: Tuple[float, float, float, float] = (0.48, 0.5, 0.0418, 0.5)
X_THRESHOLD = 2.4
THETA_THRESHOLD = 12 * 2 * math.pi / 360
INIT_BOUND = 0.05


@dataclass(frozen=True)
class CartPolePhysics:
    m_cart: float
    m_pole: float
    g: float
    l_pole: float
    tau: float
    f: float

    def __post_init__(self):
        for name in ("m_cart", "m_pole", "g", "l_pole", "tau", "f"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"cart-pole parameter {name} must be positive")


@dataclass
class CartPoleEnv:
    physics: CartPolePhysics
    epsilon: float
    x_threshold: float = X_THRESHOLD
    theta_threshold: float = THETA_THRESHOLD
    init_bound: float = INIT_BOUND

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.init_bound, self.init_bound, size=4)

    def step(self, state: np.ndarray, push_right: bool) -> np.ndarray:
        ph = self.physics
        x, x_dot, theta, theta_dot = state
        force = ph.f if push_right else -ph.f
        cos_theta = math.cos(theta)
        sin_theta = math.sin(theta)

        total_mass = ph.m_cart + ph.m_pole
        polemass_length = ph.m_pole * ph.l_pole
        temp = (force + polemass_length * theta_dot ** 2 * sin_theta) / total_mass
        theta_acc = (ph.g * sin_theta - cos_theta * temp) / (
            ph.l_pole * (4.0 / 3.0 - ph.m_pole * cos_theta ** 2 / total_mass))
        x_acc = temp - polemass_length * theta_acc * cos_theta / total_mass

        # semi-implicit Euler
        x_dot = x_dot + ph.tau * x_acc
        x = x + ph.tau * x_dot
        theta_dot = theta_dot + ph.tau * theta_acc
        theta = theta + ph.tau * theta_dot
        return np.array([x, x_dot, theta, theta_dot])

    def failed(self, state: np.ndarray) -> bool:
        return bool(abs(state[0]) > self.x_threshold or abs(state[2]) > self.theta_threshold)

    def advance(self, state: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, bool]:
        """One policy step; returns the next state and whether it was a reset."""
        next_state = self.step(state, bool(rng.random() < self.epsilon))
        if self.failed(next_state):
            return self.reset(rng), True
        return next_state, False


@dataclass
class TileCoder:
    dim: int
    seed: int
    widths: Tuple[float, ...] = DEFAULT_TILE_WIDTHS
    table: Dict[Tuple[int, ...], Tuple[np.ndarray, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError(f"feature dimension must be >= 1, got {self.dim}")
        if len(self.widths) != 4 or any(w <= 0 for w in self.widths):
            raise ParameterError(f"need four positive tile widths, got {self.widths}")
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def tile(self, state: np.ndarray) -> Tuple[int, ...]:
        return tuple(int(math.floor(s / w)) for s, w in zip(state, self.widths))

    def lookup(self, state: np.ndarray) -> Tuple[np.ndarray, float]:
        key = self.tile(state)
        if key not in self.table:
            phi = self._rng.uniform(-1.0, 1.0, size=self.dim)
            reward = float(self._rng.uniform(-1.0, 1.0))
            self.table[key] = (phi, reward)
        return self.table[key]

    def features(self, state: np.ndarray) -> np.ndarray:
        return self.lookup(state)[0]

    def reward(self, state: np.ndarray) -> float:
        return self.lookup(state)[1]

    @property
    def rng_state(self) -> Dict[str, Any]:
        return self._rng.bit_generator.state

    def restore(self, rng_state: Dict[str, Any], table: Dict[Tuple[int, ...], Tuple[np.ndarray, float]]) -> None:
        """Resume a coder from a saved generator state and memo table."""
        self._rng.bit_generator.state = rng_state
        self.table.update(table)


def sample_physics(rng: np.random.Generator) -> CartPolePhysics:
    return CartPolePhysics(
        m_cart=float(rng.uniform(0.5, 1.5)),
        m_pole=float(rng.uniform(0.5, 1.5)),
        g=float(rng.uniform(7.0, 12.0)),
        l_pole=float(rng.uniform(0.5, 1.5)),
        tau=float(rng.uniform(0.01, 0.05)),
        f=float(rng.uniform(5.0, 15.0)),
    )
