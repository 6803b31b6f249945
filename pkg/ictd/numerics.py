"""
Dense float64 matrix helpers, weighted norms, weighted least squares and
seeded random streams.

Every matrix in the package is a 2-D ``numpy.ndarray`` of dtype float64.
Random streams are ``numpy.random.Generator`` objects backed by PCG64; the
generator identity is pinned in ``ictd/docs/NUMERICS.md``.
"""

from typing import List

import numpy as np
from scipy import linalg

from ictd.constants import COSINE_ZERO_NORM, MAX_CONDITION
from ictd.exception import DimensionError, DomainError, SingularityError

Matrix = np.ndarray
SeededRng = np.random.Generator


def make_rng(seed: int) -> SeededRng:
    """PCG64 stream for ``seed``; identical seeds give identical draws."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, count: int) -> List[SeededRng]:
    """Independent child streams, one per worker."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def as_matrix(a, name: str = "matrix") -> Matrix:
    matrix = np.asarray(a, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise DomainError(f"{name} has non-finite entries")
    return matrix


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def weighted_norm(v: np.ndarray, d: np.ndarray) -> float:
    """sqrt(sum_s d(s) v(s)^2)."""
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if v.shape != d.shape:
        raise DimensionError(f"value shape {v.shape} does not match weights {d.shape}")
    if np.any(d < 0):
        raise DomainError("weights must be non-negative")
    return float(np.sqrt(np.sum(d * v * v)))


def weighted_least_squares(Phi: Matrix, v: np.ndarray, d_p: np.ndarray) -> np.ndarray:
    """
    argmin_w ||Phi w - v||_{d_p} through the weighted normal equations.

    Raises:
        SingularityError: if the weighted Gram matrix has condition number
            above ``MAX_CONDITION`` or is not positive definite.
    """
    Phi = np.asarray(Phi, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d_p = np.asarray(d_p, dtype=np.float64)
    states, dim = Phi.shape
    if v.shape != (states,) or d_p.shape != (states,):
        raise DimensionError(f"Phi {Phi.shape}, v {v.shape} and d_p {d_p.shape} disagree")
    if states < dim:
        raise DimensionError(f"need at least {dim} states, got {states}")
    if np.any(d_p < 0):
        raise DomainError("weights must be non-negative")

    weighted = Phi * d_p[:, None]
    gram = Phi.T @ weighted
    condition = float(np.linalg.cond(gram))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularityError(f"weighted Gram matrix is singular (condition {condition:.3e})",
                               condition=condition)
    try:
        factor = linalg.cho_factor(gram)
    except linalg.LinAlgError as e:
        raise SingularityError(f"weighted Gram matrix is not positive definite: {e}",
                               condition=condition)
    return linalg.cho_solve(factor, weighted.T @ v)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """<a,b>/(|a||b|), or 0 when either norm is below ``COSINE_ZERO_NORM``."""
    a = np.ravel(np.asarray(a, dtype=np.float64))
    b = np.ravel(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise DimensionError(f"vector lengths differ: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a < COSINE_ZERO_NORM or norm_b < COSINE_ZERO_NORM:
        return 0.0
    return float(np.clip(a @ b / (norm_a * norm_b), -1.0, 1.0))
