"""Weight configurations whose forward pass runs a known TD-style algorithm."""

from typing import Optional, Sequence

import numpy as np

from ictd.attention import AttentionKind, MaskKind, MaskVariant, TransformerParams, TwoHeadLayer, TwoHeadParams
from ictd.exception import DimensionError
from ictd.numerics import Matrix


def _check_preconditioners(C_list: Sequence[Matrix]) -> int:
    if not C_list:
        return 0
    d = np.asarray(C_list[0]).shape[0]
    for C in C_list:
        if np.asarray(C).shape != (d, d):
            raise DimensionError(f"every C_l must be {d}x{d}, got {np.asarray(C).shape}")
    return d


def _td_p(d: int, rows: int, eta: float = 1.0) -> Matrix:
    P = np.zeros((rows, rows))
    P[2 * d, 2 * d] = eta
    return P


def _td_q(C: Matrix, rows: int) -> Matrix:
    C = np.asarray(C, dtype=np.float64)
    d = C.shape[0]
    Q = np.zeros((rows, rows))
    Q[:d, :d] = -C.T
    Q[:d, d:2 * d] = C.T
    return Q


def construct_td(C_list: Sequence[Matrix], d: Optional[int] = None) -> TransformerParams:
    """L layers of batch TD(0), one per preconditioner C_l."""
    d = _check_preconditioners(C_list) or d
    rows = 2 * d + 1 if d else 0
    layers = tuple((_td_p(d, rows), _td_q(C, rows)) for C in C_list)
    return TransformerParams(layers=layers, L=len(layers), shared=False,
                             attn=AttentionKind.LINEAR, mask=MaskKind(MaskVariant.TD0))


def construct_td_one_layer(C: Matrix) -> TransformerParams:
    """Single-layer TD(0) without the next-feature block in Q."""
    C = np.asarray(C, dtype=np.float64)
    d = _check_preconditioners([C])
    rows = 2 * d + 1
    Q = np.zeros((rows, rows))
    Q[:d, :d] = -C.T
    return TransformerParams(layers=((_td_p(d, rows), Q),), L=1, shared=False,
                             attn=AttentionKind.LINEAR, mask=MaskKind(MaskVariant.TD0))


def construct_td_lambda(C_list: Sequence[Matrix], lam: float) -> TransformerParams:
    """TD(0) weights under the TD(lambda) mask."""
    params = construct_td(C_list)
    return TransformerParams(layers=params.layers, L=params.L, shared=False,
                             attn=AttentionKind.LINEAR, mask=MaskKind(MaskVariant.TD_LAMBDA, lam))


def construct_rg(C_list: Sequence[Matrix]) -> TransformerParams:
    d = _check_preconditioners(C_list)
    rows = 2 * d + 1
    layers = []
    for C in C_list:
        Q = _td_q(C, rows)
        Ct = np.asarray(C, dtype=np.float64).T
        Q[d:2 * d, :d] = Ct
        Q[d:2 * d, d:2 * d] = -Ct
        layers.append((_td_p(d, rows), Q))
    return TransformerParams(layers=tuple(layers), L=len(layers), shared=False,
                             attn=AttentionKind.LINEAR, mask=MaskKind(MaskVariant.TD0))


def construct_avg_td(C_list: Sequence[Matrix]) -> TwoHeadParams:
    """
    Two-head average-reward TD.

    Head 1 reads the reward row through the running-mean mask, head 2 reads
    the memory row; W adds both into the memory row.
    """
    d = _check_preconditioners(C_list)
    rows = 2 * d + 2
    P1 = np.zeros((rows, rows))
    P1[2 * d, 2 * d] = 1.0
    P2 = np.zeros((rows, rows))
    P2[2 * d + 1, 2 * d + 1] = 1.0
    W = np.zeros((rows, 2 * rows))
    W[2 * d + 1, 2 * d] = 1.0
    W[2 * d + 1, rows + 2 * d + 1] = 1.0
    return TwoHeadParams(layers=tuple(
        TwoHeadLayer(P1=P1.copy(), P2=P2.copy(), Q=_td_q(C, rows), W=W.copy()) for C in C_list))


def theta_star(eta: float, c: float, c_prime: float, d: int) -> TransformerParams:
    """Single layer with P = diag(0, eta) and Q = [[c I, 0], [c' I, 0]] blocks."""
    rows = 2 * d + 1
    Q = np.zeros((rows, rows))
    Q[:d, :d] = c * np.eye(d)
    Q[d:2 * d, :d] = c_prime * np.eye(d)
    return TransformerParams(layers=((_td_p(d, rows, eta), Q),), L=1, shared=False,
                             attn=AttentionKind.LINEAR, mask=MaskKind(MaskVariant.TD0))


def is_in_theta_star(P: Matrix, Q: Matrix, d: int, tol: float = 1e-12) -> bool:
    """True iff (P, Q) equals theta_star(eta, c, c') for some scalars, up to ``tol``."""
    rows = 2 * d + 1
    if P.shape != (rows, rows) or Q.shape != (rows, rows):
        return False
    p_rest = P.copy()
    p_rest[2 * d, 2 * d] = 0.0
    q_rest = Q.copy()
    q_rest[:2 * d, :d] = 0.0
    if np.max(np.abs(p_rest)) > tol or np.max(np.abs(q_rest)) > tol:
        return False
    for block in (Q[:d, :d], Q[d:2 * d, :d]):
        scalar = np.trace(block) / d
        if np.max(np.abs(block - scalar * np.eye(d))) > tol:
            return False
    return True
