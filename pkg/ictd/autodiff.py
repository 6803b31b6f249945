"""
Reverse-mode gradients of the transformer output.

The graph of one layer is fixed: A = Z^T Q Z, S = A or rowsoftmax(A),
B = Z M, Z' = Z + (1/n) P B S. The backward pass walks the layer trace from
the top with the seed dL/dZ_L = -1 at the bottom-right entry. Shared
parameters accumulate their gradient over all layers.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.special import softmax

from ictd.attention import AttentionKind, TransformerParams, forward, make_mask
from ictd.exception import ParameterError
from ictd.numerics import Matrix
from ictd.prompt import Prompt

ParamGrads = Tuple[Tuple[Matrix, Matrix], ...]


def _backward(Z0: Prompt, params: TransformerParams) -> Tuple[ParamGrads, Matrix]:
    result = forward(Z0, params)
    n = result.ZL.shape[1] - 1
    M = make_mask(params.mask, n)
    grads: List[List[Matrix]] = [[np.zeros_like(P), np.zeros_like(Q)] for P, Q in params.layers]

    G = np.zeros_like(result.ZL)
    G[-1, -1] = -1.0
    for l in reversed(range(params.L)):
        Z = result.trace[l]
        P, Q = params.layer(l)
        slot = grads[0] if params.shared else grads[l]

        A = Z.T @ Q @ Z
        S = softmax(A, axis=1) if params.attn == AttentionKind.SOFTMAX else A
        B = Z @ M
        dY = G / n

        slot[0] += dY @ (B @ S).T
        dZ = G + (P.T @ dY @ S.T) @ M.T
        dS = (P @ B).T @ dY
        if params.attn == AttentionKind.SOFTMAX:
            dA = S * (dS - np.sum(dS * S, axis=1, keepdims=True))
        else:
            dA = dS
        slot[1] += Z @ dA @ Z.T
        G = dZ + Q @ Z @ dA.T + Q.T @ Z @ dA

    return tuple((dP, dQ) for dP, dQ in grads), G


def grad_output(Z0: Prompt, params: TransformerParams) -> ParamGrads:
    """d(output)/d(P_l, Q_l), aligned with ``params.layers``."""
    return _backward(Z0, params)[0]


def query_gradient(Z0: Prompt, params: TransformerParams) -> np.ndarray:
    """d(output)/d(query features)."""
    d = Z0.d
    return _backward(Z0, params)[1][:d, -1]


@dataclass(frozen=True, eq=False)
class SingleLayerClosedForm:
    value: float
    grad_p: np.ndarray
    grad_Qa: Matrix
    grad_Qa_prime: Matrix
    grad_qa: np.ndarray


def tf1_closed_form(Z0: Prompt, P0: Matrix, Q0: Matrix) -> SingleLayerClosedForm:
    """
    Value and gradients of a single linear TD0-masked layer.

    With p the last row of P0, Q_a = Q0[:d, :d], Q_a' = Q0[d:2d, :d] and
    q_a = Q0[2d, :d]:

        alpha_i = <p, z_i>
        beta_i  = phi_{i-1}^T Q_a phi_q + (gamma phi_i)^T Q_a' phi_q + R_i q_a^T phi_q
        value   = -(1/n) sum_i alpha_i beta_i

    No other entry of P0 or Q0 affects the value.
    """
    d, n = Z0.d, Z0.n
    Z = Z0.Z
    if P0.shape != (2 * d + 1, 2 * d + 1) or Q0.shape != P0.shape:
        raise ParameterError(f"closed form needs {2 * d + 1}-square P0 and Q0")
    top, mid, rewards = Z[:d, :n], Z[d:2 * d, :n], Z[2 * d, :n]
    phi_q = Z[:d, n]
    p = P0[2 * d]
    Qa, Qa_prime, qa = Q0[:d, :d], Q0[d:2 * d, :d], Q0[2 * d, :d]

    alpha = p @ Z[:, :n]
    beta = top.T @ Qa @ phi_q + mid.T @ Qa_prime @ phi_q + rewards * (qa @ phi_q)
    return SingleLayerClosedForm(
        value=-float(alpha @ beta) / n,
        grad_p=-(Z[:, :n] @ beta) / n,
        grad_Qa=-np.outer(top @ alpha, phi_q) / n,
        grad_Qa_prime=-np.outer(mid @ alpha, phi_q) / n,
        grad_qa=-(rewards @ alpha) * phi_q / n,
    )


def _with_entry(params: TransformerParams, layer: int, which: int, index: Tuple[int, int],
                delta: float) -> TransformerParams:
    layers = [list(pair) for pair in params.layers]
    perturbed = layers[layer][which].copy()
    perturbed[index] += delta
    layers[layer][which] = perturbed
    return TransformerParams(layers=tuple(tuple(pair) for pair in layers), L=params.L,
                             shared=params.shared, attn=params.attn, mask=params.mask)


def finite_diff(Z0: Prompt, params: TransformerParams, h: float = 1e-6) -> ParamGrads:
    """Central differences on every stored parameter entry."""
    if h <= 0:
        raise ParameterError(f"step must be positive, got {h}")
    grads = []
    for l, pair in enumerate(params.layers):
        layer_grads = []
        for which, matrix in enumerate(pair):
            g = np.zeros_like(matrix)
            for index in np.ndindex(*matrix.shape):
                up = forward(Z0, _with_entry(params, l, which, index, h)).output
                down = forward(Z0, _with_entry(params, l, which, index, -h)).output
                g[index] = (up - down) / (2 * h)
            layer_grads.append(g)
        grads.append(tuple(layer_grads))
    return tuple(grads)
