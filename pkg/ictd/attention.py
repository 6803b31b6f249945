"""
Masked linear and softmax self-attention and the L-layer forward pass.

Each layer updates the whole prompt

    Z_{l+1} = Z_l + (1/n) * P_l Z_l M S_l,   S_l = Z_l^T Q_l Z_l  (linear)
                                            S_l = rowsoftmax(Z_l^T Q_l Z_l)

and the transformer output is the negated bottom-right entry of Z_L. Shared
parameters apply the single (P, Q) pair at every layer.

The average-reward transformer uses two heads with masks M1 and M2 and a
combination matrix W that writes only into the memory row.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import softmax

from ictd.artifacts import MatrixDocument, matrix_from_document, matrix_to_document
from ictd.constants import SCHEMA_VERSION
from ictd.exception import ConfigError, DimensionError, ParameterError
from ictd.numerics import Matrix
from ictd.prompt import Prompt, PromptKind


class AttentionKind(str, Enum):
    LINEAR = "linear"
    SOFTMAX = "softmax"


class MaskVariant(str, Enum):
    TD0 = "td0"
    TD_LAMBDA = "td-lambda"
    AVG_HEAD1 = "avg-head1"
    AVG_HEAD2 = "avg-head2"


@dataclass(frozen=True)
class MaskKind:
    variant: MaskVariant = MaskVariant.TD0
    lam: float = 0.0
    n: Optional[int] = None

    def __post_init__(self):
        if self.variant == MaskVariant.TD_LAMBDA and not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.n is not None and self.n < 1:
            raise ParameterError(f"mask context length must be >= 1, got {self.n}")


def make_mask(kind: MaskKind, n: Optional[int] = None) -> Matrix:
    """(n+1)x(n+1) mask; the last row and column are always zero."""
    n = kind.n if n is None else n
    if n is None or n < 1:
        raise ParameterError(f"mask context length must be >= 1, got {n}")
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = np.eye(n)
    if kind.variant in (MaskVariant.TD0, MaskVariant.AVG_HEAD2):
        return M
    if kind.variant == MaskVariant.TD_LAMBDA:
        for i in range(n):
            for k in range(i + 1):
                M[i, k] = kind.lam ** (i - k)
        return M
    # running means: (R U D)[k] = mean(R_0..R_k)
    U = np.triu(np.ones((n + 1, n + 1)))
    D = np.diag(1.0 / np.arange(1, n + 2))
    return (np.eye(n + 1) - U @ D) @ M

#--------------------------------------------------

def _check_shapes(Z: Matrix, P: Matrix, Q: Matrix, M: Matrix) -> None:
    rows, cols = Z.shape
    if P.shape != (rows, rows) or Q.shape != (rows, rows):
        raise DimensionError(f"P {P.shape} and Q {Q.shape} must be {rows}x{rows} for Z {Z.shape}")
    if M.shape != (cols, cols):
        raise DimensionError(f"mask {M.shape} must be {cols}x{cols} for Z {Z.shape}")


def lin_attn(Z: Matrix, P: Matrix, Q: Matrix, M: Matrix) -> Matrix:
    _check_shapes(Z, P, Q, M)
    return P @ Z @ M @ (Z.T @ Q @ Z)


def softmax_attn(Z: Matrix, P: Matrix, Q: Matrix, M: Matrix) -> Matrix:
    _check_shapes(Z, P, Q, M)
    return P @ Z @ M @ softmax(Z.T @ Q @ Z, axis=1)


ATTENTION = {
    AttentionKind.LINEAR: lin_attn,
    AttentionKind.SOFTMAX: softmax_attn,
}

#--------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransformerParams:
    layers: Tuple[Tuple[Matrix, Matrix], ...]
    L: int
    shared: bool = False
    attn: AttentionKind = AttentionKind.LINEAR
    mask: MaskKind = field(default_factory=MaskKind)

    def __post_init__(self):
        if self.L < 0:
            raise ParameterError(f"layer count must be >= 0, got {self.L}")
        expected = 1 if self.shared else self.L
        if len(self.layers) != expected:
            raise ParameterError(f"{'shared' if self.shared else 'sequential'} parameters with L={self.L} "
                                 f"need {expected} (P, Q) pairs, got {len(self.layers)}")
        sizes = {m.shape for pair in self.layers for m in pair}
        if len(sizes) > 1 or any(len(s) != 2 or s[0] != s[1] for s in sizes):
            raise DimensionError(f"P and Q must be square and of one size, got {sorted(sizes)}")

    @property
    def dim(self) -> Optional[int]:
        return self.layers[0][0].shape[0] if self.layers else None

    def layer(self, l: int) -> Tuple[Matrix, Matrix]:
        return self.layers[0] if self.shared else self.layers[l]

    def unshare(self) -> "TransformerParams":
        """Equal sequential parameters: L copies of the shared pair."""
        if not self.shared:
            return self
        P, Q = self.layers[0]
        return TransformerParams(layers=tuple((P.copy(), Q.copy()) for _ in range(self.L)), L=self.L,
                                 shared=False, attn=self.attn, mask=self.mask)


@dataclass(frozen=True, eq=False)
class TwoHeadLayer:
    P1: Matrix
    P2: Matrix
    Q: Matrix
    W: Matrix


@dataclass(frozen=True, eq=False)
class TwoHeadParams:
    layers: Tuple[TwoHeadLayer, ...]

    @property
    def L(self) -> int:
        return len(self.layers)


@dataclass(frozen=True, eq=False)
class ForwardResult:
    ZL: Matrix
    output: float
    trace: List[Matrix]


def _mask_for(kind: MaskKind, n: int) -> Matrix:
    if kind.n is not None and kind.n != n:
        raise DimensionError(f"mask built for n={kind.n} applied to a prompt with n={n}")
    return make_mask(kind, n)


def forward(Z0: Union[Prompt, Matrix], params: TransformerParams) -> ForwardResult:
    """L-layer pass; ``trace`` holds Z_0..Z_L."""
    Z = np.array(Z0.Z if isinstance(Z0, Prompt) else Z0, dtype=np.float64)
    n = Z.shape[1] - 1
    M = _mask_for(params.mask, n)
    attend = ATTENTION[params.attn]
    trace = [Z]
    for l in range(params.L):
        P, Q = params.layer(l)
        Z = Z + attend(Z, P, Q, M) / n
        trace.append(Z)
    return ForwardResult(ZL=Z, output=-float(Z[-1, -1]), trace=trace)


def two_head_forward(Z0: Prompt, params: TwoHeadParams, L: Optional[int] = None) -> ForwardResult:
    """Average-reward pass; ``L`` defaults to the number of parameter layers."""
    if not isinstance(Z0, Prompt) or Z0.kind != PromptKind.AVERAGE_REWARD:
        raise ParameterError("two-head attention needs an average-reward prompt")
    L = params.L if L is None else L
    if L > params.L:
        raise ParameterError(f"{L} layers requested, parameters hold {params.L}")
    n = Z0.n
    M1 = make_mask(MaskKind(MaskVariant.AVG_HEAD1), n)
    M2 = make_mask(MaskKind(MaskVariant.AVG_HEAD2), n)
    Z = Z0.Z.copy()
    trace = [Z]
    for layer in params.layers[:L]:
        heads = np.vstack([lin_attn(Z, layer.P1, layer.Q, M1), lin_attn(Z, layer.P2, layer.Q, M2)])
        if layer.W.shape != (Z.shape[0], heads.shape[0]):
            raise DimensionError(f"W {layer.W.shape} must be {Z.shape[0]}x{heads.shape[0]}")
        Z = Z + layer.W @ heads / n
        trace.append(Z)
    return ForwardResult(ZL=Z, output=-float(Z[-1, -1]), trace=trace)


def predict(Z0: Prompt, params: Union[TransformerParams, TwoHeadParams]) -> float:
    if isinstance(params, TwoHeadParams):
        return two_head_forward(Z0, params).output
    return forward(Z0, params).output

#--------------------------------------------------

class LayerDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    P: MatrixDocument = Field(..., description="P of the layer (P1 for two-head layers)")
    Q: MatrixDocument = Field(..., description="Q of the layer")
    P2: Optional[MatrixDocument] = Field(None, description="Second-head P (two-head layers)")
    W: Optional[MatrixDocument] = Field(None, description="Head combination matrix (two-head layers)")


class ParamsDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int = Field(SCHEMA_VERSION, description="Document schema version")
    family: str = Field("single", description="single | two-head")
    attn: AttentionKind = Field(AttentionKind.LINEAR, description="Attention kind")
    mask: MaskVariant = Field(MaskVariant.TD0, description="Mask variant")
    lam: float = Field(0.0, description="TD(lambda) mask decay")
    L: int = Field(..., description="Layer count")
    shared: bool = Field(False, description="One (P, Q) pair applied at every layer")
    layers: List[LayerDocument] = Field(..., description="Per-layer matrices")


def params_to_document(params: Union[TransformerParams, TwoHeadParams]) -> ParamsDocument:
    if isinstance(params, TwoHeadParams):
        return ParamsDocument(
            family="two-head", mask=MaskVariant.AVG_HEAD1, L=params.L,
            layers=[LayerDocument(P=matrix_to_document(layer.P1), Q=matrix_to_document(layer.Q),
                                  P2=matrix_to_document(layer.P2), W=matrix_to_document(layer.W))
                    for layer in params.layers],
        )
    return ParamsDocument(
        attn=params.attn, mask=params.mask.variant, lam=params.mask.lam, L=params.L, shared=params.shared,
        layers=[LayerDocument(P=matrix_to_document(P), Q=matrix_to_document(Q)) for P, Q in params.layers],
    )


def params_from_document(doc: ParamsDocument) -> Union[TransformerParams, TwoHeadParams]:
    if doc.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported parameter schema_version {doc.schema_version}")
    if doc.family == "two-head":
        if any(layer.P2 is None or layer.W is None for layer in doc.layers):
            raise ConfigError("two-head layers need P2 and W")
        return TwoHeadParams(layers=tuple(
            TwoHeadLayer(P1=matrix_from_document(layer.P), P2=matrix_from_document(layer.P2),
                         Q=matrix_from_document(layer.Q), W=matrix_from_document(layer.W))
            for layer in doc.layers))
    if doc.family != "single":
        raise ConfigError(f"unknown parameter family '{doc.family}'")
    return TransformerParams(
        layers=tuple((matrix_from_document(layer.P), matrix_from_document(layer.Q)) for layer in doc.layers),
        L=doc.L, shared=doc.shared, attn=doc.attn, mask=MaskKind(doc.mask, doc.lam),
    )
