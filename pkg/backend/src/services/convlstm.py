"""Peephole ConvLSTM cell, temporal attention and the 1x1-conv + FC forecasting head.

Shared by the correlation and temporal detectors; each detector owns its own
parameters.
"""

from dataclasses import dataclass, fields
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.common.autodiff import (
    Tensor,
    add,
    conv2d,
    glorot_uniform,
    hadamard,
    matmul,
    reshape,
    sigmoid,
    softmax,
    stack,
    tanh,
    transpose,
    zeros,
)
from src.common.exceptions import ContractViolation, require


@dataclass
class ConvLstmParams:
    W_si: Tensor
    W_hi: Tensor
    W_sf: Tensor
    W_hf: Tensor
    W_sc: Tensor
    W_hc: Tensor
    W_so: Tensor
    W_ho: Tensor
    W_ci: Tensor
    W_cf: Tensor
    W_co: Tensor
    b_i: Tensor
    b_f: Tensor
    b_c: Tensor
    b_o: Tensor

    def __post_init__(self):
        kernel = self.W_si.shape[2:]
        hidden = self.W_si.shape[0]
        for name in ("W_si", "W_hi", "W_sf", "W_hf", "W_sc", "W_hc", "W_so", "W_ho"):
            w = getattr(self, name)
            if w.shape[0] != hidden or w.shape[2:] != kernel:
                raise ContractViolation(
                    f"ConvLSTM kernel {name} has shape {list(w.shape)}; expected {hidden} output channels and kernel {list(kernel)}"
                )
        for name in ("W_hi", "W_hf", "W_hc", "W_ho"):
            require(getattr(self, name).shape[1] == hidden, f"{name} must read {hidden} hidden channels")
        cell_shape = self.W_ci.shape
        for name in ("W_cf", "W_co"):
            require(getattr(self, name).shape == cell_shape, f"peephole {name} must match {list(cell_shape)}")
        require(cell_shape[0] == hidden, "peephole weights must be shaped like the cell state")

    @property
    def hidden_ch(self) -> int:
        return self.W_si.shape[0]

    @property
    def kernel_size(self) -> Tuple[int, int]:
        return tuple(self.W_si.shape[2:])

    @property
    def cell_shape(self) -> Tuple[int, ...]:
        return self.W_ci.shape

    @classmethod
    def initialize(
        cls,
        in_ch: int,
        hidden_ch: int,
        spatial: Tuple[int, int],
        kernel: int,
        rng: np.random.Generator,
    ) -> "ConvLstmParams":
        values = {}
        for gate in ("i", "f", "c", "o"):
            values[f"W_s{gate}"] = glorot_uniform(
                (hidden_ch, in_ch, kernel, kernel), in_ch * kernel * kernel, hidden_ch * kernel * kernel, rng
            )
            values[f"W_h{gate}"] = glorot_uniform(
                (hidden_ch, hidden_ch, kernel, kernel), hidden_ch * kernel * kernel, hidden_ch * kernel * kernel, rng
            )
            values[f"b_{gate}"] = zeros((hidden_ch,))
        for gate in ("i", "f", "o"):
            values[f"W_c{gate}"] = zeros((hidden_ch,) + tuple(spatial))
        return cls(**values)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Tensor], prefix: str) -> "ConvLstmParams":
        return cls(**{f.name: mapping[f"{prefix}.{f.name}"] for f in fields(cls)})

    def named(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.{f.name}": getattr(self, f.name) for f in fields(self)}


@dataclass
class ConvLstmState:
    H: Tensor
    C: Tensor

    @classmethod
    def zeros(cls, shape: Tuple[int, ...]) -> "ConvLstmState":
        return cls(H=zeros(shape), C=zeros(shape))


def convlstm_cell(x: Tensor, prev: ConvLstmState, p: ConvLstmParams) -> ConvLstmState:
    if prev.C.shape != p.cell_shape or prev.H.shape != p.cell_shape:
        raise ContractViolation(f"state shape {list(prev.C.shape)} does not match cell {list(p.cell_shape)}")
    if x.data.ndim != 3 or x.shape[1:] != p.cell_shape[1:]:
        raise ContractViolation(f"input {list(x.shape)} does not match spatial dims {list(p.cell_shape[1:])}")
    kh, kw = p.kernel_size
    pad = (kh // 2, kw // 2)

    def gate(w_x, w_h, bias):
        return add(conv2d(x, w_x, bias, padding=pad), conv2d(prev.H, w_h, padding=pad))

    i = sigmoid(add(gate(p.W_si, p.W_hi, p.b_i), hadamard(p.W_ci, prev.C)))
    f = sigmoid(add(gate(p.W_sf, p.W_hf, p.b_f), hadamard(p.W_cf, prev.C)))
    c = add(hadamard(f, prev.C), hadamard(i, tanh(gate(p.W_sc, p.W_hc, p.b_c))))
    o = sigmoid(add(gate(p.W_so, p.W_ho, p.b_o), hadamard(p.W_co, c)))
    h = hadamard(o, tanh(c))
    return ConvLstmState(H=h, C=c)


def temporal_attention(states: Sequence[Tensor]) -> Tuple[Tensor, Tensor]:
    """Aggregate hidden states weighted by softmax of their inner product with the last.

    Returns the representation H* and the weight vector.
    """
    if not states:
        raise ContractViolation("temporal attention needs at least one hidden state")
    shape = states[-1].shape
    n = int(np.prod(shape))
    flat = reshape(stack(states), (len(states), n))
    scores = matmul(flat, reshape(states[-1], (n, 1)))
    weights = softmax(scores)
    h_star = matmul(transpose(weights), flat)
    return reshape(h_star, shape), reshape(weights, (len(states),))


@dataclass
class ForecastHead:
    conv_kernel: Tensor  # 1 x hidden x 1 x 1
    conv_bias: Tensor  # 1
    fc_weight: Tensor  # out x in
    fc_bias: Tensor  # out x 1

    @classmethod
    def initialize(cls, hidden_ch: int, n_in: int, n_out: int, rng: np.random.Generator) -> "ForecastHead":
        return cls(
            conv_kernel=glorot_uniform((1, hidden_ch, 1, 1), hidden_ch, 1, rng),
            conv_bias=zeros((1,)),
            fc_weight=glorot_uniform((n_out, n_in), n_in, n_out, rng),
            fc_bias=zeros((n_out, 1)),
        )

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Tensor], prefix: str) -> "ForecastHead":
        return cls(**{f.name: mapping[f"{prefix}.{f.name}"] for f in fields(cls)})

    def named(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.{f.name}": getattr(self, f.name) for f in fields(self)}

    def project(self, features: Tensor, out_shape: Tuple[int, int]) -> Tensor:
        """1x1 conv to one channel, flatten, fully connected, reshape."""
        z = conv2d(features, self.conv_kernel, self.conv_bias)
        flat = reshape(z, (z.size, 1))
        out = add(matmul(self.fc_weight, flat), self.fc_bias)
        return reshape(out, out_shape)


class ConvLstmForecaster:
    """Unrolls a ConvLSTM over a matrix sequence and forecasts the next matrix."""

    def __init__(
        self,
        name: str,
        spatial: Tuple[int, int],
        hidden_ch: int,
        kernel: int,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        require(kernel % 2 == 1, f"ConvLSTM kernel must be odd for same padding, got {kernel}")
        self.name = name
        self.spatial = tuple(spatial)
        self.hidden_ch = hidden_ch
        self.kernel = kernel
        rng = rng if rng is not None else np.random.default_rng(0)
        n = self.spatial[0] * self.spatial[1]
        lstm = ConvLstmParams.initialize(1, hidden_ch, self.spatial, kernel, rng)
        head = ForecastHead.initialize(hidden_ch, n, n, rng)
        self.params: Dict[str, Tensor] = {**lstm.named(f"{name}.lstm"), **head.named(f"{name}.head")}

    def unroll(self, sequence: Sequence[np.ndarray], lstm: ConvLstmParams) -> List[Tensor]:
        state = ConvLstmState.zeros(lstm.cell_shape)
        hidden = []
        for x in sequence:
            x = np.asarray(x, dtype=np.float64)
            if x.shape != self.spatial:
                raise ContractViolation(f"{self.name}: input matrix {list(x.shape)} expected {list(self.spatial)}")
            state = convlstm_cell(Tensor(x[None]), state, lstm)
            hidden.append(state.H)
        return hidden

    def forecast(self, sequence: Sequence[np.ndarray], params: Optional[Mapping[str, Tensor]] = None) -> Tensor:
        require(len(sequence) >= 1, f"{self.name}: history length must be >= 1")
        params = params if params is not None else self.params
        lstm = ConvLstmParams.from_mapping(params, f"{self.name}.lstm")
        head = ForecastHead.from_mapping(params, f"{self.name}.head")
        hidden = self.unroll(sequence, lstm)
        h_star, _ = temporal_attention(hidden)
        return head.project(h_star, self.spatial)
