from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from src.common.autodiff import Tensor, conv2d, glorot_uniform, leaky_relu, zeros
from src.common.exceptions import ContractViolation, require
from src.services.convlstm import ForecastHead

KERNEL_TAPS = 3
LEAKY_SLOPE = 0.01


@dataclass
class DilatedLayer:
    kernel: Tensor  # c_out x c_in x 3 x 1, taps run along time
    bias: Tensor
    dilation: int


def dilated_layer(x: Tensor, layer: DilatedLayer) -> Tensor:
    """Rectangle (3, 1) convolution dilated along time, same-padded, leaky-rectified.

    ``x`` is channels x time x features; the feature axis is never mixed.
    """
    r = layer.dilation
    return leaky_relu(conv2d(x, layer.kernel, layer.bias, dilation=(r, 1), padding=(r, 0)), LEAKY_SLOPE)


def receptive_field(dilations: Sequence[int]) -> int:
    return 1 + (KERNEL_TAPS - 1) * sum(dilations)


class SpatialDetector:
    """Forecasts the raw target window from the long history with a dilated CNN."""

    name = "spatial"

    def __init__(
        self,
        m: int,
        history_len: int,
        k: int,
        channels: Sequence[int] = (32, 64, 128),
        dilations: Sequence[int] = (1, 3, 5),
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        if len(channels) != len(dilations):
            raise ContractViolation(f"{len(channels)} channel sizes for {len(dilations)} dilations")
        require(
            all(a < b for a, b in zip(dilations, dilations[1:])),
            f"dilations must be strictly increasing, got {list(dilations)}",
        )
        require(
            history_len >= receptive_field(dilations),
            f"history of {history_len} steps is shorter than the receptive field {receptive_field(dilations)}",
        )
        self.m = m
        self.history_len = history_len
        self.k = k
        self.channels = tuple(channels)
        self.dilations = tuple(dilations)

        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: Dict[str, Tensor] = {}
        c_in = 1
        for idx, c_out in enumerate(self.channels):
            self.params[f"spatial.layer{idx}.kernel"] = glorot_uniform(
                (c_out, c_in, KERNEL_TAPS, 1), c_in * KERNEL_TAPS, c_out * KERNEL_TAPS, rng
            )
            self.params[f"spatial.layer{idx}.bias"] = zeros((c_out,))
            c_in = c_out
        head = ForecastHead.initialize(c_in, history_len * m, m * k, rng)
        self.params.update(head.named("spatial.head"))

    def layers(self, params: Mapping[str, Tensor]) -> List[DilatedLayer]:
        return [
            DilatedLayer(params[f"spatial.layer{i}.kernel"], params[f"spatial.layer{i}.bias"], r)
            for i, r in enumerate(self.dilations)
        ]

    def forecast_window(self, history: np.ndarray, params: Optional[Mapping[str, Tensor]] = None) -> Tensor:
        history = np.asarray(history, dtype=np.float64)
        if history.shape != (self.m, self.history_len):
            raise ContractViolation(
                f"spatial: history {list(history.shape)} expected {[self.m, self.history_len]}"
            )
        params = params if params is not None else self.params
        x = Tensor(history.T[None])
        for layer in self.layers(params):
            x = dilated_layer(x, layer)
        head = ForecastHead.from_mapping(params, "spatial.head")
        return head.project(x, (self.m, self.k))
