from typing import Mapping, Optional, Sequence

import numpy as np

from src.common.autodiff import Tensor
from src.services.convlstm import ConvLstmForecaster


class CorrelationDetector(ConvLstmForecaster):
    """Forecasts the next m x m signature matrix from the signature history."""

    def __init__(self, m: int, hidden_ch: int = 16, kernel: int = 3, rng: Optional[np.random.Generator] = None):
        super().__init__("correlation", (m, m), hidden_ch, kernel, rng)
        self.m = m

    def forecast_signature(
        self, history_sigs: Sequence[np.ndarray], params: Optional[Mapping[str, Tensor]] = None
    ) -> Tensor:
        return self.forecast(history_sigs, params)
