from typing import Mapping, Optional, Sequence

import numpy as np

from src.common.autodiff import Tensor
from src.common.exceptions import require
from src.services.convlstm import ConvLstmForecaster
from src.services.transforms import frequency_matrix


class TemporalDetector(ConvLstmForecaster):
    """Forecasts the next m x k/2 frequency matrix from the spectra of past windows."""

    def __init__(
        self, m: int, k: int, hidden_ch: int = 16, kernel: int = 3, rng: Optional[np.random.Generator] = None
    ):
        require(k % 2 == 0, f"temporal detector needs an even window length, got k={k}")
        super().__init__("temporal", (m, k // 2), hidden_ch, kernel, rng)
        self.m = m
        self.k = k

    def forecast_frequency(
        self, history_windows: Sequence[np.ndarray], params: Optional[Mapping[str, Tensor]] = None
    ) -> Tensor:
        return self.forecast_from_spectra([frequency_matrix(w) for w in history_windows], params)

    def forecast_from_spectra(
        self, spectra: Sequence[np.ndarray], params: Optional[Mapping[str, Tensor]] = None
    ) -> Tensor:
        return self.forecast(spectra, params)
