from dataclasses import asdict, dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from cache.cache_manager import CacheManager
from src.common.autodiff import Tensor, concat
from src.common.exceptions import ContractViolation, require
from src.services.correlation_detector import CorrelationDetector
from src.services.dataset import NormalizationStats
from src.services.spatial_detector import SpatialDetector
from src.services.temporal_detector import TemporalDetector
from src.services.transforms import (
    BLOCK_ORDER,
    TargetLayout,
    WindowView,
    build_target,
    frequency_matrix,
    history_count,
    signature_matrix,
    slice_windows,
)


@dataclass(frozen=True)
class ModelHyperparameters:
    m: int
    tau: int
    k: int
    stride: int
    hidden_ch: int = 16
    lstm_kernel: int = 3
    dilated_channels: Tuple[int, ...] = (32, 64, 128)
    dilations: Tuple[int, ...] = (1, 3, 5)
    detectors: Tuple[str, ...] = BLOCK_ORDER

    def __post_init__(self):
        require(self.k % 2 == 0, f"window length k must be even, got {self.k}")
        require(0 < self.k < self.tau, f"need 0 < k < tau, got k={self.k}, tau={self.tau}")
        require(self.stride >= 1, f"stride must be >= 1, got {self.stride}")
        require(self.d >= 1, f"tau - k must cover at least one stride (tau={self.tau}, k={self.k}, s={self.stride})")
        unknown = [d for d in self.detectors if d not in BLOCK_ORDER]
        require(not unknown, f"unknown detectors {unknown}")
        require(len(self.detectors) > 0, "at least one detector must be enabled")

    @property
    def d(self) -> int:
        return history_count(self.tau, self.k, self.stride)

    @property
    def layout(self) -> TargetLayout:
        return TargetLayout(self.m, self.k, tuple(self.detectors))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelHyperparameters":
        data = dict(data)
        for key in ("dilated_channels", "dilations", "detectors"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


class FmuadModel:
    """The three detectors behind one forecast of the concatenated target."""

    def __init__(
        self,
        hp: ModelHyperparameters,
        seed: int = 0,
        stats: Optional[NormalizationStats] = None,
    ) -> None:
        self.hp = hp
        self.seed = seed
        self.stats = stats
        rng = np.random.default_rng(seed)
        self.detectors = {}
        if "correlation" in hp.detectors:
            self.detectors["correlation"] = CorrelationDetector(hp.m, hp.hidden_ch, hp.lstm_kernel, rng)
        if "temporal" in hp.detectors:
            self.detectors["temporal"] = TemporalDetector(hp.m, hp.k, hp.hidden_ch, hp.lstm_kernel, rng)
        if "spatial" in hp.detectors:
            self.detectors["spatial"] = SpatialDetector(
                hp.m, hp.tau - hp.k, hp.k, hp.dilated_channels, hp.dilations, rng
            )

    @property
    def layout(self) -> TargetLayout:
        return self.hp.layout

    def parameters(self) -> Dict[str, Tensor]:
        params = {}
        for detector in self.detectors.values():
            params.update(detector.params)
        return params

    def load_parameters(self, params: Mapping[str, Tensor]) -> None:
        current = self.parameters()
        missing = sorted(set(current) - set(params))
        extra = sorted(set(params) - set(current))
        if missing or extra:
            raise ContractViolation(f"parameter names differ: missing={missing}, unexpected={extra}")
        expected, given = named_shapes(current), named_shapes(params)
        for name in sorted(given):
            if given[name] != expected[name]:
                raise ContractViolation(f"parameter {name} has shape {given[name]}, expected {expected[name]}")
        for detector in self.detectors.values():
            detector.params = {name: params[name].detach() for name in detector.params}

    def target(self, view: WindowView) -> np.ndarray:
        return build_target(view.target, self.hp.detectors)

    def _history_matrices(self, view: WindowView, transform, kind: str, cache: Optional[CacheManager]):
        windows = slice_windows(view.instance, self.hp.k, self.hp.stride)[:-1]
        if cache is None:
            return [transform(w) for w in windows]
        d = len(windows)
        # window j (oldest first) ends (d - j) * s steps before t
        return [
            cache.get_or_compute((kind, view.t - (d - j) * self.hp.stride), lambda w=w: transform(w))
            for j, w in enumerate(windows)
        ]

    def forecast(
        self,
        view: WindowView,
        params: Optional[Mapping[str, Tensor]] = None,
        cache: Optional[CacheManager] = None,
    ) -> Tensor:
        """Predicted target for the window, blocks in layout order."""
        if view.instance.shape != (self.hp.m, self.hp.tau):
            raise ContractViolation(
                f"input instance {list(view.instance.shape)} expected {[self.hp.m, self.hp.tau]}"
            )
        params = params if params is not None else self.parameters()
        blocks = []
        if "correlation" in self.detectors:
            sigs = self._history_matrices(view, signature_matrix, "signature", cache)
            blocks.append(self.detectors["correlation"].forecast_signature(sigs, params))
        if "temporal" in self.detectors:
            spectra = self._history_matrices(view, frequency_matrix, "frequency", cache)
            blocks.append(self.detectors["temporal"].forecast_from_spectra(spectra, params))
        if "spatial" in self.detectors:
            blocks.append(self.detectors["spatial"].forecast_window(view.history, params))
        return blocks[0] if len(blocks) == 1 else concat(blocks, axis=1)

    def predict(self, view: WindowView, cache: Optional[CacheManager] = None) -> np.ndarray:
        return self.forecast(view, cache=cache).numpy()


def named_shapes(params: Mapping[str, Tensor]) -> Dict[str, Sequence[int]]:
    return {name: list(t.shape) for name, t in params.items()}
