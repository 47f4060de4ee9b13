"""Windowing of a series and the correlation (TF1) / spectral (TF2) transforms."""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.common.exceptions import ContractViolation, require

ZERO_NORM = 1e-12

BLOCK_ORDER = ("correlation", "temporal", "spatial")


@dataclass(frozen=True)
class SeriesMatrix:
    values: np.ndarray  # m x T
    feature_names: Optional[List[str]] = None

    def __post_init__(self):
        require(self.values.ndim == 2 and self.values.shape[0] >= 1, "series must be a non-empty m x T matrix")
        if self.feature_names is not None:
            require(
                len(self.feature_names) == self.values.shape[0],
                f"{len(self.feature_names)} feature names for {self.values.shape[0]} features",
            )

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WindowView:
    t: int
    target: np.ndarray  # m x k, W_t
    history: np.ndarray  # m x (tau - k), W_t^h
    instance: np.ndarray  # m x tau, I_t


def window_view(series: np.ndarray, t: int, tau: int, k: int) -> WindowView:
    """Input instance ending at (and including) time index ``t``."""
    require(0 < k < tau, f"need 0 < k < tau, got k={k}, tau={tau}")
    require(tau <= t + 1 <= series.shape[1], f"window ending at {t} needs {tau} steps of a {series.shape[1]}-step series")
    instance = series[:, t + 1 - tau : t + 1]
    return WindowView(t=t, target=instance[:, tau - k :], history=instance[:, : tau - k], instance=instance)


def history_count(tau: int, k: int, s: int) -> int:
    return (tau - k) // s


def slice_windows(instance: np.ndarray, k: int, s: int) -> List[np.ndarray]:
    """Split an instance into d = floor((tau-k)/s) history windows plus the target.

    Windows end s, 2s, ..., ds steps before the end of the instance and are
    returned oldest first; the final element is the target window.
    """
    tau = instance.shape[1]
    if k > tau:
        raise ContractViolation(f"window length k={k} exceeds instance span tau={tau}")
    require(k >= 1 and s >= 1, f"need k >= 1 and s >= 1, got k={k}, s={s}")
    d = history_count(tau, k, s)
    windows = [instance[:, tau - j * s - k : tau - j * s] for j in range(d, 0, -1)]
    windows.append(instance[:, tau - k :])
    return windows


def signature_matrix(w: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of the rows of an m x k window."""
    w = np.asarray(w, dtype=np.float64)
    norms = np.linalg.norm(w, axis=1)
    live = norms >= ZERO_NORM
    unit = np.zeros_like(w)
    unit[live] = w[live] / norms[live, None]
    s = np.clip(unit @ unit.T, -1.0, 1.0)
    s = 0.5 * (s + s.T)
    np.fill_diagonal(s, 1.0)
    return s


def frequency_matrix(w: np.ndarray) -> np.ndarray:
    """Magnitudes |xi_j|, j = 1..k/2, of the 1/k-normalised DFT of each row."""
    w = np.asarray(w, dtype=np.float64)
    k = w.shape[1]
    if k % 2:
        raise ContractViolation(f"frequency matrix needs an even window length, got k={k}")
    spectrum = np.fft.fft(w, axis=1) / k
    return np.abs(spectrum[:, 1 : k // 2 + 1])


@dataclass(frozen=True)
class TargetLayout:
    """Column layout of a forecast target for the enabled detectors."""

    m: int
    k: int
    detectors: Sequence[str] = BLOCK_ORDER

    def width(self, detector: str) -> int:
        return {"correlation": self.m, "temporal": self.k // 2, "spatial": self.k}[detector]

    @property
    def enabled(self) -> List[str]:
        return [d for d in BLOCK_ORDER if d in self.detectors]

    @property
    def n(self) -> int:
        return sum(self.width(d) for d in self.enabled)

    def columns(self, detector: str) -> slice:
        start = 0
        for d in self.enabled:
            if d == detector:
                return slice(start, start + self.width(d))
            start += self.width(d)
        raise ContractViolation(f"detector '{detector}' is not part of this layout")


def build_target(w: np.ndarray, detectors: Sequence[str] = BLOCK_ORDER) -> np.ndarray:
    """Y_t = [S_t | F_t | W_t], restricted to the enabled detectors' blocks."""
    w = np.asarray(w, dtype=np.float64)
    blocks = []
    if "correlation" in detectors:
        blocks.append(signature_matrix(w))
    if "temporal" in detectors:
        blocks.append(frequency_matrix(w))
    if "spatial" in detectors:
        blocks.append(w)
    require(len(blocks) > 0, "at least one detector block is required")
    return np.hstack(blocks)
