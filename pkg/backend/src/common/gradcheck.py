from typing import Callable, Dict

import numpy as np

from src.common.autodiff import Tape, Tensor, backward


def numerical_gradient(
    fn: Callable[[Dict[str, Tensor]], Tensor],
    params: Dict[str, Tensor],
    name: str,
    h: float = 1e-5,
) -> np.ndarray:
    base = params[name].data
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus = base.copy()
        minus = base.copy()
        plus[idx] += h
        minus[idx] -= h
        f_plus = fn({**params, name: Tensor(plus)}).item()
        f_minus = fn({**params, name: Tensor(minus)}).item()
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def analytic_gradients(
    fn: Callable[[Dict[str, Tensor]], Tensor], params: Dict[str, Tensor]
) -> Dict[str, np.ndarray]:
    with Tape() as tape:
        tracked = tape.watch_all(params)
        loss = fn(tracked)
    backward(loss, tape)
    return {name: tape.gradient(t).data for name, t in tracked.items()}


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def gradient_check(
    fn: Callable[[Dict[str, Tensor]], Tensor],
    params: Dict[str, Tensor],
    h: float = 1e-5,
) -> Dict[str, float]:
    """Worst relative error per parameter between tape and central differences."""
    analytic = analytic_gradients(fn, params)
    return {
        name: relative_error(analytic[name], numerical_gradient(fn, params, name, h))
        for name in params
    }
