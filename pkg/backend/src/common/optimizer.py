from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from config.config import get_parameter
from src.common.autodiff import Tensor
from src.common.exceptions import ContractViolation


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_opt: float = 1e-8
    step_count: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_config(cls, learning_rate: float) -> "OptimizerState":
        return cls(
            learning_rate=learning_rate,
            beta1=float(get_parameter("optimizer.beta1")),
            beta2=float(get_parameter("optimizer.beta2")),
            epsilon_opt=float(get_parameter("optimizer.epsilon")),
        )


def optimizer_step(
    params: Dict[str, Tensor], grads: Dict[str, Tensor], state: OptimizerState
) -> Tuple[Dict[str, Tensor], OptimizerState]:
    """One bias-corrected adaptive-moment update. Returns fresh parameter tensors."""
    missing = [name for name in params if name not in grads]
    if missing:
        raise ContractViolation(f"optimizer_step: no gradient for {missing}")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t

    updated = {}
    for name, p in params.items():
        g = grads[name].data
        if g.shape != p.shape:
            raise ContractViolation(
                f"optimizer_step: gradient of {name} has shape {list(g.shape)}, expected {list(p.shape)}"
            )
        if name not in state.first_moment:
            state.first_moment[name] = np.zeros_like(p.data)
            state.second_moment[name] = np.zeros_like(p.data)

        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)

        m_hat = m / bc1
        v_hat = v / bc2
        updated[name] = Tensor._wrap(
            p.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon_opt)
        )
    return updated, state
