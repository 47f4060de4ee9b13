"""Dense float64 tensors with a dynamic reverse-mode differentiation tape.

Tensors are immutable. An operation is recorded on the active ``Tape`` only
when at least one of its inputs is tracked by that tape, so the same model
code runs untaped (inference) or taped (training, gradient checks).
"""

import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.common.exceptions import ContractViolation, require

_ids = itertools.count(1)
_local = threading.local()

Scalar = Union[int, float]


class Tensor:
    __slots__ = ("data", "tape_id")

    def __init__(self, data, tape_id: Optional[int] = None) -> None:
        arr = np.array(data, dtype=np.float64)
        arr.flags.writeable = False
        self.data = arr
        self.tape_id = tape_id

    @classmethod
    def _wrap(cls, arr: np.ndarray, tape_id: Optional[int] = None) -> "Tensor":
        out = cls.__new__(cls)
        # 0-d op results arrive as numpy scalars, which carry no writeable flag
        arr = np.asarray(arr, dtype=np.float64)
        arr.flags.writeable = False
        out.data = arr
        out.tape_id = tape_id
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        require(self.size == 1, f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data)

    def __repr__(self) -> str:
        tracked = f", tape_id={self.tape_id}" if self.tape_id is not None else ""
        return f"Tensor(shape={list(self.shape)}{tracked})"

    def __add__(self, other):
        return add(self, _as_tensor(other, self.shape))

    def __radd__(self, other):
        return add(_as_tensor(other, self.shape), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.shape))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return hadamard(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def zeros(shape: Sequence[int]) -> Tensor:
    return Tensor._wrap(np.zeros(tuple(shape)))


def zeros_like(x: Tensor) -> Tensor:
    return zeros(x.shape)


def _as_tensor(value, shape) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor._wrap(np.full(shape, float(value)))


@dataclass
class TapeNode:
    output_id: int
    input_ids: Tuple[Optional[int], ...]
    backward: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]
    op: str


@dataclass
class Tape:
    """Ordered record of operations; gradients are filled in by ``backward``."""

    nodes: List[TapeNode] = field(default_factory=list)
    gradients: Dict[int, Tensor] = field(default_factory=dict)
    _tracked: set = field(default_factory=set, repr=False)
    _leaves: Dict[int, Tuple[int, ...]] = field(default_factory=dict, repr=False)

    def __enter__(self) -> "Tape":
        stack = _tape_stack()
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def watch(self, tensor: Tensor) -> Tensor:
        tape_id = next(_ids)
        self._tracked.add(tape_id)
        self._leaves[tape_id] = tensor.shape
        return Tensor._wrap(tensor.data, tape_id)

    def watch_all(self, params: Dict[str, Tensor]) -> Dict[str, Tensor]:
        return {name: self.watch(p) for name, p in params.items()}

    def tracks(self, tensor: Tensor) -> bool:
        return tensor.tape_id is not None and tensor.tape_id in self._tracked

    def gradient(self, tensor: Tensor) -> Tensor:
        require(self.tracks(tensor), "tensor is not tracked by this tape")
        if tensor.tape_id not in self.gradients:
            raise ContractViolation("no gradient recorded; call backward first")
        return self.gradients[tensor.tape_id]

    def record(self, out: np.ndarray, inputs: Sequence[Tensor], backward, op: str) -> Tensor:
        tape_id = next(_ids)
        self._tracked.add(tape_id)
        input_ids = tuple(t.tape_id if self.tracks(t) else None for t in inputs)
        self.nodes.append(TapeNode(tape_id, input_ids, backward, op))
        return Tensor._wrap(out, tape_id)


def _tape_stack() -> List[Tape]:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def current_tape() -> Optional[Tape]:
    stack = _tape_stack()
    return stack[-1] if stack else None


def _emit(out: np.ndarray, inputs: Sequence[Tensor], backward, op: str) -> Tensor:
    tape = current_tape()
    if tape is None or not any(tape.tracks(t) for t in inputs):
        return Tensor._wrap(out)
    return tape.record(out, inputs, backward, op)


def backward(loss: Tensor, tape: Tape) -> Dict[int, Tensor]:
    require(loss.size == 1, f"backward needs a scalar loss, got shape {loss.shape}")
    require(tape.tracks(loss), "loss was not produced on this tape")

    grads: Dict[int, np.ndarray] = {loss.tape_id: np.ones(loss.shape)}
    for node in reversed(tape.nodes):
        g = grads.pop(node.output_id, None)
        if g is None:
            continue
        for input_id, ig in zip(node.input_ids, node.backward(g)):
            if input_id is None or ig is None:
                continue
            if input_id in grads:
                grads[input_id] = grads[input_id] + ig
            else:
                grads[input_id] = ig

    tape.gradients = {
        leaf: Tensor._wrap(grads.get(leaf, np.zeros(shape)))
        for leaf, shape in tape._leaves.items()
    }
    return tape.gradients


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ContractViolation(f"{op}: shape mismatch {list(a.shape)} vs {list(b.shape)}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return _emit(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return _emit(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "hadamard")
    ad, bd = a.data, b.data
    return _emit(ad * bd, (a, b), lambda g: (g * bd, g * ad), "hadamard")


def scale(a: Tensor, c: Scalar) -> Tensor:
    c = float(c)
    return _emit(a.data * c, (a,), lambda g: (g * c,), "scale")


def add_scalar(a: Tensor, c: Scalar) -> Tensor:
    return _emit(a.data + float(c), (a,), lambda g: (g,), "add_scalar")


def mul_scalar(a: Tensor, s: Tensor) -> Tensor:
    """Product of a tensor with a single-element tensor, differentiable in both."""
    require(s.size == 1, f"mul_scalar needs a single-element factor, got {list(s.shape)}")
    ad, sv = a.data, float(s.data.reshape(-1)[0])

    def _backward(g):
        return g * sv, np.full(s.shape, float(np.sum(g * ad)))

    return _emit(ad * sv, (a, s), _backward, "mul_scalar")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractViolation(
            f"matmul: cannot multiply {list(a.shape)} by {list(b.shape)}"
        )
    ad, bd = a.data, b.data
    return _emit(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    dilation: Tuple[int, int] = (1, 1),
    padding: Tuple[int, int] = (0, 0),
) -> Tensor:
    """Cross-channel 2-D cross-correlation of a C_in x H x W input (the kernel is not flipped).

    Output position p collects sum over taps t of F(p + dilation * t) * k(t)
    after zero padding; output extent is H + 2ph - (dh(kh-1)+1) + 1.
    """
    if x.data.ndim != 3 or kernel.data.ndim != 4:
        raise ContractViolation(
            f"conv2d: expected C x H x W input and 4-d kernel, got {list(x.shape)}, {list(kernel.shape)}"
        )
    c_out, c_in, kh, kw = kernel.shape
    if c_in != x.shape[0]:
        raise ContractViolation(f"conv2d: kernel expects {c_in} input channels, got {x.shape[0]}")
    dh, dw = dilation
    ph, pw = padding
    require(dh >= 1 and dw >= 1, f"conv2d: dilation must be >= 1, got {dilation}")
    require(ph >= 0 and pw >= 0, f"conv2d: padding must be >= 0, got {padding}")

    _, h, w = x.shape
    ext_h, ext_w = dh * (kh - 1) + 1, dw * (kw - 1) + 1
    if h + 2 * ph < ext_h or w + 2 * pw < ext_w:
        raise ContractViolation(
            f"conv2d: dilated kernel {ext_h}x{ext_w} larger than padded input {h + 2 * ph}x{w + 2 * pw}"
        )
    if bias is not None:
        require(bias.shape == (c_out,), f"conv2d: bias must have shape [{c_out}], got {list(bias.shape)}")

    xp = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw)))
    view = sliding_window_view(xp, (ext_h, ext_w), axis=(1, 2))[..., ::dh, ::dw]
    kd = kernel.data
    out = np.einsum("chwij,ocij->ohw", view, kd, optimize=True)
    if bias is not None:
        out = out + bias.data[:, None, None]
    h_out, w_out = out.shape[1], out.shape[2]

    def _backward(g):
        dk = np.einsum("chwij,ohw->ocij", view, g, optimize=True)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i * dh : i * dh + h_out, j * dw : j * dw + w_out] += np.einsum(
                    "oc,ohw->chw", kd[:, :, i, j], g
                )
        dx = dxp[:, ph : ph + h, pw : pw + w]
        db = g.sum(axis=(1, 2)) if bias is not None else None
        return dx, dk, db

    inputs = (x, kernel, bias) if bias is not None else (x, kernel)
    if bias is None:
        return _emit(out, inputs, lambda g: _backward(g)[:2], "conv2d")
    return _emit(out, inputs, _backward, "conv2d")


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    out = np.empty_like(xd)
    pos = xd >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _emit(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _emit(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    xd = x.data
    mask = np.where(xd > 0, 1.0, slope)
    return _emit(xd * mask, (x,), lambda g: (g * mask,), "leaky_relu")


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _emit(np.array(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape)) != x.size:
        raise ContractViolation(f"reshape: cannot view {list(x.shape)} as {list(shape)}")
    orig = x.shape
    return _emit(x.data.reshape(shape), (x,), lambda g: (g.reshape(orig),), "reshape")


def transpose(x: Tensor) -> Tensor:
    require(x.data.ndim == 2, f"transpose: expected a matrix, got {list(x.shape)}")
    return _emit(x.data.T.copy(), (x,), lambda g: (g.T,), "transpose")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    require(len(tensors) > 0, "concat: nothing to concatenate")
    sizes = [t.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    cuts = np.cumsum(sizes)[:-1]
    return _emit(out, tuple(tensors), lambda g: tuple(np.split(g, cuts, axis=axis)), "concat")


def stack(tensors: Sequence[Tensor]) -> Tensor:
    require(len(tensors) > 0, "stack: nothing to stack")
    for t in tensors:
        _same_shape(tensors[0], t, "stack")
    out = np.stack([t.data for t in tensors])
    return _emit(out, tuple(tensors), lambda g: tuple(g[i] for i in range(len(tensors))), "stack")


def softmax(x: Tensor) -> Tensor:
    """Softmax over every entry of ``x``; max-subtracted for overflow safety."""
    z = x.data - x.data.max()
    e = np.exp(z)
    s = e / e.sum()
    return _emit(s, (x,), lambda g: (s * (g - np.sum(g * s)),), "softmax")


def glorot_uniform(shape: Sequence[int], fan_in: int, fan_out: int, rng: np.random.Generator) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor._wrap(rng.uniform(-limit, limit, size=tuple(shape)))
