"""Reverse-mode differentiation over dense float64 arrays.

Values live in `Tensor` objects wrapping numpy arrays. Operations executed
while any operand is attached to a `Tape` are recorded on it in creation
order, which is automatically a topological order. `backward` replays the
tape once in reverse, accumulating gradients into `Tensor.grad`; tensors
that do not feed the loss simply keep a zero (None) gradient.

Vector operations accept either a single vector (1-D) or a batch of
vectors stacked row-wise (2-D, one row per sample), so a whole mini-batch
runs through one tape node.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ContractError, GradientError, ShapeError, ValidationError

__all__ = [
    "Tape",
    "Tensor",
    "add",
    "backward",
    "bce_with_logits",
    "grad_check",
    "matvec",
    "mul",
    "neg",
    "relu",
    "sigmoid",
    "sigmoid_values",
    "sub",
    "tanh",
]


class Tape:
    """Ordered record of operations for one reverse pass.

    Nodes are appended in the order their outputs are created, so every
    node's inputs precede it. A tape is single-writer: one forward pass
    owns it. Independent tapes can run concurrently.
    """

    def __init__(self):
        self._nodes: list[tuple[Tensor, Callable[[], None]]] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def _record(self, out: "Tensor", backward_fn: Callable[[], None]) -> None:
        self._nodes.append((out, backward_fn))


class Tensor:
    """A float64 array plus its accumulated gradient.

    Attaching a tape to a leaf (e.g. a parameter) makes every downstream
    operation recordable; constants are created without a tape and never
    receive gradients.
    """

    __slots__ = ("value", "grad", "tape")

    def __init__(self, value, tape: Tape | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.tape = tape

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, taped={self.tape is not None})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _join_tape(*inputs: Tensor) -> Tape | None:
    for t in inputs:
        if t.tape is not None:
            return t.tape
    return None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.tape is None:
        return
    g = _unbroadcast(g, t.value.shape)
    if t.grad is None:
        t.grad = np.zeros_like(t.value)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape of the operand it belongs to."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def matvec(m, v) -> Tensor:
    """Matrix-vector product m @ v; a 2-D right operand is a batch of rows.

    For m of shape (n, k): a (k,) vector maps to (n,), a (B, k) batch maps
    to (B, n) (each row multiplied by m^T).
    """
    m, v = as_tensor(m), as_tensor(v)
    if m.value.ndim != 2:
        raise ShapeError(f"matvec: left operand must be a matrix, got shape {m.value.shape}")
    if v.value.ndim == 1:
        if m.value.shape[1] != v.value.shape[0]:
            raise ShapeError(
                f"matvec: matrix {m.value.shape} incompatible with vector ({v.value.shape[0]},)"
            )
        out = Tensor(m.value @ v.value, _join_tape(m, v))
        if out.tape is not None:
            def backward_fn():
                g = out.grad
                _accumulate(m, np.outer(g, v.value))
                _accumulate(v, m.value.T @ g)
            out.tape._record(out, backward_fn)
        return out
    if v.value.ndim == 2:
        if m.value.shape[1] != v.value.shape[1]:
            raise ShapeError(
                f"matvec: matrix {m.value.shape} incompatible with batch {v.value.shape}"
            )
        out = Tensor(v.value @ m.value.T, _join_tape(m, v))
        if out.tape is not None:
            def backward_fn():
                g = out.grad
                _accumulate(m, g.T @ v.value)
                _accumulate(v, g @ m.value)
            out.tape._record(out, backward_fn)
        return out
    raise ShapeError(f"matvec: right operand must be 1-D or 2-D, got shape {v.value.shape}")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value + b.value, _join_tape(a, b))
    if out.tape is not None:
        def backward_fn():
            _accumulate(a, out.grad)
            _accumulate(b, out.grad)
        out.tape._record(out, backward_fn)
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value - b.value, _join_tape(a, b))
    if out.tape is not None:
        def backward_fn():
            _accumulate(a, out.grad)
            _accumulate(b, -out.grad)
        out.tape._record(out, backward_fn)
    return out


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.value, a.tape)
    if out.tape is not None:
        def backward_fn():
            _accumulate(a, -out.grad)
        out.tape._record(out, backward_fn)
    return out


def mul(a, b) -> Tensor:
    """Element-wise product with numpy broadcasting (used for the
    per-label aggregation scalers)."""
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value * b.value, _join_tape(a, b))
    if out.tape is not None:
        def backward_fn():
            _accumulate(a, out.grad * b.value)
            _accumulate(b, out.grad * a.value)
        out.tape._record(out, backward_fn)
    return out


def sigmoid_values(z: np.ndarray) -> np.ndarray:
    """Numerically stable element-wise logistic function on raw arrays."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = sigmoid_values(a.value)
    out = Tensor(s, a.tape)
    if out.tape is not None:
        def backward_fn():
            _accumulate(a, out.grad * s * (1.0 - s))
        out.tape._record(out, backward_fn)
    return out


def relu(a) -> Tensor:
    """max(0, z) element-wise; subgradient at 0 taken as 0."""
    a = as_tensor(a)
    out = Tensor(np.maximum(a.value, 0.0), a.tape)
    if out.tape is not None:
        def backward_fn():
            _accumulate(a, out.grad * (a.value > 0.0))
        out.tape._record(out, backward_fn)
    return out


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.value)
    out = Tensor(t, a.tape)
    if out.tape is not None:
        def backward_fn():
            _accumulate(a, out.grad * (1.0 - t * t))
        out.tape._record(out, backward_fn)
    return out


def bce_with_logits(logits, targets) -> Tensor:
    """Summed binary cross-entropy of sigmoid(logits) against 0/1 targets.

    Computed as max(a, 0) - a*t + log(1 + exp(-|a|)), which is exact and
    does not overflow for large |a|; the naive sigmoid-then-log form is
    deliberately not used. Returns the raw sum over every element (batch,
    layer entries), not a mean.
    """
    logits = as_tensor(logits)
    t = targets.value if isinstance(targets, Tensor) else np.asarray(targets, dtype=np.float64)
    if t.shape != logits.value.shape:
        raise ShapeError(
            f"bce_with_logits: targets {t.shape} do not match logits {logits.value.shape}"
        )
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValidationError("bce_with_logits: targets must be binary (0/1)")
    a = logits.value
    value = np.sum(np.maximum(a, 0.0) - a * t + np.log1p(np.exp(-np.abs(a))))
    out = Tensor(value, logits.tape)
    if out.tape is not None:
        def backward_fn():
            _accumulate(logits, out.grad * (sigmoid_values(a) - t))
        out.tape._record(out, backward_fn)
    return out


def backward(tape: Tape, loss: Tensor) -> None:
    """Run the reverse pass, filling `grad` on every tensor feeding `loss`.

    The loss must be a scalar recorded on `tape`. Each recorded node is
    visited exactly once, in reverse creation order.
    """
    if loss.value.ndim != 0:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.value.shape}")
    if loss.tape is not tape:
        raise ContractError("backward: loss was not recorded on this tape")
    loss.grad = np.ones_like(loss.value)
    for out, backward_fn in reversed(tape._nodes):
        if out.grad is not None:
            backward_fn()


def grad_check(
    forward: Callable[[dict[str, Tensor]], Tensor],
    params: dict[str, np.ndarray],
    h: float = 1e-5,
) -> dict[str, float]:
    """Compare reverse-mode gradients with central finite differences.

    `forward` maps named parameter tensors to a scalar loss and must be
    deterministic and smooth at the evaluation point (keep pre-activations
    away from ReLU kinks). Returns the max relative error per parameter
    block, |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
    """
    tape = Tape()
    tensors = {name: Tensor(v, tape=tape) for name, v in params.items()}
    loss = forward(tensors)
    backward(tape, loss)

    work = {name: np.array(v, dtype=np.float64) for name, v in params.items()}

    def evaluate() -> float:
        consts = {name: Tensor(v) for name, v in work.items()}
        return float(forward(consts).value)

    report: dict[str, float] = {}
    for name, tensor in tensors.items():
        g_ad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.value)
        if not np.all(np.isfinite(g_ad)):
            raise GradientError(f"non-finite reverse-mode gradient in block '{name}'")
        arr = work[name]
        g_fd = np.zeros_like(arr)
        flat = arr.reshape(-1)
        fd_flat = g_fd.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            f_plus = evaluate()
            flat[i] = saved - h
            f_minus = evaluate()
            flat[i] = saved
            fd_flat[i] = (f_plus - f_minus) / (2.0 * h)
        denom = np.maximum(np.maximum(np.abs(g_ad), np.abs(g_fd)), 1e-8)
        rel = np.abs(g_ad - g_fd) / denom
        report[name] = float(rel.max()) if rel.size else 0.0
    return report
