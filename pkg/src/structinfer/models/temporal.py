"""Per-frame sequence models: one memory cell per concept layer.

Each step projects the frame, runs the chosen message-passing pass
(dense for ``bilstm``, masked/signed for ``silstm``, none for the
``lstm`` baseline), advances a per-layer LSTM on the raw frame feature,
and combines activation and hidden state elementwise into the frame's
scores. The unroll is strictly left-to-right; there is no lookahead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import Tensor, matvec, mul, sigmoid, tanh
from ..errors import ContractError
from ..graph import LabelGraph
from .params import ParamStore, uniform_init
from .static import Injection, init_static_params, static_forward

TEMPORAL_VARIANTS = ("lstm", "bilstm", "silstm")
_GATES = ("i", "f", "o", "c")


@dataclass
class SequenceState:
    """Per-layer memory (c) and hidden (h) vectors at one time index."""

    c: list[Tensor]
    h: list[Tensor]
    t: int = 0


def init_temporal_params(
    variant: str, graph: LabelGraph, feature_dim: int, rng: np.random.Generator
) -> ParamStore:
    """Parameters for a temporal variant; the hidden size of layer l's
    cell equals the layer size, forced by the elementwise combination."""
    if variant not in TEMPORAL_VARIANTS:
        raise ContractError(f"unknown temporal variant '{variant}'")
    if variant == "lstm":
        store = ParamStore()
    else:
        inner = "binn" if variant == "bilstm" else "sinn"
        store = init_static_params(inner, graph, feature_dim, rng)
    for l, n in enumerate(graph.sizes):
        for gate in _GATES:
            store.add(f"lstm.Wx{gate}.{l}", uniform_init(rng, (n, feature_dim), feature_dim))
            store.add(f"lstm.Wh{gate}.{l}", uniform_init(rng, (n, n), n))
            store.add(f"lstm.b{gate}.{l}", np.zeros(n))
    for l, n in enumerate(graph.sizes):
        if variant != "lstm":
            store.add(f"out.Ma.{l}", np.ones(n))
        store.add(f"out.Mh.{l}", np.ones(n))
        store.add(f"out.b.{l}", np.zeros(n))
    return store


def initial_state(graph: LabelGraph, batch_shape: tuple[int, ...]) -> SequenceState:
    """All-zero c_0 and h_0, the conventional start."""
    zeros = [Tensor(np.zeros(batch_shape + (n,))) for n in graph.sizes]
    return SequenceState(c=list(zeros), h=[Tensor(z.value.copy()) for z in zeros], t=0)


def lstm_cell(
    tensors: dict[str, Tensor], layer: int, x_t: Tensor, h_prev: Tensor, c_prev: Tensor
) -> tuple[Tensor, Tensor]:
    """One gated memory update; `*` is pointwise.

    i, f, o = sigmoid(gates), g = tanh(candidate),
    c_t = f * c_{t-1} + i * g, h_t = o * tanh(c_t).
    """
    def gate(name: str) -> Tensor:
        return (
            matvec(tensors[f"lstm.Wx{name}.{layer}"], x_t)
            + matvec(tensors[f"lstm.Wh{name}.{layer}"], h_prev)
            + tensors[f"lstm.b{name}.{layer}"]
        )

    i = sigmoid(gate("i"))
    f = sigmoid(gate("f"))
    o = sigmoid(gate("o"))
    g = tanh(gate("c"))
    c_t = mul(f, c_prev) + mul(i, g)
    h_t = mul(o, tanh(c_t))
    return c_t, h_t


def temporal_step(
    variant: str,
    tensors: dict[str, Tensor],
    graph: LabelGraph,
    x_t,
    state: SequenceState,
    injection: Injection | None = None,
) -> tuple[list[Tensor], SequenceState]:
    """Advance one frame: returns per-layer pre-sigmoid score logits
    (sigmoid of which is the frame's confidence vector) and the new state."""
    if variant not in TEMPORAL_VARIANTS:
        raise ContractError(f"unknown temporal variant '{variant}'")
    x_t = x_t if isinstance(x_t, Tensor) else Tensor(x_t)

    acts = None
    if variant != "lstm":
        inner = "binn" if variant == "bilstm" else "sinn"
        acts = static_forward(inner, tensors, graph, x_t, injection=injection)

    new_c: list[Tensor] = []
    new_h: list[Tensor] = []
    logits: list[Tensor] = []
    for l in range(graph.num_layers):
        c_t, h_t = lstm_cell(tensors, l, x_t, state.h[l], state.c[l])
        new_c.append(c_t)
        new_h.append(h_t)
        z = mul(tensors[f"out.Mh.{l}"], h_t) + tensors[f"out.b.{l}"]
        if acts is not None:
            z = mul(tensors[f"out.Ma.{l}"], acts.a[l]) + z
        logits.append(z)
    return logits, SequenceState(c=new_c, h=new_h, t=state.t + 1)


def run_sequence(
    variant: str,
    tensors: dict[str, Tensor],
    graph: LabelGraph,
    frames,
    injection: Injection | None = None,
) -> list[list[Tensor]]:
    """Unroll a whole sequence; frames is (T, D) or batched (B, T, D).

    Returns one per-layer logit list per frame, length == frame count.
    The state is threaded left to right, so the outputs for a prefix
    equal the outputs of running the prefix alone.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        per_t = [frames[t] for t in range(frames.shape[0])]
        batch_shape: tuple[int, ...] = ()
    elif frames.ndim == 3:
        per_t = [frames[:, t, :] for t in range(frames.shape[1])]
        batch_shape = (frames.shape[0],)
    else:
        raise ContractError(f"frames must be (T, D) or (B, T, D), got {frames.shape}")
    if not per_t:
        raise ContractError("cannot run an empty sequence")

    state = initial_state(graph, batch_shape)
    outputs: list[list[Tensor]] = []
    for x_t in per_t:
        logits, state = temporal_step(variant, tensors, graph, x_t, state, injection=injection)
        outputs.append(logits)
    return outputs


def predict_sequence(
    variant: str,
    params: ParamStore,
    graph: LabelGraph,
    frames,
    injection: Injection | None = None,
) -> list[np.ndarray]:
    """Per-layer score arrays of shape (T, n_l) (or (B, T, n_l)) for one
    untaped unroll."""
    from ..engine import sigmoid_values

    outputs = run_sequence(variant, params.tensors(), graph, frames, injection=injection)
    per_layer = []
    for l in range(graph.num_layers):
        stacked = np.stack([frame[l].value for frame in outputs], axis=-2)
        per_layer.append(sigmoid_values(stacked))
    if injection is not None:
        scores = per_layer[injection.layer]
        vals = np.asarray(injection.values, dtype=np.float64)
        obs = np.asarray(injection.observed, dtype=bool)
        if vals.ndim == 2:  # per-sample observations gain a time axis
            vals = vals[:, None, :]
        if obs.ndim == 2:
            obs = obs[:, None, :]
        vals = np.broadcast_to(sigmoid_values(vals), scores.shape)
        obs = np.broadcast_to(obs, scores.shape)
        scores[obs] = vals[obs]
    return per_layer
