"""Single-vector forward models over the concept layers.

Three variants share one parameter naming scheme:

* ``logistic`` — independent per-layer readout, y = sigmoid(W x + b).
* ``binn`` — dense top-down + bottom-up message passing across layers,
  combined per label with elementwise scalers.
* ``sinn`` — the same two passes with every cross-label matrix split into
  a positive and a negative part, masked by the relation graph and passed
  through ReLU so each signed path can only push its own way.

All entry points accept a single feature vector (D,) or a batch (B, D).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import engine
from ..engine import Tensor, matvec, mul, relu, sigmoid_values
from ..errors import ContractError, ShapeError
from ..graph import NEG, POS, LabelGraph
from .params import ParamStore, uniform_init

STATIC_VARIANTS = ("logistic", "binn", "sinn")


@dataclass
class Injection:
    """Observed-layer values to splice into a forward pass.

    `values` holds activation-space numbers for the observed layer
    ((n,) or (B, n)); `observed` is a 0/1 mask of the same (or
    broadcastable) shape selecting which entries are actually observed.
    `at="input"` replaces the layer's projected input before message
    passing; `at="directional"` replaces the layer's directional
    activations instead.
    """

    layer: int
    values: np.ndarray
    observed: np.ndarray
    at: str = "input"


@dataclass
class ActivationSet:
    """Per-layer forward results as plain arrays: projected inputs,
    directional activations (None for the logistic variant), combined
    pre-sigmoid activations, and normalized scores y = sigmoid(a)."""

    x: list[np.ndarray]
    a_td: list[np.ndarray] | None
    a_bu: list[np.ndarray] | None
    a: list[np.ndarray]
    y: list[np.ndarray]


class TapedActivations:
    """Forward results still attached to the tape, for loss building."""

    def __init__(self, x, a_td, a_bu, a):
        self.x = x
        self.a_td = a_td
        self.a_bu = a_bu
        self.a = a

    def detach(self, injection: Injection | None = None) -> ActivationSet:
        """Copy out plain arrays; observed entries report their injected
        activation (and its sigmoid) rather than the propagated value."""
        a_vals = [t.value.copy() for t in self.a]
        if injection is not None:
            obs = injection.observed.astype(bool)
            vals = np.broadcast_to(injection.values, a_vals[injection.layer].shape)
            obs = np.broadcast_to(obs, a_vals[injection.layer].shape)
            a_vals[injection.layer][obs] = vals[obs]
        return ActivationSet(
            x=[t.value.copy() for t in self.x],
            a_td=None if self.a_td is None else [t.value.copy() for t in self.a_td],
            a_bu=None if self.a_bu is None else [t.value.copy() for t in self.a_bu],
            a=a_vals,
            y=[sigmoid_values(a) for a in a_vals],
        )


def init_static_params(
    variant: str, graph: LabelGraph, feature_dim: int, rng: np.random.Generator
) -> ParamStore:
    """Fresh parameters for one variant, shaped to the graph.

    Dense matrices draw zero-mean uniform entries scaled by 1/sqrt(fan-in);
    masked entries are forced to zero; aggregation scalers start at 1 and
    biases at 0 so both directional paths are live from the first step.
    """
    if variant not in STATIC_VARIANTS:
        raise ContractError(f"unknown static variant '{variant}'")
    sizes = graph.sizes
    m = graph.num_layers
    store = ParamStore()
    for l, n in enumerate(sizes):
        store.add(f"proj.W.{l}", uniform_init(rng, (n, feature_dim), feature_dim))
        store.add(f"proj.b.{l}", np.zeros(n))
    if variant == "logistic":
        return store

    def add_dir(prefix: str, order: range, v_from):
        for l in order:
            n = sizes[l]
            k = v_from(l)
            if k is not None:
                if variant == "binn":
                    store.add(f"{prefix}.V.{l}", uniform_init(rng, (n, sizes[k]), sizes[k]))
                else:
                    for sign, tag in ((POS, "Vp"), (NEG, "Vn")):
                        mask = graph.mask(k, l, sign)
                        store.add(
                            f"{prefix}.{tag}.{l}",
                            uniform_init(rng, (n, sizes[k]), sizes[k]),
                            mask=mask,
                        )
            if variant == "binn":
                store.add(f"{prefix}.H.{l}", uniform_init(rng, (n, n), n))
            else:
                for sign, tag in ((POS, "Hp"), (NEG, "Hn")):
                    mask = graph.mask(l, l, sign)
                    store.add(f"{prefix}.{tag}.{l}", uniform_init(rng, (n, n), n), mask=mask)
            store.add(f"{prefix}.b.{l}", np.zeros(n))

    add_dir("td", range(m), lambda l: l - 1 if l > 0 else None)
    add_dir("bu", range(m - 1, -1, -1), lambda l: l + 1 if l < m - 1 else None)
    for l, n in enumerate(sizes):
        store.add(f"agg.u_td.{l}", np.ones(n))
        store.add(f"agg.u_bu.{l}", np.ones(n))
        store.add(f"agg.b.{l}", np.zeros(n))
    return store


def check_sinn_masks(tensors: dict[str, Tensor], graph: LabelGraph) -> None:
    """Contract check: masked entries must be exactly zero."""
    m = graph.num_layers
    checks = []
    for l in range(m):
        for prefix, other in (("td", l - 1), ("bu", l + 1)):
            if 0 <= other < m:
                checks.append((f"{prefix}.Vp.{l}", graph.mask(other, l, POS)))
                checks.append((f"{prefix}.Vn.{l}", graph.mask(other, l, NEG)))
            checks.append((f"{prefix}.Hp.{l}", graph.mask(l, l, POS)))
            checks.append((f"{prefix}.Hn.{l}", graph.mask(l, l, NEG)))
    for name, mask in checks:
        block = tensors[name].value
        if np.any(block[mask == 0.0] != 0.0):
            raise ContractError(f"mask violation: '{name}' has nonzero masked entries")


def project_inputs(tensors: dict[str, Tensor], graph: LabelGraph, x) -> list[Tensor]:
    """Per-layer input projection x^l = W^l x + b^l."""
    x = engine.as_tensor(x)
    d = x.value.shape[-1]
    if tensors["proj.W.0"].value.shape[1] != d:
        raise ShapeError(
            f"feature dim {d} does not match projection "
            f"{tensors['proj.W.0'].value.shape}"
        )
    return [
        matvec(tensors[f"proj.W.{l}"], x) + tensors[f"proj.b.{l}"]
        for l in range(graph.num_layers)
    ]


def _inject(t: Tensor, injection: Injection) -> Tensor:
    keep = 1.0 - injection.observed
    forced = np.asarray(injection.values) * injection.observed
    return mul(t, keep) + Tensor(forced)


def static_forward(
    variant: str,
    tensors: dict[str, Tensor],
    graph: LabelGraph,
    x,
    injection: Injection | None = None,
) -> TapedActivations:
    """One forward pass; `x` is (D,) or a batch (B, D).

    With an injection, the observed layer's projected input (or its
    directional activations, per `injection.at`) is replaced by the given
    activation values before message passing, so observed information
    reaches the other layers through the same signed paths as ordinary
    evidence.
    """
    if variant not in STATIC_VARIANTS:
        raise ContractError(f"unknown static variant '{variant}'")
    m = graph.num_layers
    xs = project_inputs(tensors, graph, x)
    if injection is not None and injection.at == "input":
        xs[injection.layer] = _inject(xs[injection.layer], injection)

    if variant == "logistic":
        return TapedActivations(x=xs, a_td=None, a_bu=None, a=list(xs))

    if variant == "sinn":
        check_sinn_masks(tensors, graph)

    def masked(name: str, mask_from: int, mask_to: int, sign: str) -> Tensor:
        return mul(tensors[name], graph.mask(mask_from, mask_to, sign))

    def step(prefix: str, l: int, prev_layer: int | None, prev_a: Tensor | None) -> Tensor:
        if variant == "binn":
            z = matvec(tensors[f"{prefix}.H.{l}"], xs[l])
            if prev_a is not None:
                z = matvec(tensors[f"{prefix}.V.{l}"], prev_a) + z
        else:
            z = relu(matvec(masked(f"{prefix}.Hp.{l}", l, l, POS), xs[l])) - relu(
                matvec(masked(f"{prefix}.Hn.{l}", l, l, NEG), xs[l])
            )
            if prev_a is not None:
                z = (
                    relu(matvec(masked(f"{prefix}.Vp.{l}", prev_layer, l, POS), prev_a))
                    - relu(matvec(masked(f"{prefix}.Vn.{l}", prev_layer, l, NEG), prev_a))
                    + z
                )
        return z + tensors[f"{prefix}.b.{l}"]

    a_td: list[Tensor | None] = [None] * m
    for l in range(m):
        prev = a_td[l - 1] if l > 0 else None
        z = step("td", l, l - 1 if l > 0 else None, prev)
        if injection is not None and injection.at == "directional" and injection.layer == l:
            z = _inject(z, injection)
        a_td[l] = z

    a_bu: list[Tensor | None] = [None] * m
    for l in range(m - 1, -1, -1):
        prev = a_bu[l + 1] if l < m - 1 else None
        z = step("bu", l, l + 1 if l < m - 1 else None, prev)
        if injection is not None and injection.at == "directional" and injection.layer == l:
            z = _inject(z, injection)
        a_bu[l] = z

    a = [
        mul(tensors[f"agg.u_td.{l}"], a_td[l])
        + mul(tensors[f"agg.u_bu.{l}"], a_bu[l])
        + tensors[f"agg.b.{l}"]
        for l in range(m)
    ]
    return TapedActivations(x=xs, a_td=a_td, a_bu=a_bu, a=a)


def predict_static(
    variant: str,
    params: ParamStore,
    graph: LabelGraph,
    x,
    injection: Injection | None = None,
) -> ActivationSet:
    """Untaped forward pass returning plain arrays and scores."""
    acts = static_forward(variant, params.tensors(), graph, x, injection=injection)
    return acts.detach(injection)
