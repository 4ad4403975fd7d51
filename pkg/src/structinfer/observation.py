"""Turning known labels into activation-space evidence.

A partially observed layer's binary labels are mapped through the inverse
sigmoid (logit), nudged away from the asymptotes by a small epsilon, and
spliced into a forward pass so that the signed message-passing paths can
carry the observed information to the other layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import sigmoid_values
from .errors import ContractError, ValidationError
from .graph import LabelGraph
from .models.params import ParamStore
from .models.static import ActivationSet, Injection, predict_static

DEFAULT_EPSILON = 1e-3


@dataclass
class PartialObservation:
    """Observed 0/1 labels for one concept layer.

    `values` is (n,) or per-sample (B, n); `observed` marks which entries
    are actually known (defaults to all of them). Unobserved entries keep
    whatever the model computes.
    """

    layer: str
    values: np.ndarray
    observed: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.observed is None:
            self.observed = np.ones_like(self.values)
        else:
            self.observed = np.asarray(self.observed, dtype=np.float64)
            if self.observed.shape != self.values.shape:
                raise ValidationError(
                    f"observed mask shape {self.observed.shape} != values {self.values.shape}"
                )
        mask = self.observed.astype(bool)
        if not mask.any():
            raise ValidationError("a partial observation must observe at least one entry")
        vals = self.values[mask]
        if not np.all((vals == 0.0) | (vals == 1.0)):
            raise ValidationError("observed label values must be binary (0/1)")


def labels_to_activations(obs: PartialObservation, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Map observed binary labels to activations via the inverse sigmoid.

    An observed 1 becomes log((1-eps)/eps) and an observed 0 becomes
    log(eps/(1-eps)); the two cases are negatives of each other and
    sigmoid of the result lands exactly on 1-eps and eps.
    """
    if not (0.0 < epsilon < 0.5):
        raise ContractError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    hi = np.log((1.0 - epsilon) / epsilon)
    return np.where(obs.values == 1.0, hi, -hi)


def build_injection(
    obs: PartialObservation,
    graph: LabelGraph,
    epsilon: float = DEFAULT_EPSILON,
    at: str = "input",
) -> Injection:
    """Resolve the observed layer against the graph and produce the
    activation-space values a forward pass can splice in."""
    layer_idx = graph.layer_index(obs.layer)
    n = graph.layers[layer_idx].size
    if obs.values.shape[-1] != n:
        raise ContractError(
            f"observation for layer '{obs.layer}' has {obs.values.shape[-1]} entries, "
            f"layer holds {n} labels"
        )
    if at not in ("input", "directional"):
        raise ContractError(f"injection point must be 'input' or 'directional', got {at!r}")
    return Injection(
        layer=layer_idx,
        values=labels_to_activations(obs, epsilon),
        observed=obs.observed,
        at=at,
    )


def infer_with_observation(
    x,
    obs: PartialObservation,
    params: ParamStore,
    graph: LabelGraph,
    variant: str,
    epsilon: float = DEFAULT_EPSILON,
    inject_at: str = "input",
) -> ActivationSet:
    """Forward pass with the observed layer's inputs replaced by converted
    label activations; the observed layer's own outputs report the
    observed values."""
    injection = build_injection(obs, graph, epsilon, at=inject_at)
    return predict_static(variant, params, graph, x, injection=injection)


def observation_scores(obs: PartialObservation, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """The probabilities the observed activations decode back to."""
    return sigmoid_values(labels_to_activations(obs, epsilon))
