"""Layered label space with signed relation masks.

A graph document is JSON with an ordered `layers` list (coarsest first)
and an `edges` list of `{"from": "layer/label", "to": "layer/label",
"sign": "pos"|"neg"}` records. Edges are undirected semantic facts: one
inter-layer edge populates both the top-down and bottom-up mask of the
pair. Only adjacent-layer inter edges and within-layer intra edges are
representable; anything else is rejected at load time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, GraphValidationError

POS = "pos"
NEG = "neg"


@dataclass(frozen=True)
class ConceptLayer:
    """One stratum of the label space at a fixed granularity."""

    name: str
    labels: tuple[str, ...]
    single_label: bool = False

    @property
    def size(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Violation:
    location: str
    message: str

    def __str__(self):
        return f"{self.location}: {self.message}"


@dataclass
class LabelGraph:
    """Concept layers plus 0/1 masks for signed label relations.

    `inter_pos[i]` / `inter_neg[i]` hold the down-direction mask of shape
    (n_{i+1}, n_i) between layer i and layer i+1; the up direction is its
    transpose. `intra_pos[i]` / `intra_neg[i]` are (n_i, n_i). A position
    is never set in both the pos and the neg mask.
    """

    layers: tuple[ConceptLayer, ...]
    inter_pos: list[np.ndarray] = field(repr=False)
    inter_neg: list[np.ndarray] = field(repr=False)
    intra_pos: list[np.ndarray] = field(repr=False)
    intra_neg: list[np.ndarray] = field(repr=False)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(layer.size for layer in self.layers)

    def layer_index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise ContractError(f"unknown layer '{name}'")

    def mask(self, from_layer: int, to_layer: int, sign: str) -> np.ndarray:
        """The 0/1 mask of shape (n_to, n_from) for one signed direction.

        Used to zero parameter entries at construction and after every
        gradient step. Layers must be adjacent or equal.
        """
        if sign not in (POS, NEG):
            raise ContractError(f"sign must be '{POS}' or '{NEG}', got {sign!r}")
        m = self.num_layers
        if not (0 <= from_layer < m and 0 <= to_layer < m):
            raise ContractError(f"layer index out of range: {from_layer} -> {to_layer}")
        inter = self.inter_pos if sign == POS else self.inter_neg
        intra = self.intra_pos if sign == POS else self.intra_neg
        if to_layer == from_layer + 1:
            return inter[from_layer].copy()
        if to_layer == from_layer - 1:
            return inter[to_layer].T.copy()
        if to_layer == from_layer:
            return intra[from_layer].copy()
        raise ContractError(
            f"layers {from_layer} and {to_layer} are not adjacent; no mask exists"
        )

    def validate(self) -> list[Violation]:
        """Check every structural invariant; returns violations, raises nothing."""
        out: list[Violation] = []
        seen_names: set[str] = set()
        for i, layer in enumerate(self.layers):
            loc = f"layers[{i}] '{layer.name}'"
            if layer.name in seen_names:
                out.append(Violation(loc, "duplicate layer name"))
            seen_names.add(layer.name)
            if layer.size < 1:
                out.append(Violation(loc, "layer must contain at least one label"))
            if len(set(layer.labels)) != layer.size:
                dupes = sorted({x for x in layer.labels if layer.labels.count(x) > 1})
                out.append(Violation(loc, f"duplicate labels within layer: {dupes}"))
        for i in range(self.num_layers - 1):
            shape = (self.layers[i + 1].size, self.layers[i].size)
            for sign, masks in ((POS, self.inter_pos), (NEG, self.inter_neg)):
                if masks[i].shape != shape:
                    out.append(Violation(f"inter_{sign}[{i}]", f"expected shape {shape}"))
                elif not np.isin(masks[i], (0.0, 1.0)).all():
                    out.append(Violation(f"inter_{sign}[{i}]", "mask entries must be 0/1"))
            if (self.inter_pos[i] * self.inter_neg[i]).any():
                out.append(
                    Violation(f"inter[{i}]", "a pair is flagged both positive and negative")
                )
        for i, layer in enumerate(self.layers):
            shape = (layer.size, layer.size)
            for sign, masks in ((POS, self.intra_pos), (NEG, self.intra_neg)):
                if masks[i].shape != shape:
                    out.append(Violation(f"intra_{sign}[{i}]", f"expected shape {shape}"))
                elif not np.isin(masks[i], (0.0, 1.0)).all():
                    out.append(Violation(f"intra_{sign}[{i}]", "mask entries must be 0/1"))
            if (self.intra_pos[i] * self.intra_neg[i]).any():
                out.append(
                    Violation(f"intra[{i}]", "a pair is flagged both positive and negative")
                )
        return out

    def to_document(self) -> dict:
        """Serialize back to the interchange document structure."""
        layers = []
        for layer in self.layers:
            entry: dict = {"name": layer.name, "labels": list(layer.labels)}
            if layer.single_label:
                entry["single_label"] = True
            layers.append(entry)
        edges = []
        for i in range(self.num_layers - 1):
            lo, hi = self.layers[i], self.layers[i + 1]
            for sign, mask in ((POS, self.inter_pos[i]), (NEG, self.inter_neg[i])):
                for r, c in zip(*np.nonzero(mask)):
                    edges.append(
                        {
                            "from": f"{lo.name}/{lo.labels[c]}",
                            "to": f"{hi.name}/{hi.labels[r]}",
                            "sign": sign,
                        }
                    )
        for i, layer in enumerate(self.layers):
            for sign, mask in ((POS, self.intra_pos[i]), (NEG, self.intra_neg[i])):
                for r, c in zip(*np.nonzero(mask)):
                    if r > c:
                        continue  # undirected: emit each unordered pair once
                    edges.append(
                        {
                            "from": f"{layer.name}/{layer.labels[c]}",
                            "to": f"{layer.name}/{layer.labels[r]}",
                            "sign": sign,
                        }
                    )
        return {"layers": layers, "edges": edges}

    def fingerprint(self) -> str:
        """Stable content hash used to pair checkpoints with their graph."""
        doc = self.to_document()
        doc["edges"] = sorted(doc["edges"], key=lambda e: (e["from"], e["to"], e["sign"]))
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _parse_endpoint(ref, known: dict[str, tuple[int, dict[str, int]]], where: str):
    if not isinstance(ref, str) or ref.count("/") != 1:
        raise GraphValidationError(f"{where}: endpoint must be 'layer/label', got {ref!r}")
    layer_name, label = ref.split("/")
    if layer_name not in known:
        raise GraphValidationError(f"{where}: unknown layer '{layer_name}'")
    layer_idx, label_map = known[layer_name]
    if label not in label_map:
        raise GraphValidationError(f"{where}: unknown label '{label}' in layer '{layer_name}'")
    return layer_idx, label_map[label]


def load_graph_document(doc: dict) -> LabelGraph:
    """Build and validate a LabelGraph from a parsed graph document."""
    if not isinstance(doc, dict) or "layers" not in doc:
        raise GraphValidationError("graph document must be an object with a 'layers' list")
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise GraphValidationError("'layers' must be a non-empty list")

    layers: list[ConceptLayer] = []
    known: dict[str, tuple[int, dict[str, int]]] = {}
    for i, entry in enumerate(raw_layers):
        where = f"layers[{i}]"
        if not isinstance(entry, dict) or "name" not in entry or "labels" not in entry:
            raise GraphValidationError(f"{where}: each layer needs 'name' and 'labels'")
        name = entry["name"]
        labels = entry["labels"]
        if name in known:
            raise GraphValidationError(f"{where}: duplicate layer name '{name}'")
        if not isinstance(labels, list) or not labels:
            raise GraphValidationError(f"{where}: 'labels' must be a non-empty list")
        if len(set(labels)) != len(labels):
            dupes = sorted({x for x in labels if labels.count(x) > 1})
            raise GraphValidationError(f"{where}: duplicate label(s) {dupes}")
        layer = ConceptLayer(
            name=name,
            labels=tuple(labels),
            single_label=bool(entry.get("single_label", False)),
        )
        layers.append(layer)
        known[name] = (i, {lab: k for k, lab in enumerate(layer.labels)})

    sizes = [layer.size for layer in layers]
    inter_pos = [np.zeros((sizes[i + 1], sizes[i])) for i in range(len(layers) - 1)]
    inter_neg = [np.zeros((sizes[i + 1], sizes[i])) for i in range(len(layers) - 1)]
    intra_pos = [np.zeros((n, n)) for n in sizes]
    intra_neg = [np.zeros((n, n)) for n in sizes]

    for j, edge in enumerate(doc.get("edges", [])):
        where = f"edges[{j}]"
        if not isinstance(edge, dict) or not {"from", "to", "sign"} <= set(edge):
            raise GraphValidationError(f"{where}: edge needs 'from', 'to' and 'sign'")
        sign = edge["sign"]
        if sign not in (POS, NEG):
            raise GraphValidationError(f"{where}: sign must be '{POS}' or '{NEG}', got {sign!r}")
        la, ka = _parse_endpoint(edge["from"], known, where)
        lb, kb = _parse_endpoint(edge["to"], known, where)
        if la == lb:
            tgt = intra_pos if sign == POS else intra_neg
            other = intra_neg if sign == POS else intra_pos
            if other[la][ka, kb] or other[la][kb, ka]:
                raise GraphValidationError(
                    f"{where}: pair already carries the opposite sign"
                )
            tgt[la][ka, kb] = 1.0
            tgt[la][kb, ka] = 1.0
            continue
        if abs(la - lb) != 1:
            raise GraphValidationError(
                f"{where}: inter-layer edges must connect adjacent layers "
                f"(got layers {la} and {lb})"
            )
        lo, klo = (la, ka) if la < lb else (lb, kb)
        khi = kb if la < lb else ka
        tgt = inter_pos if sign == POS else inter_neg
        other = inter_neg if sign == POS else inter_pos
        if other[lo][khi, klo]:
            raise GraphValidationError(f"{where}: pair already carries the opposite sign")
        tgt[lo][khi, klo] = 1.0

    graph = LabelGraph(
        layers=tuple(layers),
        inter_pos=inter_pos,
        inter_neg=inter_neg,
        intra_pos=intra_pos,
        intra_neg=intra_neg,
    )
    violations = graph.validate()
    if violations:
        raise GraphValidationError("; ".join(str(v) for v in violations))
    return graph


def load_graph(path) -> LabelGraph:
    """Load and validate a graph document from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphValidationError(f"{path}: not valid JSON ({exc})") from exc
    return load_graph_document(doc)


def save_graph(graph: LabelGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph.to_document(), fh, indent=2, sort_keys=False)
        fh.write("\n")
