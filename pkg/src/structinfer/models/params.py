"""Named parameter blocks shared by every model variant."""

from __future__ import annotations

import numpy as np

from ..engine import Tape, Tensor
from ..errors import ContractError


class ParamStore:
    """Ordered name -> float64 array mapping plus optional 0/1 masks.

    Masked blocks keep their masked entries at exactly zero; `apply_masks`
    re-imposes that after an optimizer step and `check_masks` asserts it.
    Insertion order is the canonical block order everywhere (checkpoints,
    gradient maps), which keeps runs byte-reproducible.
    """

    def __init__(self):
        self.values: dict[str, np.ndarray] = {}
        self.masks: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray, mask: np.ndarray | None = None) -> None:
        if name in self.values:
            raise ContractError(f"duplicate parameter block '{name}'")
        value = np.asarray(value, dtype=np.float64)
        if mask is not None:
            mask = np.asarray(mask, dtype=np.float64)
            if mask.shape != value.shape:
                raise ContractError(f"mask shape {mask.shape} != value shape {value.shape} for '{name}'")
            value = value * mask
            self.masks[name] = mask
        self.values[name] = value

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def names(self) -> list[str]:
        return list(self.values)

    def num_scalars(self) -> int:
        return sum(v.size for v in self.values.values())

    def tensors(self, tape: Tape | None = None) -> dict[str, Tensor]:
        """Wrap every block as a leaf tensor, optionally attached to a tape."""
        return {name: Tensor(v, tape=tape) for name, v in self.values.items()}

    def apply_masks(self) -> None:
        for name, mask in self.masks.items():
            self.values[name] *= mask

    def check_masks(self) -> None:
        """Raise if any masked entry drifted away from exactly zero."""
        for name, mask in self.masks.items():
            block = self.values[name]
            if np.any(block[mask == 0.0] != 0.0):
                raise ContractError(f"masked entries of '{name}' are not exactly zero")

    def copy(self) -> "ParamStore":
        dup = ParamStore()
        for name, v in self.values.items():
            dup.add(name, v.copy(), self.masks.get(name))
        return dup


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Zero-mean uniform entries scaled by 1/sqrt(fan-in)."""
    return rng.uniform(-1.0, 1.0, size=shape) / np.sqrt(max(fan_in, 1))
