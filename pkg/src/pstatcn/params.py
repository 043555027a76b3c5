"""Named, seeded, trainable parameter registry with optimizer state.

Each parameter gets its own Philox stream keyed by (seed, name), so a given
name always initializes identically for a given seed no matter what else the
model registers. Weights draw fan-in-scaled uniform values; biases start at
zero. Adam moment buffers are allocated alongside every parameter.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError
from .tensor import Tensor
from .utils import seeded_rng

Array = np.ndarray


class ParamStore:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._params: dict[str, Tensor] = {}
        self.moment1: dict[str, Array] = {}
        self.moment2: dict[str, Array] = {}

    def register(self, name: str, shape: tuple[int, ...], fan_in: int | None = None,
                 init_scale: float = 1.0) -> Tensor:
        """Create a trainable tensor; fan_in=None means a zero-initialized bias.

        init_scale multiplies the fan-in bound; layers fed by an attention
        block use it to undo the ~1/F attenuation of near-uniform weights.
        """
        if name in self._params:
            raise ConfigurationError(f"parameter {name!r} registered twice")
        if fan_in is None:
            data = np.zeros(shape, dtype=np.float64)
        else:
            bound = init_scale / math.sqrt(fan_in)
            data = seeded_rng(self.seed, name).uniform(-bound, bound, size=shape)
        tensor = Tensor(data, requires_grad=True)
        self._params[name] = tensor
        self.moment1[name] = np.zeros(shape, dtype=np.float64)
        self.moment2[name] = np.zeros(shape, dtype=np.float64)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def count_values(self) -> int:
        """Total number of trainable scalars."""
        return sum(p.size for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def flatten(self) -> Array:
        """All parameter values concatenated in registration order."""
        if not self._params:
            return np.zeros(0, dtype=np.float64)
        return np.concatenate([p.data.ravel() for p in self._params.values()])

    def load_flat(self, values: Array) -> None:
        """Inverse of flatten; writes values back into the parameter tensors."""
        values = np.asarray(values, dtype=np.float64)
        if values.size != self.count_values():
            raise ConfigurationError(
                f"flat vector has {values.size} values, store holds {self.count_values()}"
            )
        offset = 0
        for p in self._params.values():
            p.data = values[offset : offset + p.size].reshape(p.shape).copy()
            offset += p.size
