"""Named parameter storage and initialisers shared by the model pieces."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Parameter


class ParamStore:
    """Ordered ``name -> Parameter`` map; names are unique and dotted by group."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, value) -> Parameter:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Parameter(value, name)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def group(self, prefix: str) -> list[Parameter]:
        return [p for n, p in self._params.items() if n == prefix or n.startswith(prefix + ".")]

    def groups(self) -> list[str]:
        return list(dict.fromkeys(n.split(".", 1)[0] for n in self._params))

    def state(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        if missing:
            raise KeyError(f"state is missing parameters: {sorted(missing)}")
        for n, p in self._params.items():
            value = np.asarray(state[n], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{n}: shape {value.shape} does not match {p.shape}")
            p.data[...] = value

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()


def uniform(rng: np.random.Generator, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    return uniform(rng, (fan_out, fan_in), np.sqrt(6.0 / (fan_in + fan_out)))
