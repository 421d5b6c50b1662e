"""Named parameter registry, initialization, and optimizers."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Params:
    """Trainable tensors keyed by stable dotted names.

    Insertion order is preserved so checkpoints and optimizer state are
    reproducible run to run.
    """

    def __init__(self):
        self._store: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._store:
            raise KeyError(f"parameter {name!r} already registered")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._store[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._store[name]

    def __contains__(self, name: str) -> bool:
        return name in self._store

    def __len__(self) -> int:
        return len(self._store)

    def names(self) -> list[str]:
        return list(self._store)

    def items(self):
        return self._store.items()

    def tensors(self) -> list[Tensor]:
        return list(self._store.values())

    def zero_grad(self) -> None:
        for t in self._store.values():
            t.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._store.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = [n for n in self._store if n not in state]
        if missing:
            raise KeyError(f"state dict missing parameters: {missing}")
        for name, t in self._store.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(
                    f"parameter {name!r}: stored shape {arr.shape} != expected {t.data.shape}"
                )
            t.data = arr.copy()


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int | None = None) -> np.ndarray:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].

    fan_in defaults to the first dimension (x @ W convention).
    """
    if fan_in is None:
        fan_in = shape[0]
    limit = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-limit, limit, size=shape)


class SGD:
    def __init__(self, params: Params, lr: float):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        for t in self.params.tensors():
            if t.grad is not None:
                t.data -= self.lr * t.grad

    def zero_grad(self) -> None:
        self.params.zero_grad()


class Adam:
    def __init__(self, params: Params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.t = 0

    def step(self, lr_scale: float = 1.0) -> None:
        self.t += 1
        for name, p in self.params.items():
            if p.grad is None:
                continue
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * p.grad
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * p.grad**2
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            p.data -= self.lr * lr_scale * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        self.params.zero_grad()
