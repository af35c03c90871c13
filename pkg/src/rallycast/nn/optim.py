"""Adam optimizer with the two-phase learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class GradientError(ValueError):
    """A parameter received a non-finite gradient."""


@dataclass
class LrSchedule:
    """Two training phases: ``epochs1`` at ``lr1`` then ``epochs2`` at ``lr2``."""

    epochs1: int = 10
    lr1: float = 0.002
    epochs2: int = 20
    lr2: float = 0.0002

    @property
    def total_epochs(self) -> int:
        return self.epochs1 + self.epochs2

    def lr_for_epoch(self, epoch: int) -> float:
        """Learning rate for a 1-indexed epoch."""
        if epoch < 1:
            raise ValueError(f"epochs are 1-indexed, got {epoch}")
        return self.lr1 if epoch <= self.epochs1 else self.lr2


@dataclass
class Adam:
    """Standard Adam with bias correction over a named parameter dict."""

    params: dict[str, Tensor]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    _m: dict[str, np.ndarray] = field(default_factory=dict)
    _v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for name, p in self.params.items():
            self._m[name] = np.zeros_like(p.data)
            self._v[name] = np.zeros_like(p.data)

    def step(self, lr: float) -> None:
        """Apply one update from the gradients stored on the parameters."""
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise GradientError(f"non-finite gradient for parameter {name!r}")
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            # rebind rather than mutate: tapes built before this step captured
            # the old arrays and must keep seeing the values they were built on
            p.data = p.data - lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state(self) -> dict:
        return {"step_count": self.step_count,
                "m": dict(self._m), "v": dict(self._v)}

    def load_state(self, state: dict) -> None:
        self.step_count = int(state["step_count"])
        for name in self.params:
            self._m[name] = np.array(state["m"][name], copy=True)
            self._v[name] = np.array(state["v"][name], copy=True)
