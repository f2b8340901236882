"""Stochastic gradient descent with classical momentum."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Sgd:
    """v <- momentum * v + grad;  p <- p - lr * v.

    Gradients are zeroed after each step. Velocity buffers mirror the
    parameter shapes and start at zero.
    """

    def __init__(self, params: dict[str, Tensor], learning_rate: float,
                 momentum: float = 0.0):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        self.params = dict(params)
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is None:
                raise ValueError(f"parameter {name!r} has no gradient")
            v = self.velocity[name]
            v *= self.momentum
            v += p.grad
            p.data -= self.learning_rate * v
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
