"""Gradient-descent optimizers with a step-wise learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ConfigurationError, NumericsError, Tensor


class MissingGradientError(NumericsError, RuntimeError):
    pass


@dataclass
class StepDecay:
    """Multiply the learning rate by ``factor`` at every ``interval``-th epoch."""

    factor: float = 0.7
    interval: int = 15

    def __post_init__(self):
        if not 0.0 < self.factor <= 1.0 or self.interval < 1:
            raise ConfigurationError(f"invalid schedule factor={self.factor} interval={self.interval}")


class Optimizer:
    def __init__(self, params, lr: float, schedule: StepDecay | None = None, names=None):
        if lr <= 0:
            raise ConfigurationError(f"learning rate must be positive, got {lr}")
        self.params: list[Tensor] = list(params)
        self.names = list(names) if names is not None else [p.name or f"param{i}" for i, p in enumerate(self.params)]
        self.lr = float(lr)
        self.schedule = schedule
        self.step_count = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def _check(self) -> None:
        for name, p in zip(self.names, self.params):
            if p.grad is None:
                raise MissingGradientError(f"parameter '{name}' has no gradient; call backward() first")

    def epoch_end(self, epoch: int) -> None:
        """Apply the schedule after ``epoch`` (1-based) has finished."""
        if self.schedule is not None and epoch > 0 and epoch % self.schedule.interval == 0:
            self.lr *= self.schedule.factor

    def step(self) -> None:
        self._check()
        self.step_count += 1
        for i, p in enumerate(self.params):
            p.data = self._update(i, p).astype(p.dtype, copy=False)

    def _update(self, i: int, p: Tensor) -> np.ndarray:
        raise NotImplementedError

    def state(self) -> dict[str, np.ndarray]:
        return {"lr": np.array(self.lr), "step": np.array(float(self.step_count))}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        self.lr = float(state["lr"])
        self.step_count = int(state["step"])


class SGD(Optimizer):
    def _update(self, i, p):
        return p.data - self.lr * p.grad


class Adam(Optimizer):
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8, schedule=None, names=None):
        super().__init__(params, lr, schedule, names)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]

    def _update(self, i, p):
        g = p.grad
        self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
        self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
        m_hat = self.m[i] / (1.0 - self.beta1**self.step_count)
        v_hat = self.v[i] / (1.0 - self.beta2**self.step_count)
        return p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state(self):
        out = super().state()
        for name, m, v in zip(self.names, self.m, self.v):
            out[f"m.{name}"] = m
            out[f"v.{name}"] = v
        return out

    def load_state(self, state):
        super().load_state(state)
        for i, name in enumerate(self.names):
            self.m[i] = np.array(state[f"m.{name}"], dtype=np.float64)
            self.v[i] = np.array(state[f"v.{name}"], dtype=np.float64)


def make_optimizer(kind: str, params, names, lr: float, schedule: StepDecay | None) -> Optimizer:
    if kind == "adam":
        return Adam(params, lr=lr, schedule=schedule, names=names)
    if kind == "sgd":
        return SGD(params, lr=lr, schedule=schedule, names=names)
    raise ConfigurationError(f"unknown optimizer {kind!r}")
