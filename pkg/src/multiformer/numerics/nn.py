"""Parameter containers and the small set of layers the model is built from."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from . import functional as F
from .tensor import Tensor, get_default_dtype


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.asarray(data, dtype=get_default_dtype()), requires_grad=True, name=name)


class Module:
    """Base class. Parameters, buffers and submodules are discovered from attributes."""

    training = True

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            yield from _walk_params(value, f"{prefix}{name}")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, value in vars(self).items():
            yield from _walk_buffers(value, f"{prefix}{name}")

    def named_modules(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix.rstrip("."), self
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield from value.named_modules(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_modules(f"{prefix}{name}.{i}.")

    def train(self, mode: bool = True) -> "Module":
        for _, m in self.named_modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def set_rng(self, rng: np.random.Generator | None) -> "Module":
        """Give every dropout layer below this module the same generator."""
        for _, m in self.named_modules():
            if isinstance(m, Dropout):
                m.rng = rng
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        state.update(dict(self.named_buffers()))
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        missing = [k for k in list(params) + list(buffers) if k not in state]
        unexpected = [k for k in state if k not in params and k not in buffers]
        if strict and (missing or unexpected):
            raise KeyError(f"state mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, p in params.items():
            if name in state:
                value = np.asarray(state[name])
                if value.shape != p.shape:
                    raise ValueError(f"{name}: checkpoint shape {value.shape} != model shape {p.shape}")
                p.data = value.astype(p.dtype)
        for name, buf in buffers.items():
            if name in state:
                buf[...] = state[name]

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _walk_params(value, name):
    if isinstance(value, Tensor) and value.requires_grad:
        yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(f"{name}.")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk_params(item, f"{name}.{i}")


def _walk_buffers(value, name):
    if isinstance(value, Module):
        yield from value.named_buffers(f"{name}.")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk_buffers(item, f"{name}.{i}")


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True, std: float | None = None):
        std = np.sqrt(1.0 / d_in) if std is None else std
        self.weight = parameter(rng.normal(0.0, std, (d_in, d_out)))
        self.bias = parameter(np.zeros(d_out)) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(
        self, c_in: int, c_out: int, k: int, rng: np.random.Generator, stride: int = 1, padding: int = 0, gain: float = 2.0, bias: bool = True
    ):
        std = np.sqrt(gain / (c_in * k * k))
        self.weight = parameter(rng.normal(0.0, std, (c_out, c_in, k, k)))
        self.bias = parameter(np.zeros(c_out)) if bias else None
        self.stride = stride
        self.padding = padding

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm(Module):
    """Batch normalization with one affine pair per position of the non-reduced axes.

    ``feature_shape`` is the shape left after removing ``reduce_axes`` from the input.
    """

    def __init__(self, feature_shape, reduce_axes, momentum: float = 0.1):
        feature_shape = tuple(np.atleast_1d(feature_shape))
        self.gamma = parameter(np.ones(feature_shape))
        self.beta = parameter(np.zeros(feature_shape))
        self.reduce_axes = tuple(reduce_axes)
        self.momentum = momentum
        self.running = {"mean": np.zeros(feature_shape), "var": np.ones(feature_shape)}

    def named_buffers(self, prefix: str = ""):
        yield f"{prefix}running_mean", self.running["mean"]
        yield f"{prefix}running_var", self.running["var"]

    def forward(self, x):
        return F.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.reduce_axes,
            self.running["mean"],
            self.running["var"],
            training=self.training,
            momentum=self.momentum,
        )


class LayerNorm(Module):
    def __init__(self, d: int):
        self.gamma = parameter(np.ones(d))
        self.beta = parameter(np.zeros(d))

    def forward(self, x):
        return F.layer_norm(x, self.gamma, self.beta)


class Dropout(Module):
    def __init__(self, rate: float):
        self.rate = float(rate)
        self.rng: np.random.Generator | None = None

    def forward(self, x):
        return F.dropout(x, self.rate, self.rng, training=self.training)


def count_parameters(module: Module) -> int:
    return int(sum(p.size for p in module.parameters()))
