"""Central-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, branch_log, no_grad

# Below this magnitude a gradient entry is compared absolutely.
ABS_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    tolerance: float
    per_tensor: dict[str, float] = field(default_factory=dict)
    resampled: int = 0  # coordinates replaced because +-h straddled a ReLU/max switch

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error < self.tolerance)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = ABS_FLOOR) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def check_gradients(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    names: Sequence[str] | None = None,
    h: float = 1e-5,
    coords_per_tensor: int | None = None,
    tolerance: float = 1e-4,
    seed: int = 0,
    label: str = "check",
    avoid_kinks: bool = False,
    max_resample: int = 50,
) -> GradCheckResult:
    """Compare backprop gradients of ``loss_fn()`` against central differences.

    ``loss_fn`` must rebuild the graph on every call and return a scalar.
    With ``coords_per_tensor`` set, only that many random coordinates of each
    tensor are perturbed. With ``avoid_kinks`` a sampled coordinate whose +h
    and -h evaluations select different ReLU/max branches is replaced by
    another one, since a central difference across a kink does not estimate
    the derivative.
    """
    names = list(names) if names is not None else [t.name or f"t{i}" for i, t in enumerate(tensors)]
    for t in tensors:
        t.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [np.zeros(t.shape) if t.grad is None else np.array(t.grad, dtype=np.float64) for t in tensors]

    rng = np.random.default_rng(seed)
    per_tensor: dict[str, float] = {}
    resampled = 0
    with no_grad():
        for name, t, a in zip(names, tensors, analytic):
            if not t.data.flags.c_contiguous:
                t.data = np.ascontiguousarray(t.data)
            flat = t.data.reshape(-1)
            if coords_per_tensor is None or coords_per_tensor >= flat.size:
                coords = np.arange(flat.size)
            else:
                coords = rng.choice(flat.size, size=coords_per_tensor, replace=False)
            numeric = np.empty(len(coords))
            chosen = set(coords.tolist())
            spare = [int(c) for c in rng.permutation(flat.size) if c not in chosen] if avoid_kinks else []
            for k in range(len(coords)):
                for _ in range(max_resample + 1):
                    c = coords[k]
                    orig = flat[c]
                    flat[c] = orig + h
                    with branch_log() as up:
                        plus = float(loss_fn().data)
                    flat[c] = orig - h
                    with branch_log() as down:
                        minus = float(loss_fn().data)
                    flat[c] = orig
                    if not avoid_kinks or _same_branches(up, down) or not spare:
                        break
                    resampled += 1
                    coords[k] = spare.pop()
                numeric[k] = (plus - minus) / (2.0 * h)
            err = relative_error(a.reshape(-1)[coords], numeric)
            per_tensor[name] = float(err.max()) if err.size else 0.0
    worst = max(per_tensor.values(), default=0.0)
    return GradCheckResult(label, worst, tolerance, per_tensor, resampled)


def _same_branches(a: list, b: list) -> bool:
    return len(a) == len(b) and all(x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b))


def projected(fn: Callable[..., Tensor], *inputs: Tensor, seed: int = 1) -> Callable[[], Tensor]:
    """Wrap a tensor-valued ``fn`` into a scalar loss by a fixed random projection."""
    weights: dict[str, np.ndarray] = {}

    def loss():
        out = fn(*inputs)
        if "w" not in weights:
            weights["w"] = np.random.default_rng(seed).standard_normal(out.shape).astype(out.dtype)
        return (out * weights["w"]).sum()

    return loss
