"""Named finite-difference checks for the differentiable building blocks.

Every check runs in float64 with h = 1e-5. Primitives are checked on every
coordinate against 1e-4; composed networks on a few random coordinates per
parameter tensor against 1e-3.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .numerics import functional as F
from .numerics.gradcheck import GradCheckResult, check_gradients, projected
from .numerics.tensor import Tensor, default_dtype, matmul, sigmoid, softmax

PRIMITIVE_TOL = 1e-4
COMPOSED_TOL = 1e-3


def _t(rng, *shape, scale=1.0) -> Tensor:
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _primitive(label: str, fn, *inputs) -> GradCheckResult:
    return check_gradients(projected(fn, *inputs), inputs, [f"in{i}" for i in range(len(inputs))], tolerance=PRIMITIVE_TOL, label=label)


def check_matmul(rng):
    return _primitive("matmul", matmul, _t(rng, 3, 4), _t(rng, 4, 5))


def check_linear(rng):
    return _primitive("linear", F.linear, _t(rng, 2, 3, 4), _t(rng, 4, 5), _t(rng, 5))


def check_conv2d(rng):
    return _primitive("conv2d", lambda x, w, b: F.conv2d(x, w, b, 1, 1), _t(rng, 2, 3, 5, 5), _t(rng, 4, 3, 3, 3), _t(rng, 4))


def check_conv2d_strided(rng):
    return _primitive("conv2d_strided", lambda x, w, b: F.conv2d(x, w, b, 2, 0), _t(rng, 1, 2, 7, 7), _t(rng, 3, 2, 3, 3), _t(rng, 3))


def check_batch_norm(rng):
    run_m, run_v = np.zeros(3), np.ones(3)
    return _primitive(
        "batch_norm",
        lambda x, g, b: F.batch_norm(x, g, b, (0, 2, 3), run_m, run_v, training=True),
        _t(rng, 4, 3, 2, 2),
        _t(rng, 3),
        _t(rng, 3),
    )


def check_layer_norm(rng):
    return _primitive("layer_norm", F.layer_norm, _t(rng, 4, 6), _t(rng, 6), _t(rng, 6))


def check_softmax(rng):
    return _primitive("softmax", lambda x: softmax(x, axis=-1), _t(rng, 3, 5, scale=2.0))


def check_sigmoid(rng):
    return _primitive("sigmoid", sigmoid, _t(rng, 4, 5, scale=2.0))


def check_max_pool(rng):
    # well separated values keep the argmax away from ties
    x = Tensor(rng.permutation(64).reshape(1, 1, 8, 8).astype(np.float64) * 0.1, requires_grad=True)
    return _primitive("max_pool", lambda v: F.pool(v, "max", "window", window=2), x)


def check_avg_pool(rng):
    return _primitive("avg_pool", lambda v: F.pool(v, "avg", "window", window=2), _t(rng, 1, 2, 4, 4))


def check_global_pool(rng):
    x = Tensor(rng.permutation(2 * 3 * 16).reshape(2, 3, 4, 4).astype(np.float64) * 0.1, requires_grad=True)
    return _primitive("global_pool", lambda v: F.pool(v, "max", "global") + F.pool(v, "avg", "global"), x)


def check_msa(rng):
    from .encoder import msa

    x, wq, wk, wv = _t(rng, 5, 8), _t(rng, 2, 8, 4, scale=0.5), _t(rng, 2, 8, 4, scale=0.5), _t(rng, 2, 8, 8)
    return _primitive("msa", msa, x, wq, wk, wv)


def check_encoder_blocks(rng):
    """Two stacked encoder blocks on a 4 x 16 input."""
    from .encoder import EncoderBlock
    from .presets import get_preset

    cfg = get_preset("desk").replace(d_model=16, heads=2, layers=2, dropout=0.0)
    blocks = [EncoderBlock(cfg, rng) for _ in range(2)]
    x = _t(rng, 4, 16)

    def fn(v):
        for b in blocks:
            v = b(v)
        return v

    params = [x] + [p for b in blocks for p in b.parameters()]
    names = ["x"] + [f"block{i}.{n}" for i, b in enumerate(blocks) for n, _ in b.named_parameters()]
    return check_gradients(projected(fn, x), params, names, coords_per_tensor=5, tolerance=COMPOSED_TOL, avoid_kinks=True, label="encoder_blocks")


def check_pose_attention(rng):
    from .msfn import PoseAttention, feature_update

    papm = PoseAttention(8, rng)
    pcm, paf, phi = _t(rng, 2, 19, 6, 6), _t(rng, 2, 38, 6, 6), _t(rng, 2, 8, 6, 6)

    def fn(a, b, f):
        wc, ws = papm(a, b)
        return feature_update(f, wc, ws)

    params = [pcm, paf, phi] + papm.parameters()
    names = ["pcm", "paf", "phi"] + [n for n, _ in papm.named_parameters()]
    return check_gradients(projected(fn, pcm, paf, phi), params, names, coords_per_tensor=5, tolerance=COMPOSED_TOL, avoid_kinks=True, label="pose_attention")


def check_model(rng, coords: int = 5, preset: str = "desk"):
    """Full network of a preset (desk by default) with the multi-stage loss, dropout off, batch of 2."""
    from .model import MultiFormer
    from .presets import get_preset
    from .train import loss_total

    cfg = get_preset(preset).replace(dropout=0.0)
    model = MultiFormer(cfg, seed=int(rng.integers(1 << 31)))
    # zero biases put some ReLU inputs exactly on the kink; check at a generic point instead
    for name, p in model.named_parameters():
        if name.endswith("bias"):
            p.data = rng.normal(0.0, 0.1, p.shape)
    freq = rng.random((2, cfg.subcarriers, cfg.packets * cfg.links)) * 5.0
    temp = rng.random((2, cfg.packets, cfg.subcarriers * cfg.links)) * 5.0
    pcm = rng.random((2, 19, cfg.side, cfg.side))
    paf = rng.random((2, 38, cfg.side, cfg.side)) - 0.5

    # mean rather than sum keeps the loss O(1) so cancellation noise stays below the floor
    scale = 1.0 / (pcm.size + paf.size)

    def loss():
        return loss_total(model(freq, temp), pcm, paf) * scale

    names, params = zip(*model.named_parameters())
    return check_gradients(loss, params, names, coords_per_tensor=coords, tolerance=COMPOSED_TOL, avoid_kinks=True, label="model")


CHECKS: dict[str, Callable] = {
    "matmul": check_matmul,
    "linear": check_linear,
    "conv2d": check_conv2d,
    "conv2d_strided": check_conv2d_strided,
    "batch_norm": check_batch_norm,
    "layer_norm": check_layer_norm,
    "softmax": check_softmax,
    "sigmoid": check_sigmoid,
    "max_pool": check_max_pool,
    "avg_pool": check_avg_pool,
    "global_pool": check_global_pool,
    "msa": check_msa,
    "encoder_blocks": check_encoder_blocks,
    "pose_attention": check_pose_attention,
    "model": check_model,
}


def run_checks(names=None, seed: int = 0, preset: str = "desk") -> list[GradCheckResult]:
    names = list(CHECKS) if names in (None, "all", ["all"]) else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown gradient check(s) {unknown}; available: {', '.join(CHECKS)}")
    results = []
    with default_dtype(np.float64):
        for i, name in enumerate(names):
            rng = np.random.default_rng([seed, i])
            results.append(check_model(rng, preset=preset) if name == "model" else CHECKS[name](rng))
    return results
