import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multiformer.model import MultiFormer
from multiformer.msfn import (
    ConvStack,
    HeatmapDecoder,
    MultiStageFusion,
    PoseAttention,
    feature_update,
    run_stages,
)
from multiformer.numerics import ConfigurationError, DimensionError, Tensor, no_grad
from multiformer.presets import HEAD_OUT, get_preset

CFG = get_preset("desk").replace(d_model=36, heads=2, channels=8, dropout=0.0)


def heatmaps(rng, n=2, s=6):
    return Tensor(rng.random((n, 19, s, s))), Tensor(rng.standard_normal((n, 38, s, s)))


def zero_biases(module):
    for name, p in module.named_parameters():
        if name.endswith("bias"):
            p.data[:] = 0


# ---- pose attention -------------------------------------------------------
def test_zero_heatmaps_give_half(rng):
    pa = PoseAttention(8, rng)
    zero_biases(pa)
    z19, z38 = np.zeros((1, 19, 6, 6)), np.zeros((1, 38, 6, 6))
    wc, ws = pa(z19, z38)
    assert wc.shape == (1, 8) and ws.shape == (1, 6, 6)
    assert np.all(wc.data == 0.5) and np.all(ws.data == 0.5)


def test_channel_weights_on_constant_heatmaps(rng, f64):
    pa = PoseAttention(8, rng)
    for p in pa.parameters():
        p.data = rng.standard_normal(p.shape)
    pcm, paf = np.full((1, 19, 5, 5), 0.3), np.full((1, 38, 5, 5), 0.3)
    v = np.full(57, 0.3)
    mlp = np.maximum(v @ pa.mlp1.weight.data + pa.mlp1.bias.data, 0) @ pa.mlp2.weight.data + pa.mlp2.bias.data
    assert np.allclose(pa.channel(pcm, paf).data[0], 1 / (1 + np.exp(-2 * mlp)), atol=1e-12)


def test_spatial_weights_uniform_away_from_border(rng, f64):
    pa = PoseAttention(8, rng)
    ws = pa.spatial(np.full((1, 19, 12, 12), 0.2), np.full((1, 38, 12, 12), 0.1)).data[0]
    inner = ws[3:-3, 3:-3]
    assert np.allclose(inner, inner[0, 0], atol=1e-12)


@given(st.integers(0, 2**31))
def test_attention_weights_strictly_inside_unit_interval(seed):
    g = np.random.default_rng(seed)
    wc, ws = PoseAttention(8, g)(*heatmaps(g))
    for w in (wc.data, ws.data):
        assert np.all(w > 0) and np.all(w < 1)


def test_full_size_preset_attention_shapes():
    pa = PoseAttention(256, np.random.default_rng(0))
    with no_grad():
        wc, ws = pa(np.zeros((1, 19, 36, 36)), np.zeros((1, 38, 36, 36)))
    assert wc.shape == (1, 256) and ws.shape == (1, 36, 36)


# ---- feature update -------------------------------------------------------
def test_feature_update_matches_triple_loop(rng, f64):
    phi, wc, ws = rng.standard_normal((2, 3, 3)), rng.random(2), rng.random((3, 3))
    ref = np.zeros_like(phi)
    for c in range(2):
        for u in range(3):
            for v in range(3):
                ref[c, u, v] = phi[c, u, v] * wc[c] * ws[u, v]
    assert np.array_equal(feature_update(phi, wc, ws).data, ref)


def test_feature_update_unit_and_zero(rng, f64):
    phi = rng.standard_normal((4, 5, 5))
    assert np.array_equal(feature_update(phi, np.ones(4), np.ones((5, 5))).data, phi)
    wc = np.ones(4)
    wc[2] = 0
    out = feature_update(phi, wc, np.ones((5, 5))).data
    assert not out[2].any() and np.array_equal(out[1], phi[1])
    with pytest.raises(DimensionError):
        feature_update(phi, np.ones(3), np.ones((5, 5)))


@given(st.floats(-4, 4), st.integers(0, 2**31))
def test_feature_update_bilinear(alpha, seed):
    g = np.random.default_rng(seed)
    phi, wc, ws = g.standard_normal((3, 4, 4)), g.random(3), g.random((4, 4))
    base = feature_update(phi, wc, ws).data
    assert np.allclose(feature_update(phi, alpha * wc, ws).data, alpha * base, rtol=1e-12, atol=1e-12)
    assert np.allclose(feature_update(phi, wc, alpha * ws).data, alpha * base, rtol=1e-12, atol=1e-12)


# ---- decoder heads --------------------------------------------------------
def test_decoder_zero_input_zero_output(rng):
    dec = HeatmapDecoder(CFG, rng)
    zero_biases(dec)
    pcm, paf = dec(np.zeros((1, 8, 6, 6)))
    assert pcm.shape == (1, 19, 6, 6) and paf.shape == (1, 38, 6, 6)
    assert not pcm.data.any() and not paf.data.any()


def test_decoder_stack_layers_match_presets():
    rng = np.random.default_rng(0)
    full = ConvStack(256, get_preset("MultiFormer").decoder, 19, rng)
    assert [(c.weight.shape[0], c.weight.shape[2]) for c in full.convs] == [(128, 3), (128, 3), (512, 1), (19, 1)]
    small = ConvStack(256, get_preset("MultiFormer-18").decoder, 38, rng)
    assert len(small.convs) == 3 and small.convs[-1].weight.shape[0] == 38


def test_no_relu_after_last_layer(rng, f64):
    stack = ConvStack(2, ((3, 1, 1, 0), (HEAD_OUT, 1, 1, 0)), 1, rng)
    stack.convs[-1].bias.data[:] = -100.0
    assert np.all(stack(np.zeros((1, 2, 3, 3))).data < 0)


def test_grid_changing_layer_rejected(rng):
    with pytest.raises(ConfigurationError):
        ConvStack(2, ((3, 3, 1, 0), (HEAD_OUT, 1, 1, 0)), 19, rng)


# ---- stage loop -----------------------------------------------------------
def _count_calls(monkeypatch, cls, method):
    calls = []
    orig = getattr(cls, method)

    def wrapper(self, *a, **k):
        calls.append(1)
        return orig(self, *a, **k)

    monkeypatch.setattr(cls, method, wrapper)
    return calls


@pytest.mark.parametrize("stages,papm", [(1, 0), (2, 1), (3, 2)])
def test_stage_call_counts(monkeypatch, rng, stages, papm):
    net = MultiStageFusion(CFG, rng)
    attn = _count_calls(monkeypatch, PoseAttention, "forward")
    dec = _count_calls(monkeypatch, HeatmapDecoder, "forward")
    outs = run_stages(net, Tensor(rng.random((2, 8, 6, 6))), stages)
    assert len(outs) == stages and len(attn) == papm and len(dec) == stages


def test_stage_two_feature_is_compositional(rng, f64):
    net = MultiStageFusion(CFG, rng)
    phi0 = Tensor(rng.random((2, 8, 6, 6)))
    outs = run_stages(net, phi0, 2)
    h1 = outs[0]
    wc = net.attention[0].channel(h1.pcm, h1.paf)
    ws = net.attention[0].spatial(h1.pcm, h1.paf)
    assert np.array_equal(outs[1].phi.data, feature_update(phi0, wc, ws).data)
    assert np.all(outs[0].wc.data == 1) and np.all(outs[0].ws.data == 1)
    assert np.array_equal(outs[0].phi.data, phi0.data)


def test_unit_attention_keeps_phi0(rng, f64):
    net = MultiStageFusion(CFG, rng)
    phi0 = Tensor(rng.random((2, 8, 6, 6)))
    for out in run_stages(net, phi0, unit_attention=True):
        assert np.array_equal(out.phi.data, phi0.data)


def test_stage_count_bounds(rng):
    net = MultiStageFusion(CFG, rng)
    with pytest.raises(ConfigurationError):
        run_stages(net, Tensor(rng.random((1, 8, 6, 6))), 4)


@pytest.mark.parametrize("stage", [0, 1, 2])
def test_each_stage_loss_reaches_encoder(stage, f64):
    cfg = get_preset("desk").replace(dropout=0.0)
    model = MultiFormer(cfg, seed=stage)
    g = np.random.default_rng(stage)
    freq = g.random((2, cfg.subcarriers, cfg.packets * 3))
    temp = g.random((2, cfg.packets, cfg.subcarriers * 3))
    out = model(freq, temp)[stage]
    ((out.pcm * out.pcm).sum() + (out.paf * out.paf).sum()).backward()
    for name, p in model.encoder.named_parameters():
        assert p.grad is not None and np.abs(p.grad).max() > 0, name
