import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multiformer.encoder import (
    Branch,
    DualBranchEncoder,
    EncoderBlock,
    Fusion,
    MultiHeadSelfAttention,
    Reconstruction,
    export_attention,
    msa,
)
from multiformer.numerics import ConfigurationError, DimensionError, Tensor, no_grad
from multiformer.presets import get_preset

SMALL = get_preset("desk").replace(d_model=16, heads=2, layers=2, dropout=0.0, channels=4)


def test_uniform_attention_returns_token_mean(rng, f64):
    x = rng.standard_normal((5, 4))
    out = msa(x, np.zeros((1, 4, 4)), np.zeros((1, 4, 4)), np.eye(4)[None])
    assert np.allclose(out.data, np.tile(x.mean(axis=0), (5, 1)), atol=1e-12)


def test_identical_tokens_give_identical_rows(rng, f64):
    x = np.tile(rng.standard_normal(8), (6, 1))
    out = msa(x, rng.standard_normal((2, 8, 4)), rng.standard_normal((2, 8, 4)), rng.standard_normal((2, 8, 8))).data
    assert np.allclose(out, out[0], atol=1e-12)


def test_two_token_hand_calculation(f64):
    x = np.array([[1.0, 0.0], [0.0, 2.0]])
    wq = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    wk = np.array([[[2.0, 0.0], [0.0, 1.0]]])
    wv = np.array([[[1.0, 1.0], [0.0, 1.0]]])
    # q = x, k = [[2,0],[0,2]], v = [[1,1],[0,2]], d_k = 2
    # logits row 0: [2, 0] / sqrt2 ; row 1: [0, 4] / sqrt2
    s = math.sqrt(2.0)
    p0 = 1.0 / (1.0 + math.exp(-2.0 / s))
    p1 = 1.0 / (1.0 + math.exp(-4.0 / s))
    expected = np.array([[p0 * 1 + (1 - p0) * 0, p0 * 1 + (1 - p0) * 2], [(1 - p1) * 1 + p1 * 0, (1 - p1) * 1 + p1 * 2]])
    assert np.max(np.abs(msa(x, wq, wk, wv).data - expected)) <= 1e-9


def test_heads_are_averaged_not_concatenated(rng, f64):
    x = rng.standard_normal((3, 4))
    w = [rng.standard_normal((2, 4, 2)), rng.standard_normal((2, 4, 2)), rng.standard_normal((2, 4, 4))]
    both = msa(x, *w).data
    heads = []
    for h in range(2):
        q, k, v = x @ w[0][h], x @ w[1][h], x @ w[2][h]
        logits = q @ k.T / math.sqrt(2)
        p = np.exp(logits - logits.max(axis=1, keepdims=True))
        heads.append((p / p.sum(axis=1, keepdims=True)) @ v)
    assert np.allclose(both, (heads[0] + heads[1]) / 2, atol=1e-12)


def test_divisibility_error(rng):
    with pytest.raises(ConfigurationError):
        MultiHeadSelfAttention(10, 3, rng)


@given(st.floats(-20, 20), st.integers(0, 2**31))
def test_msa_invariant_to_logit_shift(c, seed):
    g = np.random.default_rng(seed)
    layer = MultiHeadSelfAttention(8, 2, g)
    x = Tensor(g.standard_normal((1, 5, 8)))
    probs, _ = layer.attention(x)
    q = x.data[0] @ layer.w_q.data
    k = x.data[0] @ layer.w_k.data
    logits = q @ k.transpose(0, 2, 1) / math.sqrt(layer.d_k) + c
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    assert np.allclose(e / e.sum(axis=-1, keepdims=True), probs.data[0], atol=1e-9)


def test_block_with_zero_ffn_is_layernorm_of_attention(rng, f64):
    blk = EncoderBlock(SMALL, rng)
    for lin in (blk.ff1, blk.ff2):
        lin.weight.data[:] = 0
        lin.bias.data[:] = 0
    x = rng.standard_normal((2, 5, 16))
    a = blk.attn(x).data
    mu, var = a.mean(-1, keepdims=True), a.var(-1, keepdims=True)
    out = blk(x).data
    assert out.shape == (2, 5, 16)
    assert np.allclose(out, (a - mu) / np.sqrt(var + 1e-5), atol=1e-12)


def test_block_eval_is_deterministic(rng):
    blk = EncoderBlock(get_preset("desk").replace(d_model=16, heads=2), rng).eval()
    x = rng.standard_normal((2, 5, 16))
    assert np.array_equal(blk(x).data, blk(x).data)


def test_branch_permutation_equivariance_without_embedding(rng, f64):
    br = Branch(6, 5, SMALL, rng)
    br.embed.embedding.data[:] = 0
    x = rng.standard_normal((3, 6, 5))
    perm = rng.permutation(6)
    out = br.encode(x).data
    out_p = br.encode(x[:, perm]).data
    assert np.allclose(out_p, out[:, perm], atol=1e-10)


def test_embedding_breaks_permutation_equivariance(rng, f64):
    br = Branch(6, 5, SMALL, rng)
    br.embed.embedding.data = rng.standard_normal((6, 16))
    x = rng.standard_normal((3, 6, 5))
    perm = np.roll(np.arange(6), 1)
    assert not np.allclose(br.encode(x[:, perm]).data, br.encode(x).data[:, perm], atol=1e-6)


def test_reconstruction_reshape_is_row_major(rng):
    rec = Reconstruction(1, 4, 2, rng)
    feats = Tensor(np.arange(16.0)[None, None])
    planes = feats.reshape(1, 1, 4, 4).data[0, 0]
    assert all(planes[r, c] == r * 4 + c for r in range(4) for c in range(4))
    with pytest.raises(ConfigurationError):
        rec(np.zeros((2, 1, 15)))


def test_reconstruction_of_zero_is_zero(rng):
    rec = Reconstruction(3, 4, 2, rng)
    assert not rec(np.zeros((2, 3, 16))).data.any()


def test_fusion_zero_and_mismatch(rng):
    fu = Fusion(2, 4, rng)
    assert not fu(Tensor(np.zeros((2, 2, 3, 3))), Tensor(np.zeros((2, 2, 3, 3)))).data.any()
    with pytest.raises(DimensionError):
        fu(Tensor(np.zeros((2, 2, 3, 3))), Tensor(np.zeros((2, 2, 4, 4))))


def test_fusion_select_first_half(rng, f64):
    fu = Fusion(2, 2, rng)
    fu.conv.weight.data = np.zeros((2, 4, 1, 1))
    fu.conv.weight.data[0, 0, 0, 0] = fu.conv.weight.data[1, 1, 0, 0] = 1.0
    a, b = rng.standard_normal((3, 2, 4, 4)), rng.standard_normal((3, 2, 4, 4))
    out = fu(Tensor(a), Tensor(b)).data
    mu, var = a.mean(axis=(0, 2, 3), keepdims=True), a.var(axis=(0, 2, 3), keepdims=True)
    assert np.allclose(out, np.maximum((a - mu) / np.sqrt(var + 1e-5), 0), atol=1e-12)


def test_every_encoder_parameter_gets_gradient(rng, f64):
    cfg = SMALL.replace(packets=4, subcarriers=6)
    enc = DualBranchEncoder(cfg, rng)
    freq = rng.standard_normal((3, 6, 4 * 3))
    temp = rng.standard_normal((3, 4, 6 * 3))
    w = rng.standard_normal((3, cfg.channels, cfg.side, cfg.side))
    (enc(freq, temp) * w).sum().backward()
    for name, p in enc.named_parameters():
        assert p.grad is not None and np.abs(p.grad).max() > 0, name


def test_export_attention(rng):
    br = Branch(6, 5, SMALL, rng)
    x = rng.standard_normal((6, 5))
    mat, sal = export_attention(br, x, 1, 1)
    assert mat.shape == (6, 6) and sal.shape == (6,)
    assert np.allclose(mat.sum(axis=1), 1.0, atol=1e-6)
    assert np.allclose(sal, mat.mean(axis=0))
    assert br.training
    for args in ((2, 0), (0, 2), (-1, 0)):
        with pytest.raises(IndexError):
            export_attention(br, x, *args)


def test_export_uniform_logits(rng):
    br = Branch(6, 5, SMALL, rng)
    for blk in br.blocks:
        blk.attn.w_q.data[:] = 0
    mat, _ = export_attention(br, rng.standard_normal((6, 5)), 0, 0)
    assert np.allclose(mat, 1.0 / 6)


def test_branch_names(rng):
    enc = DualBranchEncoder(SMALL.replace(packets=4, subcarriers=6), rng)
    assert enc.branch("frequency") is enc.freq and enc.branch("time") is enc.temp
    with pytest.raises(ConfigurationError):
        enc.branch("space")


def test_full_size_preset_frequency_salience_has_64_rows():
    cfg = get_preset("MultiFormer").replace(layers=1)
    br = Branch(cfg.subcarriers, cfg.packets * cfg.links, cfg, np.random.default_rng(0))
    with no_grad():
        _, sal = export_attention(br, np.random.default_rng(1).random((64, 192)), 0, 0)
    assert sal.shape == (64,)
