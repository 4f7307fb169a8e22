import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

import oracles
from tex3d import layers as L
from tex3d.gradcheck import REGISTRY, TOLERANCE, grad_check


def random_graph(rng, n, p=0.3):
    upper = np.triu(rng.random((n, n)) < p, 1)
    dense = upper | upper.T
    return sparse.csr_matrix(dense.astype(np.int8)), dense


def attn_params(rng, D, H, d, C):
    return {
        "Wq": rng.standard_normal((D, H * d)), "Wk": rng.standard_normal((D, H * d)),
        "Wv": rng.standard_normal((D, H * d)), "Wo": rng.standard_normal((H * d, C)),
        "bo": rng.standard_normal(C),
    }


# ------------------------------------------------------------------ mapping / affine


def test_mapping_identity_layer():
    z = np.array([3.0, -4.0, 0.0])
    w, _ = L.mapping_forward(z, [(np.eye(3), np.zeros(3))])
    np.testing.assert_allclose(w, [0.6, -0.8 * 0.2, 0.0], rtol=0, atol=1e-15)


def test_mapping_zero_z():
    with pytest.raises(ValueError, match="zero"):
        L.mapping_forward(np.zeros(4), [(np.eye(4), np.zeros(4))])


def test_mapping_dim_mismatch():
    with pytest.raises(ValueError, match="dim"):
        L.mapping_forward(np.ones(3), [(np.eye(4), np.zeros(4))])


def test_mapping_two_layer_oracle():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(6)
    layers = [(rng.standard_normal((6, 5)), rng.standard_normal(5)),
              (rng.standard_normal((5, 4)), rng.standard_normal(4))]
    h = [v / math.sqrt(sum(t * t for t in z)) for v in z]
    for W, b in layers:
        a = [sum(h[i] * W[i, j] for i in range(len(h))) + b[j] for j in range(W.shape[1])]
        h = [v if v >= 0 else 0.2 * v for v in a]
    np.testing.assert_allclose(L.mapping_forward(z, layers)[0], h, rtol=0, atol=1e-12)


def test_affine_zero_is_identity_style():
    w = np.random.default_rng(0).standard_normal(5)
    assert np.all(L.affine_style(w, np.zeros((5, 3)), 1.0) == 1.0)
    assert np.all(L.affine_style(w, np.zeros((5, 3))) == 0.0)


def test_affine_one_hot_row():
    w = np.array([0.6, 0.8])
    W = np.zeros((2, 3))
    W[1, 2] = 1.0
    assert L.affine_style(w, W, 1.0)[2] == pytest.approx(1.8, abs=1e-15)


def test_affine_oracle():
    rng = np.random.default_rng(1)
    w, W = rng.standard_normal(7), rng.standard_normal((7, 4))
    expect = [1.0 + sum(w[i] * W[i, j] for i in range(7)) for j in range(4)]
    np.testing.assert_allclose(L.affine_style(w, W, 1.0), expect, rtol=0, atol=1e-12)


# ------------------------------------------------------------------ AdaIN


def test_adain_identity_style_standardizes():
    x = np.random.default_rng(0).standard_normal((40, 5)) * 3 + 2
    y, _ = L.adain_forward(x, np.ones(5), np.zeros(5))
    np.testing.assert_allclose(y.mean(axis=0), 0, atol=1e-6)
    np.testing.assert_allclose(y.std(axis=0), 1, atol=1e-6)


def test_adain_constant_channel():
    x = np.random.default_rng(0).standard_normal((10, 3))
    x[:, 1] = 4.2
    y, _ = L.adain_forward(x, np.array([2.0, 3.0, 1.0]), np.array([0.5, -0.7, 0.0]))
    np.testing.assert_allclose(y[:, 1], -0.7, atol=1e-12)


def test_adain_two_pass_oracle():
    rng = np.random.default_rng(2)
    x, ys, yb = rng.standard_normal((50, 8)), rng.standard_normal(8), rng.standard_normal(8)
    np.testing.assert_allclose(L.adain_forward(x, ys, yb)[0], oracles.adain(x, ys, yb), rtol=0, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40), c=st.integers(1, 6))
def test_adain_output_stats_exact_damped(seed, n, c):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c)) * rng.uniform(1e-3, 10, c) + rng.standard_normal(c)
    ys, yb = rng.uniform(0.1, 3, c), rng.standard_normal(c)
    y, _ = L.adain_forward(x, ys, yb)
    var = x.var(axis=0)
    np.testing.assert_allclose(y.mean(axis=0), yb, rtol=0, atol=1e-10)
    np.testing.assert_allclose(y.std(axis=0), ys * np.sqrt(var / (var + 1e-8)), rtol=1e-10, atol=0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 40), c=st.integers(1, 6))
def test_adain_output_stats_match_style(seed, n, c):
    # eps damps the std by ~eps/(2 var); var >= 1e-2 keeps that below 1e-6
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c)) * rng.uniform(0.1, 10, c) + rng.standard_normal(c)
    ys, yb = rng.uniform(0.1, 3, c), rng.standard_normal(c)
    y, _ = L.adain_forward(x, ys, yb)
    ok = x.var(axis=0) >= 1e-2
    np.testing.assert_allclose(y.mean(axis=0), yb, rtol=0, atol=1e-6)
    np.testing.assert_allclose(y.std(axis=0)[ok], ys[ok], rtol=0, atol=1e-6)


def test_adain_idempotent_core():
    x = np.random.default_rng(3).standard_normal((30, 4))
    xn, _ = L.adain_forward(x, np.ones(4), np.zeros(4))
    xnn, _ = L.adain_forward(xn, np.ones(4), np.zeros(4))
    assert np.abs(xnn - xn).max() < 1e-6


# ------------------------------------------------------------------ attention


def test_attention_single_node():
    rng = np.random.default_rng(0)
    p = attn_params(rng, 3, 2, 2, 4)
    x = rng.standard_normal((1, 3))
    sup = L.attention_support(sparse.csr_matrix((1, 1)))
    out, _ = L.attention_forward(x, p, sup, 2)
    np.testing.assert_allclose(out, (x @ p["Wv"]) @ p["Wo"] + p["bo"], rtol=0, atol=1e-12)


def test_attention_identical_keys_uniform():
    rng = np.random.default_rng(1)
    adj, dense = random_graph(rng, 8, 0.4)
    sup = L.attention_support(adj)
    q = rng.standard_normal((8, 1, 3))
    k = np.broadcast_to(rng.standard_normal((1, 1, 3)), (8, 1, 3)).copy()
    v = rng.standard_normal((8, 1, 3))
    out, _ = L.sparse_attention(q, k, v, sup)
    for i in range(8):
        nb = [i] + list(np.flatnonzero(dense[i]))
        np.testing.assert_allclose(out[i, 0], v[nb, 0].mean(axis=0), rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", range(50))
def test_attention_matches_dense_masked_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 21))
    H, d = int(rng.integers(1, 4)), int(rng.integers(1, 5))
    D, C = int(rng.integers(2, 6)), int(rng.integers(1, 5))
    adj, dense = random_graph(rng, n, rng.uniform(0.05, 0.6))
    p = attn_params(rng, D, H, d, C)
    x = rng.standard_normal((n, D))
    out, _ = L.attention_forward(x, p, L.attention_support(adj), H)
    np.testing.assert_allclose(out, oracles.dense_attention(x, p, dense, H), rtol=0, atol=1e-10)


def test_attention_n12_h2_example():
    rng = np.random.default_rng(12)
    adj, dense = random_graph(rng, 12)
    p = attn_params(rng, 4, 2, 3, 5)
    x = rng.standard_normal((12, 4))
    out, _ = L.attention_forward(x, p, L.attention_support(adj), 2)
    np.testing.assert_allclose(out, oracles.dense_attention(x, p, dense, 2), rtol=0, atol=1e-10)


def test_attention_support_is_self_plus_neighbors():
    rng = np.random.default_rng(4)
    adj, dense = random_graph(rng, 15)
    sup = L.attention_support(adj)
    pairs = set(zip(sup.dst.tolist(), sup.src.tolist()))
    expect = {(i, j) for i in range(15) for j in range(15) if i == j or dense[i, j]}
    assert pairs == expect


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 20), heads=st.integers(1, 3))
def test_attention_rows_convex(seed, n, heads):
    rng = np.random.default_rng(seed)
    adj, dense = random_graph(rng, n)
    sup = L.attention_support(adj)
    q, k, v = (rng.standard_normal((n, heads, 3)) * 3 for _ in range(3))
    alpha = L.sparse_attention_weights(q, k, sup)
    assert np.all(alpha >= 0)
    sums = np.add.reduceat(alpha, sup.starts, axis=0)
    np.testing.assert_allclose(sums, 1.0, rtol=0, atol=1e-12)
    out, _ = L.sparse_attention(q, k, v, sup)
    for i in range(n):
        nb = [i] + list(np.flatnonzero(dense[i]))
        assert np.all(out[i] >= v[nb].min(axis=0) - 1e-12)
        assert np.all(out[i] <= v[nb].max(axis=0) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_attention_non_neighbor_change_invisible(seed):
    rng = np.random.default_rng(seed)
    n = 12
    adj, dense = random_graph(rng, n, 0.2)
    sup = L.attention_support(adj)
    q, k, v = (rng.standard_normal((n, 2, 3)) for _ in range(3))
    out, _ = L.sparse_attention(q, k, v, sup)
    v_node = int(rng.integers(n))
    far = [u for u in range(n) if u != v_node and not dense[v_node, u]]
    if not far:
        return
    u = far[0]
    k2, v2 = k.copy(), v.copy()
    k2[u] += 10.0
    v2[u] -= 7.0
    out2, _ = L.sparse_attention(q, k2, v2, sup)
    assert out2[v_node].tobytes() == out[v_node].tobytes()


# ------------------------------------------------------------------ modulate / demodulate


def test_modulate_identity_and_zero():
    W = np.random.default_rng(0).standard_normal((4, 3))
    assert np.array_equal(L.modulate(W, np.ones(4)), W)
    assert np.all(L.modulate(W, np.zeros(4)) == 0)


def test_modulate_row_scaling_exact():
    rng = np.random.default_rng(1)
    W, s = rng.standard_normal((6, 5)), rng.standard_normal(6)
    expect = np.array([[s[i] * W[i, j] for j in range(5)] for i in range(6)])
    assert np.array_equal(L.modulate(W, s), expect)


def test_demodulate_norm5_column():
    Wd, _ = L.demodulate(np.array([[3.0], [4.0]]))
    assert np.linalg.norm(Wd) == pytest.approx(1.0, abs=1e-6)


def test_demodulate_zero_column_stays_zero():
    W = np.zeros((4, 2))
    W[:, 1] = 1.0
    Wd, _ = L.demodulate(W)
    assert np.all(Wd[:, 0] == 0)
    assert np.all(np.isfinite(Wd))


def test_demodulate_random_column_norms_and_oracle():
    rng = np.random.default_rng(2)
    W = rng.standard_normal((8, 3))
    Wd, _ = L.demodulate(W)
    np.testing.assert_allclose(np.linalg.norm(Wd, axis=0), 1.0, atol=1e-6)
    for j in range(3):
        nrm = math.sqrt(sum(W[i, j] ** 2 for i in range(8)))
        np.testing.assert_allclose(Wd[:, j], W[:, j] / (nrm + 1e-8), rtol=0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(1e-3, 1e3))
def test_demodulate_rescale_invariance_exact_without_eps(seed, c):
    rng = np.random.default_rng(seed)
    W, s = rng.standard_normal((6, 4)), rng.uniform(0.1, 2.0, 6)
    a, _ = L.demodulate(L.modulate(W, s), eps=0.0)
    b, _ = L.demodulate(L.modulate(W, c * s), eps=0.0)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(1e-3, 1e3))
def test_demodulate_rescale_deviation_bounded_by_eps(seed, c):
    # with eps > 0 the two results differ by eps*|c-1| / (c*n) per column norm
    rng = np.random.default_rng(seed)
    W, s = rng.standard_normal((6, 4)), rng.uniform(0.1, 2.0, 6)
    Wm = L.modulate(W, s)
    a, nrm = L.demodulate(Wm)
    b, _ = L.demodulate(L.modulate(W, c * s))
    diff = np.linalg.norm(a - b, axis=0)
    bound = 1e-8 * abs(c - 1) / (c * nrm)
    assert np.all(diff <= bound * (1 + 1e-6) + 1e-15)


# ------------------------------------------------------------------ toRGB


def test_torgb_zero_features_zero_bias():
    rng = np.random.default_rng(0)
    p = {"W": rng.standard_normal((5, 3)), "Ws": rng.standard_normal((4, 5)), "b": np.zeros(3)}
    y, _ = L.torgb_forward(np.zeros((7, 5)), rng.standard_normal(4), p)
    assert np.all(y == 0)


def test_torgb_unit_style_is_column_normalized_map():
    rng = np.random.default_rng(1)
    W = rng.standard_normal((5, 3))
    p = {"W": W, "Ws": np.zeros((4, 5)), "b": rng.standard_normal(3)}
    x = rng.standard_normal((6, 5))
    y, _ = L.torgb_forward(x, rng.standard_normal(4), p)
    np.testing.assert_allclose(y, x @ (W / (np.linalg.norm(W, axis=0) + 1e-8)) + p["b"], rtol=0, atol=1e-12)


def test_torgb_compose_oracle():
    rng = np.random.default_rng(2)
    p = {"W": rng.standard_normal((5, 3)), "Ws": rng.standard_normal((4, 5)), "b": rng.standard_normal(3)}
    x, w = rng.standard_normal((9, 5)), rng.standard_normal(4)
    s = w @ p["Ws"] + 1.0
    Wm = p["W"] * s[:, None]
    Wd = Wm / (np.sqrt((Wm ** 2).sum(axis=0)) + 1e-8)
    np.testing.assert_allclose(L.torgb_forward(x, w, p)[0], x @ Wd + p["b"], rtol=0, atol=1e-10)


# ------------------------------------------------------------------ finite checks / gradients


def test_check_finite_raises():
    with pytest.raises(L.NumericError, match="here"):
        L.check_finite(np.array([1.0, np.nan]), "here")


def test_sigmoid_matches_logistic():
    x = np.linspace(-30, 30, 101)
    np.testing.assert_allclose(L.sigmoid(x), 1 / (1 + np.exp(-x)), rtol=0, atol=1e-15)


@pytest.mark.parametrize("op", ["adain", "attention", "modulate_demodulate"])
def test_gradcheck_examples_tight(op):
    assert grad_check(op, seed=0) < 1e-5


@pytest.mark.parametrize("op", sorted(REGISTRY))
@pytest.mark.parametrize("seed", [0, 1])
def test_gradcheck_all_ops(op, seed):
    assert grad_check(op, seed=seed) < TOLERANCE


def test_gradcheck_unknown_op():
    with pytest.raises(KeyError):
        grad_check("nope")


def test_gradcheck_detects_corrupted_backward():
    good = REGISTRY["adain"]

    def corrupted(rng):
        inst = good(rng)
        inner = inst.backward
        inst.backward = lambda p, cot: {k: (1.5 * v if k == "x" else v) for k, v in inner(p, cot).items()}
        return inst

    assert grad_check("adain", registry={"adain": corrupted}) > 1e-2
