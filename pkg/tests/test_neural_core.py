import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from actscore.neural_core import (
    AdamState,
    adam_step,
    finite_diff_check,
    gru_backward,
    gru_forward,
    init_gru,
    init_mlp,
    init_slp,
    mlp_backward,
    mlp_forward,
    sigmoid,
    slp_backward,
    slp_forward,
)


def _scalar_sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def reference_gru(params, x, h0):
    """Straight-line, one-sample-at-a-time GRU used as an independent oracle."""
    B, T, _ = x.shape
    layers = h0.shape[0]
    out = []
    inp = x
    for layer in range(layers):
        p = {k.split(".")[1]: v for k, v in params.items() if k.startswith(f"gru{layer}.")}
        H = p["U_z"].shape[1]
        hs = np.zeros((B, T, H))
        for b in range(B):
            h = h0[layer, b].copy()
            for t in range(T):
                xt = inp[b, t]
                z = _scalar_sigmoid(p["W_z"][b] @ xt + p["U_z"][b] @ h + p["b_z"][b])
                r = _scalar_sigmoid(p["W_r"][b] @ xt + p["U_r"][b] @ h + p["b_r"][b])
                hc = np.tanh(p["W_h"][b] @ xt + p["U_h"][b] @ (r * h) + p["b_h"][b])
                h = (1 - z) * h + z * hc
                hs[b, t] = h
        out.append(hs)
        inp = hs
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_sigmoid_matches_logistic():
    a = np.linspace(-30, 30, 101)
    np.testing.assert_allclose(sigmoid(a), _scalar_sigmoid(a), rtol=1e-14, atol=1e-300)


def test_zero_weights_give_zero_states(rng):
    params = {k: np.zeros_like(v) for k, v in init_gru(rng, 3, 30, 15, 2).items()}
    x = rng.random((3, 6, 30))
    states, _ = gru_forward(params, x, np.zeros((2, 3, 15)))
    assert all(np.all(s == 0.0) for s in states)


def test_single_step_gives_one_state_per_layer(rng):
    params = init_gru(rng, 1, 30, 15, 2)
    states, _ = gru_forward(params, rng.random((1, 1, 30)), np.zeros((2, 1, 15)))
    assert [s.shape for s in states] == [(1, 1, 15), (1, 1, 15)]


def test_forward_matches_straight_line_reference(rng):
    params = init_gru(rng, 4, 30, 15, 2)
    x = rng.random((4, 7, 30))
    h0 = rng.normal(0, 0.5, (2, 4, 15))
    states, _ = gru_forward(params, x, h0)
    ref = reference_gru(params, x, h0)
    for a, b in zip(states, ref):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_forward_rejects_shape_mismatch(rng):
    params = init_gru(rng, 2, 30, 15, 2)
    with pytest.raises(ValueError):
        gru_forward(params, rng.random((2, 3, 29)), np.zeros((2, 2, 15)))
    with pytest.raises(ValueError):
        gru_forward(params, rng.random((2, 3, 30)), np.zeros((1, 2, 15)))
    with pytest.raises(ValueError):
        gru_forward(params, np.zeros((2, 0, 30)), np.zeros((2, 2, 15)))


def test_forward_is_deterministic(rng):
    params = init_gru(rng, 2, 30, 15, 2)
    x = rng.random((2, 5, 30))
    a, _ = gru_forward(params, x, np.zeros((2, 2, 15)))
    b, _ = gru_forward(params, x, np.zeros((2, 2, 15)))
    assert all(np.array_equal(p, q) for p, q in zip(a, b))


def test_zero_upstream_gives_zero_gradients(rng):
    params = init_gru(rng, 2, 30, 15, 2)
    states, cache = gru_forward(params, rng.random((2, 4, 30)), np.zeros((2, 2, 15)))
    grads, dh0 = gru_backward(cache, np.zeros_like(states[-1]))
    assert all(np.all(g == 0) for g in grads.values())
    assert np.all(dh0 == 0)


def test_single_step_single_layer_gradients_match_hand_formulas(rng):
    D, H = 4, 3
    params = init_gru(rng, 1, D, H, 1)
    x = rng.random((1, 1, D))
    h0 = rng.normal(size=(1, 1, H))
    up = rng.normal(size=(1, 1, H))
    _, cache = gru_forward(params, x, h0)
    grads, dh0 = gru_backward(cache, up)

    p = {k.split(".")[1]: v[0] for k, v in params.items()}
    xv, h, g = x[0, 0], h0[0, 0], up[0, 0]
    z = _scalar_sigmoid(p["W_z"] @ xv + p["U_z"] @ h + p["b_z"])
    r = _scalar_sigmoid(p["W_r"] @ xv + p["U_r"] @ h + p["b_r"])
    hc = np.tanh(p["W_h"] @ xv + p["U_h"] @ (r * h) + p["b_h"])
    # h' = (1-z) h + z hc
    d_hc = g * z
    d_z = g * (hc - h)
    d_ah = d_hc * (1 - hc**2)
    d_az = d_z * z * (1 - z)
    d_rh = p["U_h"].T @ d_ah
    d_ar = d_rh * h * r * (1 - r)
    expected = {
        "W_z": np.outer(d_az, xv), "U_z": np.outer(d_az, h), "b_z": d_az,
        "W_r": np.outer(d_ar, xv), "U_r": np.outer(d_ar, h), "b_r": d_ar,
        "W_h": np.outer(d_ah, xv), "U_h": np.outer(d_ah, r * h), "b_h": d_ah,
    }
    for name, value in expected.items():
        np.testing.assert_allclose(grads[f"gru0.{name}"][0], value, rtol=1e-12, atol=1e-14)
    d_h = g * (1 - z) + d_rh * r + p["U_z"].T @ d_az + p["U_r"].T @ d_ar
    np.testing.assert_allclose(dh0[0, 0], d_h, rtol=1e-12, atol=1e-14)


def _gru_slp_loss(x, h0, up):
    def loss_fn(params):
        states, gc = gru_forward(params, x, h0)
        s, sc = slp_forward(params, states[-1])
        loss = float((s * up).sum())
        g_slp, d_top = slp_backward(sc, up)
        g_gru, _ = gru_backward(gc, d_top)
        return loss, {**g_gru, **g_slp}

    return loss_fn


def test_gru_finite_differences_t5(rng):
    params = {**init_gru(rng, 2, 30, 15, 2), **init_slp(rng, 2, 15)}
    x = rng.random((2, 5, 30))
    h0 = rng.normal(0, 0.3, (2, 2, 15))
    up = rng.normal(size=(2, 5))
    err = finite_diff_check(_gru_slp_loss(x, h0, up), params, 1e-6, max_per_param=30, rng=rng)
    assert err < 1e-6


def test_h0_gradient_matches_finite_differences(rng):
    params = init_gru(rng, 1, 6, 4, 2)
    x = rng.random((1, 3, 6))
    up = rng.normal(size=(1, 3, 4))

    def loss_fn(p):
        states, cache = gru_forward(params, x, p["h0"])
        _, dh0 = gru_backward(cache, up)
        return float((states[-1] * up).sum()), {"h0": dh0}

    err = finite_diff_check(loss_fn, {"h0": rng.normal(size=(2, 1, 4))})
    assert err < 1e-7


def test_slp_zero_params_give_zero():
    params = {"slp.w": np.zeros((1, 15)), "slp.b": np.zeros(1)}
    s, _ = slp_forward(params, np.ones((1, 3, 15)))
    assert np.all(s == 0.0)


def test_slp_saturates():
    params = {"slp.w": np.full((1, 15), 10.0), "slp.b": np.zeros(1)}
    s, cache = slp_forward(params, np.ones((1, 1, 15)))
    assert 1.0 - 1e-12 < s[0, 0] <= 1.0
    grads, dh = slp_backward(cache, np.ones((1, 1)))
    assert np.abs(grads["slp.w"]).max() < 1e-12
    assert np.abs(dh).max() < 1e-12


def test_slp_finite_differences(rng):
    params = init_slp(rng, 3, 15)
    hidden = rng.normal(size=(3, 4, 15))
    up = rng.normal(size=(3, 4))

    def loss_fn(p):
        s, cache = slp_forward(p, hidden)
        return float((s * up).sum()), slp_backward(cache, up)[0]

    assert finite_diff_check(loss_fn, params) < 1e-8


def test_mlp_zero_params_give_zero(rng):
    params = {k: np.zeros_like(v) for k, v in init_mlp(rng, 1).items()}
    s, _ = mlp_forward(params, rng.random((1, 5, 30)))
    assert np.all(s == 0.0)


def test_mlp_shapes_chain(rng):
    params = init_mlp(rng, 2)
    assert params["mlp0.W"].shape == (2, 15, 30)
    assert params["mlp1.W"].shape == (2, 15, 15)
    assert params["mlp2.W"].shape == (2, 1, 15)


def test_mlp_is_stateless(rng):
    params = init_mlp(rng, 1)
    x = rng.random((1, 6, 30))
    perm = rng.permutation(6)
    s, _ = mlp_forward(params, x)
    sp, _ = mlp_forward(params, x[:, perm])
    np.testing.assert_allclose(sp, s[:, perm], rtol=0, atol=1e-15)


def test_mlp_finite_differences(rng):
    params = init_mlp(rng, 2)
    x = rng.random((2, 5, 30))
    up = rng.normal(size=(2, 5))

    def loss_fn(p):
        s, cache = mlp_forward(p, x)
        return float((s * up).sum()), mlp_backward(cache, up)[0]

    assert finite_diff_check(loss_fn, params) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8))
def test_scores_strictly_inside_unit_interval(seed, T):
    rng = np.random.default_rng(seed)
    params = {**init_gru(rng, 2, 30, 15, 2), **init_slp(rng, 2, 15)}
    x = rng.random((2, T, 30))
    states, _ = gru_forward(params, x, np.zeros((2, 2, 15)))
    s, _ = slp_forward(params, states[-1])
    assert np.all(np.isfinite(s)) and np.all(np.abs(s) < 1)


def test_adam_zero_grads_leave_params_unchanged():
    params = {"w": np.array([1.0, -2.0])}
    state = AdamState()
    adam_step(params, {"w": np.zeros(2)}, state, 0.1)
    np.testing.assert_array_equal(params["w"], [1.0, -2.0])
    assert state.t == 1


def test_adam_first_step_moves_against_gradient_sign():
    params = {"w": np.array([0.0, 0.0, 0.0])}
    g = np.array([3.0, -0.5, 1e-3])
    adam_step(params, {"w": g}, AdamState(), 1e-3)
    # t=1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    np.testing.assert_allclose(params["w"], -1e-3 * g / (np.abs(g) + 1e-8), rtol=1e-12)
    assert np.array_equal(np.sign(params["w"]), -np.sign(g))


def test_adam_quadratic_bowl_converges():
    params = {"x": np.array([1.0])}
    state = AdamState()
    for _ in range(2000):
        adam_step(params, {"x": 2 * params["x"]}, state, 0.01)
    assert abs(params["x"][0]) < 0.05


def test_finite_diff_linear_loss_is_exact(rng):
    x = rng.normal(size=(3, 4))
    err = finite_diff_check(lambda p: (float((p["w"] * x).sum()), {"w": x.copy()}), {"w": rng.normal(size=(3, 4))})
    # only central-difference round-off remains
    assert err < 1e-8


def test_finite_diff_detects_wrong_gradient(rng):
    x = rng.normal(size=5)
    err = finite_diff_check(lambda p: (float(p["w"] @ x), {"w": 1.01 * x}), {"w": rng.normal(size=5)})
    assert err > 1e-3
