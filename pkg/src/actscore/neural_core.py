"""Small hand-written recurrent engine (numpy, float64).

Every parameter array carries a leading batch axis ``B``: row ``b`` holds the
weights applied to sequence ``b``. The ensemble uses this to run its ten
per-player submodels in one pass; a single model is just ``B == 1``.

GRU cell convention (gate order z, r, h)::

    z  = sigmoid(W_z x + U_z h + b_z)
    r  = sigmoid(W_r x + U_r h + b_r)
    hc = tanh(W_h x + U_h (r * h) + b_h)
    h' = (1 - z) * h + z * hc
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

GATES = ("z", "r", "h")


def sigmoid(x):
    return expit(x)


def _mv(M, v):
    """Batched matrix-vector product: (B, m, n) x (B, n) -> (B, m)."""
    return np.matmul(M, v[..., None])[..., 0]


def _proj(x, W):
    """(B, T, n) x (B, m, n) -> (B, T, m)."""
    return np.matmul(x, W.transpose(0, 2, 1))


# --------------------------------------------------------------------------
# initialization


def _uniform(rng, bound, shape):
    return rng.uniform(-bound, bound, size=shape)


def init_gru(rng: np.random.Generator, batch: int, input_dim: int, hidden: int, layers: int) -> dict:
    params = {}
    for layer in range(layers):
        d_in = input_dim if layer == 0 else hidden
        for g in GATES:
            params[f"gru{layer}.W_{g}"] = _uniform(rng, d_in**-0.5, (batch, hidden, d_in))
            params[f"gru{layer}.U_{g}"] = _uniform(rng, hidden**-0.5, (batch, hidden, hidden))
            params[f"gru{layer}.b_{g}"] = _uniform(rng, hidden**-0.5, (batch, hidden))
    return params


def init_slp(rng: np.random.Generator, batch: int, hidden: int) -> dict:
    return {
        "slp.w": _uniform(rng, hidden**-0.5, (batch, hidden)),
        "slp.b": _uniform(rng, hidden**-0.5, (batch,)),
    }


def init_mlp(rng: np.random.Generator, batch: int, sizes=(30, 15, 15, 1)) -> dict:
    params = {}
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        params[f"mlp{i}.W"] = _uniform(rng, n_in**-0.5, (batch, n_out, n_in))
        params[f"mlp{i}.b"] = _uniform(rng, n_in**-0.5, (batch, n_out))
    return params


def gru_layers(params: dict) -> int:
    return sum(1 for k in params if k.endswith(".W_z"))


def mlp_depth(params: dict) -> int:
    return sum(1 for k in params if k.startswith("mlp") and k.endswith(".W"))


# --------------------------------------------------------------------------
# GRU


def _gru_layer_forward(p: dict, prefix: str, x: np.ndarray, h0: np.ndarray):
    W = {g: p[f"{prefix}.W_{g}"] for g in GATES}
    U_zr = np.concatenate([p[f"{prefix}.U_z"], p[f"{prefix}.U_r"]], axis=1)
    U_h = p[f"{prefix}.U_h"]
    H = U_h.shape[1]
    B, T, _ = x.shape
    if W["z"].shape[0] != B or W["z"].shape[2] != x.shape[2] or h0.shape != (B, H):
        raise ValueError(
            f"{prefix}: shape mismatch x={x.shape} W={W['z'].shape} h0={h0.shape}"
        )
    xz = _proj(x, W["z"]) + p[f"{prefix}.b_z"][:, None]
    xr = _proj(x, W["r"]) + p[f"{prefix}.b_r"][:, None]
    xh = _proj(x, W["h"]) + p[f"{prefix}.b_h"][:, None]

    hs = np.empty((B, T, H))
    zs = np.empty((B, T, H))
    rs = np.empty((B, T, H))
    hcs = np.empty((B, T, H))
    h = h0
    for t in range(T):
        zr = _mv(U_zr, h)
        z = sigmoid(xz[:, t] + zr[:, :H])
        r = sigmoid(xr[:, t] + zr[:, H:])
        hc = np.tanh(xh[:, t] + _mv(U_h, r * h))
        h = h + z * (hc - h)
        zs[:, t], rs[:, t], hcs[:, t], hs[:, t] = z, r, hc, h
    cache = {"x": x, "h0": h0, "hs": hs, "z": zs, "r": rs, "hc": hcs}
    return hs, cache


def _gru_layer_backward(p: dict, prefix: str, cache: dict, dH: np.ndarray):
    x, h0, hs, zs, rs, hcs = (cache[k] for k in ("x", "h0", "hs", "z", "r", "hc"))
    U = {g: p[f"{prefix}.U_{g}"] for g in GATES}
    UT = {g: U[g].transpose(0, 2, 1) for g in GATES}
    B, T, H = hs.shape
    hprev = np.concatenate([h0[:, None], hs[:, :-1]], axis=1)

    daz = np.empty((B, T, H))
    dar = np.empty((B, T, H))
    dah = np.empty((B, T, H))
    dh_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dH[:, t] + dh_next
        z, r, hc, hp = zs[:, t], rs[:, t], hcs[:, t], hprev[:, t]
        a_h = dh * z * (1.0 - hc * hc)
        d_rh = _mv(UT["h"], a_h)
        a_z = dh * (hc - hp) * z * (1.0 - z)
        a_r = d_rh * hp * r * (1.0 - r)
        dh_next = dh * (1.0 - z) + d_rh * r + _mv(UT["z"], a_z) + _mv(UT["r"], a_r)
        daz[:, t], dar[:, t], dah[:, t] = a_z, a_r, a_h

    rh = rs * hprev
    grads = {
        f"{prefix}.W_z": np.matmul(daz.transpose(0, 2, 1), x),
        f"{prefix}.W_r": np.matmul(dar.transpose(0, 2, 1), x),
        f"{prefix}.W_h": np.matmul(dah.transpose(0, 2, 1), x),
        f"{prefix}.U_z": np.matmul(daz.transpose(0, 2, 1), hprev),
        f"{prefix}.U_r": np.matmul(dar.transpose(0, 2, 1), hprev),
        f"{prefix}.U_h": np.matmul(dah.transpose(0, 2, 1), rh),
        f"{prefix}.b_z": daz.sum(1),
        f"{prefix}.b_r": dar.sum(1),
        f"{prefix}.b_h": dah.sum(1),
    }
    dx = (
        np.matmul(daz, p[f"{prefix}.W_z"])
        + np.matmul(dar, p[f"{prefix}.W_r"])
        + np.matmul(dah, p[f"{prefix}.W_h"])
    )
    return grads, dx, dh_next


def gru_forward(params: dict, x: np.ndarray, h0: np.ndarray):
    """Stacked GRU over ``x`` (B, T, D) from ``h0`` (L, B, H).

    Returns the hidden states of every layer, a list of (B, T, H) arrays, and
    a cache for ``gru_backward``. Layer ``l+1`` reads layer ``l``'s states.
    """
    if x.ndim != 3 or x.shape[1] == 0:
        raise ValueError(f"expected a non-empty (B, T, D) input, got {x.shape}")
    layers = gru_layers(params)
    if h0.shape[0] != layers:
        raise ValueError(f"h0 has {h0.shape[0]} layers, params have {layers}")
    states, caches = [], []
    inp = x
    for layer in range(layers):
        hs, c = _gru_layer_forward(params, f"gru{layer}", inp, h0[layer])
        states.append(hs)
        caches.append(c)
        inp = hs
    return states, {"params": params, "layers": caches}


def gru_backward(cache: dict, d_top: np.ndarray):
    """Gradients of all GRU parameters and of h0, given dLoss/d(top-layer states)."""
    params = cache["params"]
    grads = {}
    dh0 = []
    dH = d_top
    for layer in range(len(cache["layers"]) - 1, -1, -1):
        g, dx, dh0_l = _gru_layer_backward(params, f"gru{layer}", cache["layers"][layer], dH)
        grads.update(g)
        dh0.append(dh0_l)
        dH = dx
    return grads, np.stack(dh0[::-1])


# --------------------------------------------------------------------------
# output heads


def slp_forward(params: dict, hidden: np.ndarray):
    """tanh(w . h + b) for every step: hidden (B, T, H) -> scores (B, T)."""
    pre = np.matmul(hidden, params["slp.w"][..., None])[..., 0] + params["slp.b"][:, None]
    s = np.tanh(pre)
    return s, {"hidden": hidden, "s": s, "w": params["slp.w"]}


def slp_backward(cache: dict, d_score: np.ndarray):
    d_pre = d_score * (1.0 - cache["s"] ** 2)
    grads = {
        "slp.w": np.matmul(d_pre[:, None, :], cache["hidden"])[:, 0],
        "slp.b": d_pre.sum(1),
    }
    return grads, d_pre[..., None] * cache["w"][:, None, :]


def mlp_forward(params: dict, x: np.ndarray):
    """Per-action tanh MLP: x (B, T, 30) -> scores (B, T). No state between steps."""
    acts = [x]
    a = x
    for i in range(mlp_depth(params)):
        a = np.tanh(_proj(a, params[f"mlp{i}.W"]) + params[f"mlp{i}.b"][:, None])
        acts.append(a)
    return a[..., 0], {"params": params, "acts": acts}


def mlp_backward(cache: dict, d_score: np.ndarray):
    params, acts = cache["params"], cache["acts"]
    grads = {}
    d_out = d_score[..., None]
    for i in range(mlp_depth(params) - 1, -1, -1):
        d_pre = d_out * (1.0 - acts[i + 1] ** 2)
        grads[f"mlp{i}.W"] = np.matmul(d_pre.transpose(0, 2, 1), acts[i])
        grads[f"mlp{i}.b"] = d_pre.sum(1)
        d_out = np.matmul(d_pre, params[f"mlp{i}.W"])
    return grads, d_out


# --------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> None:
    """In-place Adam update with bias correction. Elementwise, so stacked
    parameter rows behave as independent optimizers."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# --------------------------------------------------------------------------
# gradient checking


def finite_diff_check(
    loss_fn: Callable[[dict], tuple[float, dict]],
    params: dict,
    eps: float = 1e-6,
    max_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Worst relative gradient error over the named parameters.

    ``loss_fn(params) -> (loss, grads)``. Each probed coordinate gets a central
    difference; per parameter the error is ``|g_a - g_n| / max(1e-12, |g_a| + |g_n|)``
    with ``|.|`` the Euclidean norm over the probed coordinates. Element-wise
    ratios are meaningless below roughly 1e-4 because central differences carry
    ~1e-9 absolute roundoff in float64. With ``max_per_param`` only that many
    random coordinates of each array are probed.
    """
    _, analytic = loss_fn(params)
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for name, p in params.items():
        if not p.flags.c_contiguous:
            raise ValueError(f"{name} must be C-contiguous to be perturbed in place")
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            idx = rng.choice(flat.size, size=max_per_param, replace=False)
        ga = np.asarray(analytic[name]).reshape(-1)[idx]
        gn = np.empty(len(idx))
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn(params)[0]
            flat[i] = orig - eps
            down = loss_fn(params)[0]
            flat[i] = orig
            gn[j] = (up - down) / (2 * eps)
        err = np.linalg.norm(ga - gn) / max(1e-12, np.linalg.norm(ga) + np.linalg.norm(gn))
        worst = max(worst, float(err))
    return worst
