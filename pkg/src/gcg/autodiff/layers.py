"""Layer primitives with hand-written backward passes.

Each layer is a single tape op so an unrolled recurrent model records a few
dozen ops per step rather than hundreds of scalar ones.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from gcg.autodiff.tape import Tensor, as_tensor, emit
from gcg.errors import ConfigError


def affine(W, b, x) -> Tensor:
    """``W @ x + b`` for a vector, or row-wise ``x @ W.T + b`` for a batch."""
    W, b, x = as_tensor(W), as_tensor(b), as_tensor(x)
    if W.value.ndim != 2 or b.value.shape != (W.shape[0],) or x.shape[-1] != W.shape[1]:
        raise ConfigError(f"affine shape mismatch: W{W.shape} b{b.shape} x{x.shape}")
    out = x.value @ W.value.T + b.value

    def backward(g):
        g2 = g.reshape(-1, W.shape[0])
        x2 = x.value.reshape(-1, W.shape[1])
        return g @ W.value, g2.T @ x2, g2.sum(axis=0)

    return emit("affine", (x, W, b), out, backward)


def conv2d(kernels, bias, images, stride: int = 1) -> Tensor:
    """Valid (unpadded) 2D cross-correlation.

    kernels: (F, C, kh, kw); bias: (F,); images: (B, C, H, W) or (C, H, W).
    """
    K, bias, x = as_tensor(kernels), as_tensor(bias), as_tensor(images)
    single = x.value.ndim == 3
    xv = x.value[None] if single else x.value
    if K.value.ndim != 4 or xv.ndim != 4:
        raise ConfigError(f"conv2d expects 4D kernels and images, got {K.shape} and {x.shape}")
    F, C, kh, kw = K.shape
    B, Cx, Hin, Win = xv.shape
    if C != Cx:
        raise ConfigError(f"conv2d channel mismatch: kernels have {C}, images have {Cx}")
    if bias.shape != (F,):
        raise ConfigError(f"conv2d bias shape {bias.shape} != ({F},)")
    if stride < 1:
        raise ConfigError(f"conv2d stride must be >= 1, got {stride}")
    if kh > Hin or kw > Win:
        raise ConfigError(f"conv2d kernel {kh}x{kw} larger than input {Hin}x{Win}")

    cols = sliding_window_view(xv, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    Ho, Wo = cols.shape[2], cols.shape[3]
    out = np.einsum("bchwij,fcij->bfhw", cols, K.value, optimize=True) + bias.value[None, :, None, None]
    if single:
        out = out[0]

    def backward(g):
        g4 = g[None] if single else g
        dK = np.einsum("bfhw,bchwij->fcij", g4, cols, optimize=True)
        db = g4.sum(axis=(0, 2, 3))
        dx = np.zeros_like(xv)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += np.einsum(
                    "bfhw,fc->bchw", g4, K.value[:, :, i, j], optimize=True
                )
        return (dK, db, dx[0] if single else dx)

    return emit("conv2d", (K, bias, x), out, backward)


GATES = 4  # input, forget, output, candidate


def mi_lstm_cell(h, c, x, params: dict, standard: bool = False) -> tuple[Tensor, Tensor]:
    """One step of a multiplicative-integration LSTM.

    Gate pre-activations are ``alpha*(Wx)*(Uh) + beta1*(Wx) + beta2*(Uh) + b``.
    With ``standard=True`` they are the additive ``Wx + Uh + b`` and the
    alpha/beta parameters are neither read nor required.

    ``params`` maps "Wx" (4n, d), "Uh" (4n, n), "b" (4n,) and, for the
    multiplicative form, "alpha", "beta1", "beta2" (4n,) to tensors.
    """
    h, c, x = as_tensor(h), as_tensor(c), as_tensor(x)
    Wx, Uh, b = as_tensor(params["Wx"]), as_tensor(params["Uh"]), as_tensor(params["b"])
    n = h.shape[-1]
    if c.shape != h.shape:
        raise ConfigError(f"lstm h{h.shape} and c{c.shape} must match")
    if Wx.shape != (GATES * n, x.shape[-1]) or Uh.shape != (GATES * n, n) or b.shape != (GATES * n,):
        raise ConfigError(f"lstm parameter shapes do not fit width {n}: Wx{Wx.shape} Uh{Uh.shape} b{b.shape}")
    if standard:
        extra = ()
    else:
        extra = tuple(as_tensor(params[k]) for k in ("alpha", "beta1", "beta2"))
        for t in extra:
            if t.shape != (GATES * n,):
                raise ConfigError(f"lstm multiplicative parameter shape {t.shape} != ({GATES * n},)")

    wx = x.value @ Wx.value.T
    uh = h.value @ Uh.value.T
    if standard:
        pre = wx + uh + b.value
    else:
        alpha, beta1, beta2 = (t.value for t in extra)
        a_uh = alpha * uh + beta1  # d pre / d wx
        pre = wx * a_uh + beta2 * uh + b.value
    # one tanh for all gates: sigmoid(z) = (1 + tanh(z/2)) / 2
    scale = np.ones(GATES * n, dtype=pre.dtype)
    scale[:3 * n] = 0.5
    t = np.tanh(pre * scale)
    gates = 0.5 * t[..., :3 * n] + 0.5
    gi, gf, go = gates[..., :n], gates[..., n:2 * n], gates[..., 2 * n:]
    gg = t[..., 3 * n:]
    c_new = gf * c.value + gi * gg
    tc = np.tanh(c_new)
    h_new = go * tc

    def backward(dh, dc):
        dc_tot = dc + dh * go * (1.0 - tc * tc)
        dpre = np.concatenate(
            [
                dc_tot * gg * gi * (1.0 - gi),
                dc_tot * c.value * gf * (1.0 - gf),
                dh * tc * go * (1.0 - go),
                dc_tot * gi * (1.0 - gg * gg),
            ],
            axis=-1,
        )
        dc_prev = dc_tot * gf
        if standard:
            dwx = duh = dpre
        else:
            dwx = dpre * a_uh
            duh = dpre * (alpha * wx + beta2)
        x2 = x.value.reshape(-1, x.shape[-1])
        h2 = h.value.reshape(-1, n)
        dwx2 = dwx.reshape(-1, GATES * n)
        duh2 = duh.reshape(-1, GATES * n)
        grads = [
            duh @ Uh.value,
            dc_prev,
            dwx @ Wx.value,
            dwx2.T @ x2,
            duh2.T @ h2,
            dpre.reshape(-1, GATES * n).sum(axis=0),
        ]
        if not standard:
            dpre2 = dpre.reshape(-1, GATES * n)
            grads += [
                (dpre2 * (wx * uh).reshape(-1, GATES * n)).sum(axis=0),
                (dpre2 * wx.reshape(-1, GATES * n)).sum(axis=0),
                (dpre2 * uh.reshape(-1, GATES * n)).sum(axis=0),
            ]
        return grads

    return emit("mi_lstm_cell", (h, c, x, Wx, Uh, b) + extra, (h_new, c_new), backward)
