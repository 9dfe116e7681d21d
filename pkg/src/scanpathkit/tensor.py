"""Dense float64 kernels with hand-written backward passes.

Arrays are plain ``numpy`` arrays laid out as ``(batch, channels, height,
width)``. There is no autodiff graph: callers keep whatever forward
intermediates the backward functions need.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

MAGIC = b"SPLB1"


class NonFiniteError(FloatingPointError):
    pass


def check_finite(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite values in {what}")
    return x


@dataclass
class ConvParams:
    weight: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 4:
            raise ValueError("conv weight must have shape (out_ch, in_ch, kh, kw)")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError("conv bias must have shape (out_ch,)")
        if self.weight.shape[2] < 1 or self.weight.shape[3] < 1:
            raise ValueError("kernel dims must be >= 1")
        if self.stride < 1 or self.padding < 0:
            raise ValueError("stride must be >= 1 and padding >= 0")

    @property
    def shape(self):
        return self.weight.shape


def conv_output_shape(h, w, kh, kw, stride, padding):
    return (h + 2 * padding - kh) // stride + 1, (w + 2 * padding - kw) // stride + 1


def _pad(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Cross-correlation with stride and zero padding."""
    if x.ndim != 4:
        raise ValueError("input must have shape (batch, channels, height, width)")
    out_ch, in_ch, kh, kw = p.weight.shape
    if x.shape[1] != in_ch:
        raise ValueError(f"input has {x.shape[1]} channels, kernel expects {in_ch}")
    ho, wo = conv_output_shape(x.shape[2], x.shape[3], kh, kw, p.stride, p.padding)
    if ho < 1 or wo < 1:
        raise ValueError("convolution output would be empty")
    s = p.stride
    win = sliding_window_view(_pad(x, p.padding), (kh, kw), axis=(2, 3))
    win = win[:, :, : (ho - 1) * s + 1 : s, : (wo - 1) * s + 1 : s]
    # win: (N, C, ho, wo, kh, kw)
    out = np.tensordot(win, p.weight, axes=((1, 4, 5), (1, 2, 3)))
    out = out.transpose(0, 3, 1, 2) + p.bias[None, :, None, None]
    return np.ascontiguousarray(out)


def conv2d_backward(x: np.ndarray, p: ConvParams, upstream: np.ndarray):
    """Return ``(grad_x, grad_w, grad_b)`` for :func:`conv2d_forward`."""
    out_ch, in_ch, kh, kw = p.weight.shape
    ho, wo = conv_output_shape(x.shape[2], x.shape[3], kh, kw, p.stride, p.padding)
    if upstream.shape != (x.shape[0], out_ch, ho, wo):
        raise ValueError(f"upstream gradient shape {upstream.shape} does not match output")
    s, pad = p.stride, p.padding
    xp = _pad(x, pad)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (ho - 1) * s + 1 : s, : (wo - 1) * s + 1 : s]

    grad_b = upstream.sum(axis=(0, 2, 3))
    grad_w = np.tensordot(upstream, win, axes=((0, 2, 3), (0, 2, 3)))  # (O, C, kh, kw)

    cols = np.tensordot(upstream, p.weight, axes=(1, 0))  # (N, ho, wo, C, kh, kw)
    gxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s] += (
                cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    grad_x = gxp[:, :, pad : pad + x.shape[2], pad : pad + x.shape[3]] if pad else gxp
    return grad_x, grad_w, grad_b


def maxpool2x2(x: np.ndarray):
    """2x2 max pooling. Returns ``(pooled, argmax)``; argmax is the in-window
    index 0..3 in raster order, first occurrence on ties."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"max pooling needs even spatial dims, got {h}x{w}")
    win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    pooled = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return pooled, idx


def maxpool_backward(indices: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    n, c, h2, w2 = indices.shape
    if upstream.shape != indices.shape:
        raise ValueError("upstream gradient shape does not match pooled output")
    g = np.zeros((n, c, h2, w2, 4), dtype=np.float64)
    np.put_along_axis(g, indices[..., None], upstream[..., None], axis=-1)
    g = g.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return g.reshape(n, c, 2 * h2, 2 * w2)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    return np.where(x > 0, upstream, 0.0)


# --------------------------------------------------------------------------
# optimizer

@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for g in grads:
        if np.isnan(g).any():
            raise NonFiniteError("NaN in gradients")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError("parameter, gradient and moment shapes must match")

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


# --------------------------------------------------------------------------
# serialization

def save_layers(layers: Sequence[ConvParams], path, config: dict | None = None) -> None:
    """Write the ``SPLB1`` container; a JSON sidecar (``<path>.json``) holds ``config``.

    Layout: magic, uint32 layer count, then per layer four uint32 weight
    dims ``(out, in, kh, kw)``, the weights and the ``out`` biases as
    little-endian float64.
    """
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(layers)))
        for layer in layers:
            fh.write(struct.pack("<4I", *layer.weight.shape))
            fh.write(layer.weight.astype("<f8").tobytes())
            fh.write(layer.bias.astype("<f8").tobytes())
    if config is not None:
        with open(sidecar_path(path), "w", encoding="utf-8") as fh:
            json.dump(config, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_layers(path) -> list[tuple[np.ndarray, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:5] != MAGIC:
        raise ValueError(f"{path}: not an SPLB1 parameter file")
    (count,) = struct.unpack_from("<I", data, 5)
    pos = 9
    out = []
    for _ in range(count):
        shape = struct.unpack_from("<4I", data, pos)
        pos += 16
        nw = int(np.prod(shape))
        w = np.frombuffer(data, "<f8", nw, pos).reshape(shape).astype(np.float64)
        pos += 8 * nw
        b = np.frombuffer(data, "<f8", shape[0], pos).astype(np.float64)
        pos += 8 * shape[0]
        out.append((w, b))
    if pos != len(data):
        raise ValueError(f"{path}: trailing bytes after {count} layers")
    return out


def sidecar_path(path) -> str:
    return str(path) + ".json"
