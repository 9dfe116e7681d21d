"""Fully convolutional scanpath regressor.

A VGG-style backbone (blocks of 3x3 conv + ReLU followed by 2x2 max
pooling) feeds a readout convolution whose kernel covers the whole final
feature map, so the output is ``2 * scanpath_len`` channels at 1x1.
Channels are read as ``x0, y0, x1, y1, ...`` in normalized image units.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .core import Scanpath


@dataclass(frozen=True)
class ModelConfig:
    input_size: tuple = (64, 64, 3)
    blocks: tuple = ((2, 16), (2, 32), (2, 64))
    scanpath_len: int = 8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_size", tuple(int(v) for v in self.input_size))
        object.__setattr__(self, "blocks", tuple((int(n), int(c)) for n, c in self.blocks))
        if len(self.input_size) != 3 or min(self.input_size) < 1:
            raise ValueError("input_size must be (height, width, channels) with positive dims")
        if self.scanpath_len < 1:
            raise ValueError("scanpath_len must be positive")
        if any(n < 1 or c < 1 for n, c in self.blocks):
            raise ValueError("each block needs >= 1 conv layer and >= 1 channel")

    @property
    def feature_size(self) -> tuple[int, int]:
        """Spatial size of the backbone output; raises if a pool cannot apply."""
        h, w = self.input_size[:2]
        for _ in self.blocks:
            if h % 2 or w % 2:
                raise ValueError(f"feature map {h}x{w} cannot be 2x2-pooled")
            h, w = h // 2, w // 2
        if h < 1 or w < 1:
            raise ValueError("blocks reduce spatial dims below 1")
        return h, w

    def to_json(self) -> dict:
        d = asdict(self)
        d["input_size"] = list(self.input_size)
        d["blocks"] = [list(b) for b in self.blocks]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ModelConfig":
        known = {k: d[k] for k in ("input_size", "blocks", "scanpath_len", "seed") if k in d}
        return cls(**known)


@dataclass(frozen=True)
class PredictedScanpath:
    points: np.ndarray
    clamped: np.ndarray

    def to_scanpath(self, image_id="", width=1, height=1) -> Scanpath:
        return Scanpath.from_points(self.clamped, image_id, width, height)


@dataclass
class Model:
    config: ModelConfig
    layers: list  # ConvParams; the last one is the readout

    @property
    def params(self) -> list[np.ndarray]:
        """Flat ``[w0, b0, w1, b1, ...]`` view used by the optimizer."""
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> "Model":
        return Model(self.config, [T.ConvParams(l.weight.copy(), l.bias.copy(), l.stride,
                                                l.padding) for l in self.layers])

    def save(self, path) -> None:
        T.save_layers(self.layers, path, {"architecture": "fcn-scanpath",
                                          "model": self.config.to_json()})

    @classmethod
    def load(cls, path) -> "Model":
        with open(T.sidecar_path(path), encoding="utf-8") as fh:
            meta = json.load(fh)
        model = build(ModelConfig.from_json(meta["model"]))
        arrays = T.load_layers(path)
        if len(arrays) != len(model.layers):
            raise ValueError(f"{path}: layer count does not match architecture sidecar")
        for layer, (w, b) in zip(model.layers, arrays):
            if w.shape != layer.weight.shape:
                raise ValueError(f"{path}: layer shape {w.shape} != {layer.weight.shape}")
            layer.weight[...] = w
            layer.bias[...] = b
        return model


def _he_uniform(rng, shape):
    fan_in = shape[1] * shape[2] * shape[3]
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def build(config: ModelConfig) -> Model:
    fh, fw = config.feature_size
    rng = np.random.default_rng(config.seed % 2**64)
    layers = []
    in_ch = config.input_size[2]
    for n_conv, width in config.blocks:
        for _ in range(n_conv):
            shape = (width, in_ch, 3, 3)
            layers.append(T.ConvParams(_he_uniform(rng, shape), np.zeros(width), 1, 1))
            in_ch = width
    out_ch = 2 * config.scanpath_len
    shape = (out_ch, in_ch, fh, fw)
    layers.append(T.ConvParams(_he_uniform(rng, shape), np.zeros(out_ch), 1, 0))
    return Model(config, layers)


def _check_input(model: Model, image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        image = image[None]
    h, w, c = model.config.input_size
    if image.shape[1:] != (c, h, w):
        raise ValueError(f"image shape {image.shape} does not match model input (N, {c}, {h}, {w})")
    return image


def forward(model: Model, image: np.ndarray):
    """Run the network; returns ``(output (N, 2L), cache)``."""
    x = _check_input(model, image)
    cache = []
    layer_iter = iter(model.layers[:-1])
    for n_conv, _ in model.config.blocks:
        for _ in range(n_conv):
            layer = next(layer_iter)
            z = T.conv2d_forward(x, layer)
            cache.append(("conv", x, layer))
            cache.append(("relu", z))
            x = T.relu(z)
        x, idx = T.maxpool2x2(x)
        cache.append(("pool", idx))
    readout = model.layers[-1]
    out = T.conv2d_forward(x, readout)
    cache.append(("conv", x, readout))
    T.check_finite(out, "model output")
    return out.reshape(out.shape[0], -1), cache


def backward(model: Model, cache, grad_out: np.ndarray) -> list[np.ndarray]:
    """Backpropagate ``d loss / d output``; returns grads aligned with ``model.params``."""
    g = grad_out.reshape(grad_out.shape[0], -1, 1, 1)
    grads = []
    for entry in reversed(cache):
        kind = entry[0]
        if kind == "conv":
            _, x, layer = entry
            g, gw, gb = T.conv2d_backward(x, layer, g)
            grads.append((gw, gb))
        elif kind == "relu":
            g = T.relu_backward(entry[1], g)
        else:
            g = T.maxpool_backward(entry[1], g)
    T.check_finite(g, "input gradient")
    flat = []
    for gw, gb in reversed(grads):
        flat += [gw, gb]
    return flat


def predict(model: Model, image: np.ndarray) -> PredictedScanpath:
    out, _ = forward(model, image)
    if out.shape[0] != 1:
        raise ValueError("predict takes a single image")
    points = out[0].reshape(model.config.scanpath_len, 2)
    return PredictedScanpath(points, np.clip(points, 0.0, 1.0))


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over every coordinate, and its gradient."""
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def loss_and_grads(model: Model, image: np.ndarray, target: Scanpath):
    """MSE between the unclamped prediction and a fixed-length target."""
    if len(target) != model.config.scanpath_len:
        raise ValueError(f"target has {len(target)} fixations, model predicts "
                         f"{model.config.scanpath_len}")
    out, cache = forward(model, image)
    loss, g = mse_loss(out, target.xy.reshape(1, -1))
    return loss, backward(model, cache, g)
