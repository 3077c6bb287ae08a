"""Per-section CNN: stacked conv blocks, dropout, single-logit head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sectioner.cnn import layers
from sectioner.errors import NumericalInstability, ShapeMismatch


@dataclass(frozen=True)
class CnnArchitecture:
    """Conv blocks are (3x3 same conv -> ReLU -> 2x2 maxpool) each."""

    input_shape: tuple[int, int, int] = (1, 64, 64)
    conv_channels: tuple[int, ...] = (16, 32, 64)
    kernel_size: int = 3
    pool_size: int = 2
    dropout_rate: float = 0.2
    normalize_input: bool = True

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        if self.kernel_size != 3 or self.pool_size != 2:
            raise ValueError("only 3x3 kernels with 2x2 pooling are supported")
        c, h, w = self.input_shape
        shrink = 2 ** len(self.conv_channels)
        if h % shrink or w % shrink:
            raise ValueError(f"input {h}x{w} not divisible by {shrink}")

    @property
    def flat_dim(self) -> int:
        _, h, w = self.input_shape
        shrink = 2 ** len(self.conv_channels)
        return self.conv_channels[-1] * (h // shrink) * (w // shrink)

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "conv_channels": list(self.conv_channels),
            "kernel_size": self.kernel_size,
            "pool_size": self.pool_size,
            "dropout_rate": self.dropout_rate,
            "normalize_input": self.normalize_input,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CnnArchitecture":
        return cls(
            input_shape=tuple(d["input_shape"]),
            conv_channels=tuple(d["conv_channels"]),
            kernel_size=d["kernel_size"],
            pool_size=d["pool_size"],
            dropout_rate=d["dropout_rate"],
            normalize_input=d["normalize_input"],
        )


def parameter_order(arch: CnnArchitecture) -> list[str]:
    names = []
    for i in range(len(arch.conv_channels)):
        names += [f"conv{i + 1}.weight", f"conv{i + 1}.bias"]
    names += ["dense.weight", "dense.bias"]
    return names


class SectionCnn:
    """Weights plus forward/backward for one section classifier."""

    def __init__(self, arch: CnnArchitecture, params: dict[str, np.ndarray]):
        self.arch = arch
        self.params = params
        expected = parameter_order(arch)
        if list(params.keys()) != expected:
            raise ShapeMismatch(f"parameter set {list(params)} != {expected}")
        self.dtype = params["dense.weight"].dtype

    @classmethod
    def initialize(cls, arch: CnnArchitecture, rng: np.random.Generator, dtype=np.float32) -> "SectionCnn":
        """He-uniform weights, zero biases."""
        params: dict[str, np.ndarray] = {}
        c_in = arch.input_shape[0]
        for i, c_out in enumerate(arch.conv_channels):
            fan_in = c_in * 9
            limit = np.sqrt(6.0 / fan_in)
            params[f"conv{i + 1}.weight"] = rng.uniform(-limit, limit, size=(c_out, c_in, 3, 3)).astype(dtype)
            params[f"conv{i + 1}.bias"] = np.zeros(c_out, dtype=dtype)
            c_in = c_out
        limit = np.sqrt(6.0 / arch.flat_dim)
        params["dense.weight"] = rng.uniform(-limit, limit, size=(arch.flat_dim, 1)).astype(dtype)
        params["dense.bias"] = np.zeros(1, dtype=dtype)
        return cls(arch, params)

    @classmethod
    def zeros(cls, arch: CnnArchitecture, dtype=np.float32) -> "SectionCnn":
        rng = np.random.default_rng(0)
        model = cls.initialize(arch, rng, dtype=dtype)
        for v in model.params.values():
            v[...] = 0
        return model

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 4 or x.shape[1:] != self.arch.input_shape:
            raise ShapeMismatch(f"batch shape {x.shape} != (N, {self.arch.input_shape})")
        if x.shape[0] < 1:
            raise ShapeMismatch("batch must be non-empty")

    def forward_logits(self, x: np.ndarray, *, training: bool = False, rng: np.random.Generator | None = None):
        """Returns (logits, caches).  Dropout is active only in training."""
        self._check_input(x)
        x = x.astype(self.dtype, copy=False)
        caches = []
        h = x
        for i in range(len(self.arch.conv_channels)):
            w = self.params[f"conv{i + 1}.weight"]
            b = self.params[f"conv{i + 1}.bias"]
            h, c_conv = layers.conv3x3_forward(h, w, b)
            h, c_relu = layers.relu_forward(h)
            h, c_pool = layers.maxpool2_forward(h)
            caches.append((c_conv, c_relu, c_pool))
        flat = h.reshape(h.shape[0], -1)
        dropped, c_drop = layers.dropout_forward(flat, self.arch.dropout_rate, rng, training)
        z, c_dense = layers.dense_forward(dropped, self.params["dense.weight"], self.params["dense.bias"])
        return z[:, 0], (caches, c_drop, c_dense, h.shape)

    def forward(self, x: np.ndarray, *, training: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        """Probability of the malware class for each image in the batch."""
        z, _ = self.forward_logits(x, training=training, rng=rng)
        return layers.sigmoid(z)

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray, *, training: bool = True,
                       rng: np.random.Generator | None = None):
        """Mean BCE loss and gradients for every parameter tensor."""
        y = np.asarray(y, dtype=self.dtype)
        z, (caches, c_drop, c_dense, conv_shape) = self.forward_logits(x, training=training, rng=rng)
        p = layers.sigmoid(z)
        loss = layers.bce_loss_from_logits(z, y)
        dz = layers.bce_grad_from_probs(p, y)[:, None].astype(self.dtype)

        grads: dict[str, np.ndarray] = {}
        dflat, grads["dense.weight"], grads["dense.bias"] = layers.dense_backward(dz, c_dense)
        dflat = layers.dropout_backward(dflat, c_drop)
        dh = dflat.reshape(conv_shape)
        for i in reversed(range(len(self.arch.conv_channels))):
            c_conv, c_relu, c_pool = caches[i]
            dh = layers.maxpool2_backward(dh, c_pool)
            dh = layers.relu_backward(dh, c_relu)
            dh, grads[f"conv{i + 1}.weight"], grads[f"conv{i + 1}.bias"] = layers.conv3x3_backward(dh, c_conv)

        if not np.isfinite(loss):
            raise NumericalInstability("non-finite training loss")
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericalInstability(f"non-finite gradient in {name}")
        return loss, {name: grads[name] for name in parameter_order(self.arch)}

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        for k in self.params:
            self.params[k][...] = params[k]
