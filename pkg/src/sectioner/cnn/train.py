"""Training loop: Adam, mini-batches, early stopping on validation loss."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from sectioner.cnn import layers
from sectioner.cnn.bundle import SectionModelBundle
from sectioner.cnn.model import CnnArchitecture, SectionCnn
from sectioner.errors import DegenerateLabels
from sectioner.imaging import SectionImage


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 5
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")


class Adam:
    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.config = config
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.config
        self.t += 1
        bias1 = 1.0 - c.beta1**self.t
        bias2 = 1.0 - c.beta2**self.t
        for k, w in params.items():
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * (g * g)
            m_hat = self.m[k] / bias1
            v_hat = self.v[k] / bias2
            w -= (c.learning_rate * m_hat / (np.sqrt(v_hat) + c.eps)).astype(w.dtype)


def images_to_batch(images: np.ndarray, dtype=np.float32) -> np.ndarray:
    """uint8 (N, 64, 64) pixels -> normalized (N, 1, 64, 64) floats."""
    dt = np.dtype(dtype)
    arr = np.asarray(images)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    return (arr.astype(dt) / dt.type(255.0))[:, None, :, :]


def _check_labels(y: np.ndarray, split: str) -> None:
    if len(np.unique(y)) < 2:
        warnings.warn(f"{split} split contains a single class", DegenerateLabels)


def validation_loss(model: SectionCnn, x: np.ndarray, y: np.ndarray) -> float:
    z, _ = model.forward_logits(x, training=False)
    return layers.bce_loss_from_logits(z, np.asarray(y, dtype=model.dtype))


def train_section_cnn(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    config: TrainConfig,
    *,
    arch: CnnArchitecture | None = None,
    section_name: str = "",
    dtype=np.float32,
) -> SectionModelBundle:
    """Train one section classifier; returns the best-validation weights.

    Inputs are normalized image batches (N, 1, H, W) with labels in {0, 1}.
    Given equal seeds and data the whole weight trajectory is bit-identical.
    """
    if x_train.shape[0] < 1 or x_val.shape[0] < 1:
        raise ValueError("train and validation splits must be non-empty")
    arch = arch or CnnArchitecture()
    y_train = np.asarray(y_train, dtype=dtype)
    y_val = np.asarray(y_val, dtype=dtype)
    _check_labels(y_train, "train")
    _check_labels(y_val, "validation")

    rng = np.random.default_rng(config.rng_seed)
    model = SectionCnn.initialize(arch, rng, dtype=dtype)
    optimizer = Adam(model.params, config)

    best_loss = np.inf
    best_params = model.copy_params()
    epochs_without_improvement = 0
    epochs_run = 0
    n = x_train.shape[0]
    for _epoch in range(config.max_epochs):
        epochs_run += 1
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = model.loss_and_grads(x_train[idx], y_train[idx], training=True, rng=rng)
            optimizer.step(model.params, grads)
        val_loss = validation_loss(model, x_val, y_val)
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = model.copy_params()
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= config.patience:
                break

    model.load_params(best_params)
    return SectionModelBundle(
        section_name=section_name,
        model=model,
        epochs_run=epochs_run,
        best_val_loss=float(best_loss),
        seed=config.rng_seed,
    )


def score_images(bundle: SectionModelBundle, images: np.ndarray) -> np.ndarray:
    """Inference-mode probabilities for uint8 (N, 64, 64) pixel arrays."""
    batch = images_to_batch(images, dtype=bundle.model.dtype)
    return bundle.model.forward(batch, training=False)


def score_section(bundle: SectionModelBundle, image: SectionImage) -> float:
    """Malware probability for a single section image."""
    return float(score_images(bundle, image.pixels[None, :, :])[0])
