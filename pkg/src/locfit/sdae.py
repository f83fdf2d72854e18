"""Greedy layer-wise stacked denoising autoencoder pretraining.

Each layer trains a one-hidden-layer autoencoder (sigmoid encoder and
decoder, MSE against the clean input) on masking-corrupted inputs, keeps
the encoder half, and feeds its uncorrupted encodings to the next layer.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .nn import (LayerSpec, NadamConfig, NetworkSpec, backward, forward,
                 init_params, mse_grad, mse_loss, nadam_step, sigmoid)


@dataclass(frozen=True)
class SdaeConfig:
    """Pretraining stack shape and schedule."""

    hidden_dims: tuple[int, ...] = (1024, 1024, 1024)
    corruption_level: float = 0.1
    epochs_per_layer: int = 20
    batch_size: int = 64

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if any(d < 1 for d in self.hidden_dims):
            raise DomainError("hidden dims must be >= 1")
        if not 0 <= self.corruption_level <= 1:
            raise DomainError(f"corruption_level must be in [0, 1], got "
                              f"{self.corruption_level}")
        if self.epochs_per_layer < 1 or self.batch_size < 1:
            raise DomainError("epochs_per_layer and batch_size must be >= 1")


@dataclass
class PretrainedLayer:
    """Encoder half of one trained denoising autoencoder."""

    weight: np.ndarray
    bias: np.ndarray
    initial_mse: float
    final_mse: float


def corrupt_input(batch: np.ndarray, level: float, seed) -> np.ndarray:
    """Masking noise: each entry is zeroed independently with probability level."""
    if not 0 <= level <= 1:
        raise DomainError(f"corruption level must be in [0, 1], got {level}")
    batch = np.asarray(batch, dtype=np.float64)
    if level == 0.0:
        return batch.copy()
    rng = np.random.default_rng(seed)
    return np.where(rng.random(batch.shape) < level, 0.0, batch)


def encode(x: np.ndarray, layers: list[PretrainedLayer]) -> np.ndarray:
    """Apply the sigmoid encoder stack to a batch."""
    x = np.asarray(x, dtype=np.float64)
    for layer in layers:
        x = sigmoid(x @ layer.weight.T + layer.bias)
    return x


def _reconstruction_mse(params, spec, x):
    outs, _ = forward(params, spec, x, mode="infer")
    return mse_loss(outs[0], x)


def pretrain_layer(clean_input: np.ndarray, in_dim: int, hidden_dim: int,
                   config: SdaeConfig, seed,
                   nadam: NadamConfig = NadamConfig()) -> PretrainedLayer:
    """Train one denoising autoencoder layer and return its encoder half.

    The decoder reconstructs the clean batch from the corrupted batch;
    reported MSEs are clean-input reconstruction errors before and after.
    """
    clean_input = np.asarray(clean_input, dtype=np.float64)
    if clean_input.ndim != 2 or clean_input.shape[1] != in_dim:
        raise DomainError(f"clean_input shape {clean_input.shape} does not match "
                          f"in_dim {in_dim}")
    rng = np.random.default_rng(seed)
    spec = NetworkSpec(trunk=(), heads=((LayerSpec(in_dim, hidden_dim, "sigmoid"),
                                         LayerSpec(hidden_dim, in_dim, "sigmoid")),))
    params = init_params(spec, rng)
    state = nadam.make_state(params)

    initial_mse = _reconstruction_mse(params, spec, clean_input)
    n = clean_input.shape[0]
    for _ in range(config.epochs_per_layer):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            clean = clean_input[idx]
            noisy = corrupt_input(clean, config.corruption_level, rng)
            outs, trace = forward(params, spec, noisy, mode="train", rng=rng)
            grads = backward(trace, params, spec, [mse_grad(outs[0], clean)])
            nadam_step(params, grads, state)
    final_mse = _reconstruction_mse(params, spec, clean_input)

    enc_w, enc_b = params.layers[0]
    return PretrainedLayer(enc_w, enc_b, initial_mse, final_mse)


def pretrain_stack(clean_input: np.ndarray, config: SdaeConfig, seed,
                   nadam: NadamConfig = NadamConfig()) -> list[PretrainedLayer]:
    """Greedy pretraining of the whole stack, in layer order.

    Layer k trains on the uncorrupted encodings of layers 1..k-1; masking
    noise is applied only at the layer being trained.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(clean_input, dtype=np.float64)
    layers: list[PretrainedLayer] = []
    for hidden_dim in config.hidden_dims:
        layer = pretrain_layer(x, x.shape[1], hidden_dim, config, rng, nadam)
        layers.append(layer)
        x = encode(x, [layer])
    return layers
