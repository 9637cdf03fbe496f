"""Network models – activations, layer specs, parameters, autoencoder spec."""
from dataclasses import dataclass
from typing import Literal

import numpy as np

from bfreg.exceptions import ConfigurationError

ActivationTag = Literal["relu", "elu", "tanh", "identity"]


@dataclass(frozen=True)
class ActivationKind:
    tag: ActivationTag
    alpha: float = 1.0

    def __post_init__(self):
        if self.tag not in ("relu", "elu", "tanh", "identity"):
            raise ConfigurationError(f"unknown activation '{self.tag}'")
        if self.tag == "elu" and not self.alpha > 0:
            raise ConfigurationError(f"ELU alpha must be positive, got {self.alpha}")

    @classmethod
    def relu(cls) -> "ActivationKind":
        return cls("relu")

    @classmethod
    def elu(cls, alpha: float = 1.0) -> "ActivationKind":
        return cls("elu", alpha)

    @classmethod
    def tanh(cls) -> "ActivationKind":
        return cls("tanh")

    @classmethod
    def identity(cls) -> "ActivationKind":
        return cls("identity")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: ActivationKind

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigurationError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")

    @property
    def n_params(self) -> int:
        return self.out_dim * self.in_dim + self.out_dim


def check_chain(specs: list[LayerSpec]) -> None:
    if not specs:
        raise ConfigurationError("a network needs at least one layer")
    for j in range(len(specs) - 1):
        if specs[j].out_dim != specs[j + 1].in_dim:
            raise ConfigurationError(
                f"layer {j} out_dim {specs[j].out_dim} does not match layer {j + 1} in_dim {specs[j + 1].in_dim}"
            )


def layer_offsets(specs: list[LayerSpec]) -> list[tuple[int, int]]:
    """(start, stop) of each layer's block inside the flat parameter vector."""
    offsets = []
    start = 0
    for spec in specs:
        offsets.append((start, start + spec.n_params))
        start += spec.n_params
    return offsets


def param_count(specs: list[LayerSpec]) -> int:
    return sum(spec.n_params for spec in specs)


@dataclass
class NetworkParams:
    """Per-layer (weights[out x in], bias[out]) pairs.

    Flat layout: layers in order, each layer's weights row-major followed by its bias.
    """
    layers: list[tuple[np.ndarray, np.ndarray]]

    def flatten(self) -> np.ndarray:
        parts = []
        for weights, bias in self.layers:
            parts.append(weights.reshape(-1))
            parts.append(bias.reshape(-1))
        return np.concatenate(parts)

    @classmethod
    def unflatten(cls, theta: np.ndarray, specs: list[LayerSpec], copy: bool = True) -> "NetworkParams":
        """Split a flat vector into layers; ``copy=False`` returns views into ``theta``."""
        check_chain(specs)
        theta = np.asarray(theta)
        if theta.ndim != 1 or theta.shape[0] != param_count(specs):
            raise ConfigurationError(
                f"flat parameter vector has length {theta.size}, network needs {param_count(specs)}"
            )
        layers = []
        for spec, (start, stop) in zip(specs, layer_offsets(specs)):
            split = start + spec.out_dim * spec.in_dim
            weights = theta[start:split].reshape(spec.out_dim, spec.in_dim)
            bias = theta[split:stop]
            if copy:
                weights, bias = weights.copy(), bias.copy()
            layers.append((weights, bias))
        return cls(layers)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)


@dataclass(frozen=True)
class AutoencoderSpec:
    encoder: list[LayerSpec]
    decoder: list[LayerSpec]

    def __post_init__(self):
        check_chain(list(self.encoder))
        check_chain(list(self.decoder))
        if self.encoder[-1].out_dim != self.decoder[0].in_dim:
            raise ConfigurationError(
                f"latent mismatch: encoder emits {self.encoder[-1].out_dim}, decoder takes {self.decoder[0].in_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.encoder[0].in_dim

    @property
    def latent_dim(self) -> int:
        return self.encoder[-1].out_dim

    @property
    def undercomplete(self) -> bool:
        return self.latent_dim < self.input_dim

    def layers(self) -> list[LayerSpec]:
        """The composed network trained as one FNN with targets equal to inputs."""
        return list(self.encoder) + list(self.decoder)
