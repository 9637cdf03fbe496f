"""Network operations – activations, initialization, forward pass, MSE loss, backprop."""
import logging
import math
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from pydantic import ValidationError

from bfreg.exceptions import ConfigurationError
from bfreg.modules.linalg import Rng
from bfreg.modules.network.schemas import LayerSpecSchema, ParamDump
from bfreg.modules.network.models import (
    ActivationKind, LayerSpec, NetworkParams, AutoencoderSpec, check_chain,
)

logger = logging.getLogger(__name__)


# ─── Activations ────────────────────────────────────────────────

def activation_eval(kind: ActivationKind, z: float) -> float:
    return float(activate(kind, np.asarray(z, dtype=np.float64)))


def activate(kind: ActivationKind, z: np.ndarray) -> np.ndarray:
    if kind.tag == "relu":
        return np.maximum(z, 0.0)
    if kind.tag == "elu":
        # exp only ever sees the non-positive branch
        return np.where(z > 0, z, kind.alpha * np.expm1(np.minimum(z, 0.0)))
    if kind.tag == "tanh":
        return np.tanh(z)
    return z


def activation_derivative(kind: ActivationKind, z: np.ndarray) -> np.ndarray:
    """Elementwise derivative; ReLU'(0) is taken as 0."""
    if kind.tag == "relu":
        return (z > 0).astype(z.dtype)
    if kind.tag == "elu":
        return np.where(z > 0, 1.0, kind.alpha * np.exp(np.minimum(z, 0.0))).astype(z.dtype)
    if kind.tag == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


# ─── Construction ───────────────────────────────────────────────

def init_params(specs: list[LayerSpec], rng: Rng) -> NetworkParams:
    """Glorot-uniform weights, zero biases."""
    check_chain(specs)
    layers = []
    for spec in specs:
        bound = math.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        weights = rng.generator.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim))
        layers.append((weights, np.zeros(spec.out_dim, dtype=np.float64)))
    return NetworkParams(layers)


def _check_params(params: NetworkParams, specs: list[LayerSpec]) -> None:
    if len(params.layers) != len(specs):
        raise ConfigurationError(f"params have {len(params.layers)} layers, spec has {len(specs)}")
    for j, ((weights, bias), spec) in enumerate(zip(params.layers, specs)):
        if weights.shape != (spec.out_dim, spec.in_dim) or bias.shape != (spec.out_dim,):
            raise ConfigurationError(
                f"layer {j} params have shape {weights.shape}/{bias.shape}, spec wants ({spec.out_dim}, {spec.in_dim})"
            )


def _as_batch(data) -> tuple[np.ndarray, np.ndarray]:
    """Accept (X, Y) arrays or a list of (x, y) pairs."""
    if isinstance(data, tuple) and len(data) == 2 and isinstance(data[0], np.ndarray) and data[0].ndim == 2:
        x, y = data
    else:
        pairs = list(data)
        if not pairs:
            raise ConfigurationError("dataset is empty")
        x = np.stack([np.atleast_1d(np.asarray(p[0])) for p in pairs])
        y = np.stack([np.atleast_1d(np.asarray(p[1])) for p in pairs])
    if x.shape[0] == 0:
        raise ConfigurationError("dataset is empty")
    if x.shape[0] != y.shape[0]:
        raise ConfigurationError(f"dataset has {x.shape[0]} inputs but {y.shape[0]} targets")
    return x, y


# ─── Forward ────────────────────────────────────────────────────

def forward_batch(params: NetworkParams, specs: list[LayerSpec], x: np.ndarray,
                  masks: Sequence[np.ndarray | None] | None = None) -> np.ndarray:
    """Rows of ``x`` are samples. ``masks`` (dropout, already scaled) apply to hidden outputs."""
    if x.ndim != 2 or x.shape[1] != specs[0].in_dim:
        raise ConfigurationError(f"input has shape {x.shape}, network expects (*, {specs[0].in_dim})")
    a = x
    last = len(specs) - 1
    for j, ((weights, bias), spec) in enumerate(zip(params.layers, specs)):
        a = activate(spec.activation, a @ weights.T + bias)
        if masks is not None and j < last and masks[j] is not None:
            a = a * masks[j]
    return a


def forward(params: NetworkParams, specs: list[LayerSpec], x: np.ndarray) -> np.ndarray:
    _check_params(params, specs)
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != specs[0].in_dim:
        raise ConfigurationError(f"input has length {x.size}, network expects {specs[0].in_dim}")
    return forward_batch(params, specs, x[None, :])[0]


def mse_loss(params: NetworkParams, specs: list[LayerSpec], dataset) -> float:
    """(1/N) sum_i ||y_i - f(x_i)||^2."""
    x, y = _as_batch(dataset)
    residual = y - forward_batch(params, specs, x)
    return float(np.sum(residual * residual) / x.shape[0])


# ─── Backprop ───────────────────────────────────────────────────

def backprop(params: NetworkParams, specs: list[LayerSpec], batch,
             masks: Sequence[np.ndarray | None] | None = None) -> np.ndarray:
    """Exact gradient of the batch MSE with respect to the flat parameter vector."""
    x, y = _as_batch(batch)
    n = x.shape[0]
    last = len(specs) - 1

    activations = [x]
    pre_activations = []
    a = x
    for j, ((weights, bias), spec) in enumerate(zip(params.layers, specs)):
        z = a @ weights.T + bias
        a = activate(spec.activation, z)
        if masks is not None and j < last and masks[j] is not None:
            a = a * masks[j]
        pre_activations.append(z)
        activations.append(a)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(specs)
    delta = (2.0 / n) * (activations[-1] - y) * activation_derivative(specs[last].activation, pre_activations[last])
    for j in range(last, -1, -1):
        weights = params.layers[j][0]
        grads[j] = (delta.T @ activations[j], delta.sum(axis=0))
        if j > 0:
            upstream = delta @ weights
            if masks is not None and masks[j - 1] is not None:
                upstream = upstream * masks[j - 1]
            delta = upstream * activation_derivative(specs[j - 1].activation, pre_activations[j - 1])

    return np.concatenate([part for gw, gb in grads for part in (gw.reshape(-1), gb)])


def finite_difference_gradient(fn: Callable[[np.ndarray], float], theta: np.ndarray,
                               h: float = 1e-6) -> np.ndarray:
    """Central differences of ``fn`` at ``theta``, one coordinate at a time.

    Arithmetic follows ``theta``'s dtype; pass a longdouble vector to push
    round-off below the truncation error.
    """
    theta = np.array(theta, copy=True)
    grad = np.zeros(theta.shape[0], dtype=theta.dtype)
    step = theta.dtype.type(h)
    for i in range(theta.shape[0]):
        original = theta[i]
        theta[i] = original + step
        f_plus = fn(theta)
        theta[i] = original - step
        f_minus = fn(theta)
        theta[i] = original
        grad[i] = (f_plus - f_minus) / (2 * step)
    return grad


# ─── Autoencoder ────────────────────────────────────────────────

def autoencode_forward(params: NetworkParams, spec: AutoencoderSpec,
                       x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (latent, reconstruction) for one input vector."""
    layers = spec.layers()
    _check_params(params, layers)
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != spec.input_dim:
        raise ConfigurationError(f"input has length {x.size}, autoencoder expects {spec.input_dim}")
    n_enc = len(spec.encoder)
    encoder = NetworkParams(params.layers[:n_enc])
    decoder = NetworkParams(params.layers[n_enc:])
    latent = forward_batch(encoder, list(spec.encoder), x[None, :])[0]
    reconstruction = forward_batch(decoder, list(spec.decoder), latent[None, :])[0]
    return latent, reconstruction


# ─── Spec builders ──────────────────────────────────────────────

def build_fnn_specs(input_dim: int, hidden: list[int], output_dim: int,
                    activation: ActivationKind, output_activation: ActivationKind) -> list[LayerSpec]:
    dims = [input_dim] + list(hidden) + [output_dim]
    specs = [LayerSpec(dims[j], dims[j + 1], activation) for j in range(len(dims) - 2)]
    specs.append(LayerSpec(dims[-2], dims[-1], output_activation))
    return specs


def build_autoencoder_spec(input_dim: int, encoder_hidden: list[int], decoder_hidden: list[int],
                           activation: ActivationKind, output_activation: ActivationKind) -> AutoencoderSpec:
    """Encoder layers end at the latent width (last encoder entry); decoder ends at ``input_dim``."""
    if not encoder_hidden:
        raise ConfigurationError("autoencoder needs at least one encoder layer")
    enc_dims = [input_dim] + list(encoder_hidden)
    encoder = [LayerSpec(enc_dims[j], enc_dims[j + 1], activation) for j in range(len(enc_dims) - 1)]
    dec_dims = [encoder_hidden[-1]] + list(decoder_hidden) + [input_dim]
    decoder = [LayerSpec(dec_dims[j], dec_dims[j + 1], activation) for j in range(len(dec_dims) - 2)]
    decoder.append(LayerSpec(dec_dims[-2], dec_dims[-1], output_activation))
    spec = AutoencoderSpec(encoder, decoder)
    if not spec.undercomplete:
        logger.warning("autoencoder latent width %s is not below input width %s", spec.latent_dim, input_dim)
    return spec


# ─── Parameter dumps ────────────────────────────────────────────

def dump_params(params: NetworkParams, specs: list[LayerSpec], n_encoder_layers: int | None = None) -> ParamDump:
    _check_params(params, specs)
    return ParamDump(
        spec=[LayerSpecSchema(in_dim=s.in_dim, out_dim=s.out_dim, activation=s.activation.tag,
                              alpha=s.activation.alpha) for s in specs],
        flat_theta=[float(v) for v in params.flatten()],
        n_encoder_layers=n_encoder_layers,
    )


def specs_from_dump(dump: ParamDump) -> list[LayerSpec]:
    return [LayerSpec(s.in_dim, s.out_dim, ActivationKind(s.activation, s.alpha)) for s in dump.spec]


def load_params(path: str | Path) -> tuple[NetworkParams, list[LayerSpec]]:
    """Read a {spec, flat_theta} JSON file."""
    try:
        dump = ParamDump.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigurationError(f"parameter file not found: {path}") from exc
    except ValidationError as exc:
        raise ConfigurationError(f"invalid parameter file {path}: {exc.errors()[0]['msg']}") from exc
    specs = specs_from_dump(dump)
    return NetworkParams.unflatten(np.asarray(dump.flat_theta, dtype=np.float64), specs), specs
