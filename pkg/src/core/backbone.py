"""
Backbone Module
Multilayer-perceptron feature extractor f(x; Theta) with explicit
forward/backward passes and a plain SGD update
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

from config import BackboneConfig
from src.errors import NonFiniteGradientError, ShapeMismatchError


@dataclass
class BackboneParams:
    """Per-layer weights (fan_in, fan_out) and biases (fan_out,)"""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str = "tanh"

    @property
    def layer_count(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> 'BackboneParams':
        return BackboneParams([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                              self.activation)

    def arrays(self) -> List[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]"""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            'activation': self.activation,
            'weights': [w.tolist() for w in self.weights],
            'biases': [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BackboneParams':
        weights = [np.asarray(w, dtype=np.float64) for w in data['weights']]
        biases = [np.asarray(b, dtype=np.float64) for b in data['biases']]
        for w, b in zip(weights, biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeMismatchError("Backbone layer shapes are inconsistent")
        return cls(weights, biases, data.get('activation', 'tanh'))


@dataclass
class BackboneGrads:
    """Gradients with the same layout as BackboneParams"""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def arrays(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


@dataclass
class ForwardCache:
    """Layer inputs and pre-activations of one forward pass"""
    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]

    @property
    def batch_size(self) -> int:
        return self.inputs[0].shape[0]


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_derivative(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return 1.0 - np.tanh(z) ** 2
    return np.where(z > 0, 1.0, 0.0)


def init(backbone_config: BackboneConfig) -> BackboneParams:
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases"""
    backbone_config.validate()
    rng = np.random.default_rng(backbone_config.seed)
    dims = backbone_config.layer_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return BackboneParams(weights, biases, backbone_config.activation)


def forward(x: np.ndarray, params: BackboneParams) -> Tuple[np.ndarray, ForwardCache]:
    """Affine + activation layers; the output layer is affine only"""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ShapeMismatchError(f"Backbone expects inputs of dimension {params.input_dim}, got {x.shape}")

    inputs, pre_activations = [], []
    activation = x
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(activation)
        z = activation @ w + b
        pre_activations.append(z)
        activation = z if layer == params.layer_count - 1 else _activate(z, params.activation)
    return activation, ForwardCache(inputs, pre_activations)


def backward(grad_features: np.ndarray, cache: ForwardCache, params: BackboneParams) -> BackboneGrads:
    """Reverse-mode gradients of sum(features * grad_features) with respect to every parameter"""
    delta = np.atleast_2d(np.asarray(grad_features, dtype=np.float64))
    if (len(cache.inputs) != params.layer_count
            or delta.shape != (cache.batch_size, params.output_dim)
            or cache.pre_activations[-1].shape != delta.shape):
        raise ShapeMismatchError("Forward cache does not match these gradients/parameters")

    grad_w = [None] * params.layer_count
    grad_b = [None] * params.layer_count
    for layer in reversed(range(params.layer_count)):
        grad_w[layer] = cache.inputs[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            upstream = delta @ params.weights[layer].T
            delta = upstream * _activation_derivative(cache.pre_activations[layer - 1], params.activation)
    return BackboneGrads(grad_w, grad_b)


def sgd_step(params: BackboneParams, grads: BackboneGrads, learning_rate: float) -> BackboneParams:
    """Gradient ASCENT step: params + learning_rate * grads (grads are of the log-likelihood)"""
    if len(grads.weights) != params.layer_count:
        raise ShapeMismatchError("Gradient layer count does not match parameters")
    for p, g in zip(params.arrays(), grads.arrays()):
        if p.shape != g.shape:
            raise ShapeMismatchError(f"Gradient shape {g.shape} does not match parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError("Refusing to apply a NaN or infinite gradient")

    weights = [w + learning_rate * gw for w, gw in zip(params.weights, grads.weights)]
    biases = [b + learning_rate * gb for b, gb in zip(params.biases, grads.biases)]
    return BackboneParams(weights, biases, params.activation)
