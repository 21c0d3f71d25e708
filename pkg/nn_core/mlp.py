"""Forward and backward passes of the rectifier MLP with a softmax head."""

from dataclasses import dataclass

import numpy as np

from cohortdp.exceptions import LayoutError

from .params import Gradient


@dataclass(frozen=True)
class Batch:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or labels.ndim != 1 or features.shape[0] != labels.shape[0]:
            raise LayoutError(
                f'batch of {features.shape} features and {labels.shape} labels'
            )
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    def __len__(self):
        return self.labels.shape[0]


def _check_width(params, features):
    if features.ndim != 2 or features.shape[1] != params.shapes.input_width:
        raise LayoutError(
            f'features of shape {features.shape} for input width {params.shapes.input_width}'
        )


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cache(params, features):
    # activations[i] is the input of layer i; last entry holds the logits
    activations = [features]
    layers = params.layers()
    h = features
    for i, (W, b) in enumerate(layers):
        z = h @ W + b
        h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
        activations.append(h)
    return activations


def forward(params, features):
    features = np.asarray(features, dtype=np.float64)
    _check_width(params, features)
    return softmax(_forward_cache(params, features)[-1])


def predict(params, features):
    return np.argmax(forward(params, features), axis=1)


def xent_loss(probs, labels):
    """Mean negative log-likelihood of the true classes."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.shape[0] != labels.shape[0]:
        raise LayoutError(f'{probs.shape[0]} probability rows for {labels.shape[0]} labels')
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise LayoutError(f'labels outside 0..{probs.shape[1] - 1}')
    if labels.size == 0:
        return 0.0
    picked = probs[np.arange(labels.shape[0]), labels]
    return float(-np.mean(np.log(np.maximum(picked, np.finfo(np.float64).tiny))))


def backward(params, batch):
    """Exact gradient of the mean cross-entropy over the batch, and the loss."""
    _check_width(params, batch.features)
    n = len(batch)
    activations = _forward_cache(params, batch.features)
    probs = softmax(activations[-1])
    loss = xent_loss(probs, batch.labels)

    grad = np.zeros_like(params.values)
    delta = probs
    delta[np.arange(n), batch.labels] -= 1.0
    delta /= n

    layers = params.layers()
    slices = list(params.shapes.layer_slices())
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        w_slice, _, b_slice = slices[i]
        h_in = activations[i]
        grad[w_slice] = (h_in.T @ delta).ravel()
        grad[b_slice] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ W.T) * (activations[i] > 0.0)
    return Gradient(grad, params.shapes), loss
