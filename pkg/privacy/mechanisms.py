"""Update clipping and the Gaussian mechanism."""

import math
from dataclasses import dataclass

import numpy as np

from nn_core.params import ParamVector, vec_l2_norm


@dataclass(frozen=True)
class NoiseSpec:
    sensitivity: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.sensitivity <= 0:
            raise ValueError('sensitivity (clip bound) must be positive')
        if self.sigma < 0:
            raise ValueError('noise multiplier must be nonnegative')

    @property
    def stddev(self):
        return self.sensitivity * self.sigma


def clip_update(delta, S):
    """Scale delta by 1 / max(1, ||delta|| / S)."""
    if S <= 0:
        raise ValueError('clip bound must be positive')
    norm = vec_l2_norm(delta)
    scale = max(1.0, norm / S)
    if scale == 1.0:
        return delta
    return ParamVector(delta.values / scale, delta.shapes)


def gaussian_noise(dim, spec, rng):
    """i.i.d. N(0, (S * sigma)^2) per coordinate."""
    if dim <= 0:
        raise ValueError('noise dimension must be positive')
    if spec.sigma == 0:
        return np.zeros(dim, dtype=np.float64)
    return rng.normal(0.0, spec.stddev, size=dim)


def gaussian_mechanism_satisfies(sigma, epsilon, delta):
    """Classic single-release condition delta >= 4/5 * exp(-(sigma * epsilon)^2 / 2).

    Reference check only; training budgets come from the moments accountant.
    """
    return delta >= 0.8 * math.exp(-((sigma * epsilon) ** 2) / 2.0)
