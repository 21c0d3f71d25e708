"""Flat parameter vectors for the fixed MLP family and their arithmetic."""

from dataclasses import dataclass

import numpy as np

from cohortdp.exceptions import LayoutError

# input, two hidden layers, output
DEFAULT_DIMS = (79, 79, 128, 9)


@dataclass(frozen=True)
class LayerShapes:
    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2:
            raise LayoutError(f'need at least an input and an output layer, got {dims}')
        if any(d <= 0 for d in dims):
            raise LayoutError(f'layer widths must be positive, got {dims}')
        object.__setattr__(self, 'dims', dims)

    @property
    def input_width(self):
        return self.dims[0]

    @property
    def num_classes(self):
        return self.dims[-1]

    @property
    def param_count(self):
        return sum(a * b + b for a, b in zip(self.dims[:-1], self.dims[1:]))

    def layer_slices(self):
        """Yield (weight slice, weight shape, bias slice) per layer, input side first."""
        offset = 0
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            w_end = offset + fan_in * fan_out
            b_end = w_end + fan_out
            yield slice(offset, w_end), (fan_in, fan_out), slice(w_end, b_end)
            offset = b_end


@dataclass(frozen=True)
class ParamVector:
    values: np.ndarray
    shapes: LayerShapes

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != self.shapes.param_count:
            raise LayoutError(
                f'{values.shape} values do not fit layout {self.shapes.dims} '
                f'({self.shapes.param_count} parameters)'
            )
        object.__setattr__(self, 'values', values)

    def layers(self):
        """Return [(W, b), ...] as views into the flat vector."""
        return [
            (self.values[w].reshape(shape), self.values[b])
            for w, shape, b in self.shapes.layer_slices()
        ]

    def copy(self):
        return type(self)(self.values.copy(), self.shapes)

    def __len__(self):
        return self.values.shape[0]


class Gradient(ParamVector):
    """Same layout as the ParamVector it differentiates."""


def zeros_like(p):
    return ParamVector(np.zeros_like(p.values), p.shapes)


def init_params(shapes, seed):
    """Uniform ±sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    values = np.zeros(shapes.param_count, dtype=np.float64)
    for w, (fan_in, fan_out), _ in shapes.layer_slices():
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        values[w] = rng.uniform(-limit, limit, size=fan_in * fan_out)
    return ParamVector(values, shapes)


def _check_layout(a, b):
    if a.shapes != b.shapes:
        raise LayoutError(f'layout {a.shapes.dims} does not match {b.shapes.dims}')


def vec_add_scaled(a, b, s):
    """a + s * b, keeping a's type."""
    _check_layout(a, b)
    return type(a)(a.values + s * b.values, a.shapes)


def vec_sub(a, b):
    _check_layout(a, b)
    return ParamVector(a.values - b.values, a.shapes)


def vec_l2_norm(a):
    return float(np.linalg.norm(a.values))
