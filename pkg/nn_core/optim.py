"""Local optimizers: Adagrad (the experimental setup) and plain SGD."""

from dataclasses import dataclass

import numpy as np

from cohortdp.exceptions import LayoutError

from .params import ParamVector

ADAGRAD = 'adagrad'
SGD = 'sgd'


@dataclass(frozen=True)
class OptimizerConfig:
    name: str = ADAGRAD
    learning_rate: float = 0.1
    stability: float = 1e-7

    def __post_init__(self):
        if self.name not in (ADAGRAD, SGD):
            raise ValueError(f'unknown optimizer {self.name!r}')
        if self.learning_rate <= 0:
            raise ValueError('learning rate must be positive')


@dataclass
class AdagradState:
    accumulator: np.ndarray
    learning_rate: float = 0.1
    stability: float = 1e-7

    @classmethod
    def fresh(cls, params, learning_rate=0.1, stability=1e-7):
        return cls(np.zeros_like(params.values), learning_rate, stability)


def adagrad_step(params, state, grad):
    """accumulator += g^2; theta -= lr * g / sqrt(accumulator + stability)."""
    if grad.values.shape != state.accumulator.shape or params.shapes != grad.shapes:
        raise LayoutError('gradient, parameters and accumulator must share a layout')
    g = grad.values
    state.accumulator += g * g
    step = state.learning_rate * g / np.sqrt(state.accumulator + state.stability)
    return ParamVector(params.values - step, params.shapes)


def sgd_step(params, learning_rate, grad):
    if params.shapes != grad.shapes:
        raise LayoutError('gradient and parameters must share a layout')
    return ParamVector(params.values - learning_rate * grad.values, params.shapes)


class LocalOptimizer:
    """Binds an OptimizerConfig to one client's local training run."""

    def __init__(self, config, params):
        self.config = config
        self.state = None
        if config.name == ADAGRAD:
            self.state = AdagradState.fresh(params, config.learning_rate, config.stability)

    def step(self, params, grad):
        if self.state is not None:
            return adagrad_step(params, self.state, grad)
        return sgd_step(params, self.config.learning_rate, grad)
