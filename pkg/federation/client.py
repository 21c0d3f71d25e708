"""Local training on one client's shard (the DP-Client step)."""

import numpy as np

from cohortdp.exceptions import DataError
from nn_core.mlp import Batch, backward
from nn_core.optim import LocalOptimizer
from nn_core.params import vec_l2_norm, vec_sub

from .state import ClientUpdate


def dp_client_update(global_params, shard, epochs, batch_size, optimizer, seed):
    """Run `epochs` shuffled mini-batch passes from the global model; return the change."""
    if len(shard) == 0:
        raise DataError(f'client {shard.client_id} holds no rows')
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = global_params
    local = LocalOptimizer(optimizer, params)
    features, labels = shard.features, shard.labels
    for _ in range(epochs):
        order = rng.permutation(len(shard))
        for start in range(0, order.shape[0], batch_size):
            index = order[start:start + batch_size]
            grad, _ = backward(params, Batch(features[index], labels[index]))
            params = local.step(params, grad)
    delta = vec_sub(params, global_params)
    return ClientUpdate(delta, vec_l2_norm(delta))
