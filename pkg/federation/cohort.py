"""One cohort's contribution to a federated round (the DP-Cohort step)."""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from nn_core.params import ParamVector, zeros_like
from privacy.accountant import accumulate_round, admits_round, close_ledger
from privacy.mechanisms import NoiseSpec, clip_update, gaussian_noise

from . import seeding
from .client import dp_client_update

logger = logging.getLogger(__name__)


def sample_clients(cohort, round_index, root_seed):
    """m distinct client positions, sorted, drawn from the round's sampling stream."""
    rng = seeding.stream(root_seed, seeding.SAMPLE, round_index, cohort.cohort_id)
    return np.sort(rng.choice(cohort.client_count, size=cohort.m, replace=False))


def run_clients(cohort, chosen, global_params, local, round_index, root_seed, workers=1):
    def update(position):
        shard = cohort.shards[int(position)]
        seed = seeding.stream(
            root_seed, seeding.CLIENT, round_index, cohort.cohort_id, shard.client_id
        )
        return dp_client_update(
            global_params, shard, local.epochs, local.batch_size, local.optimizer, seed
        )

    if workers > 1 and len(chosen) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(update, chosen))
    return [update(position) for position in chosen]


def dp_cohort_round(cohort, global_params, spec, round_index, root_seed, local,
                    sigma=None, workers=1):
    """Average of m sampled client updates; clipped, noised and accounted when spec is set.

    A cohort whose ledger cannot take another round contributes a zero delta
    and is marked exhausted. spec=None runs the nonprivate mean.
    """
    if cohort.ledger is not None and not admits_round(cohort.ledger, sigma):
        if not cohort.ledger.exhausted:
            close_ledger(cohort.ledger)
            logger.info('cohort %d exhausted at round %d', cohort.cohort_id, round_index)
        return zeros_like(global_params)

    chosen = sample_clients(cohort, round_index, root_seed)
    updates = run_clients(cohort, chosen, global_params, local, round_index, root_seed, workers)
    cohort.query_count += len(updates)

    total = np.zeros(len(global_params), dtype=np.float64)
    if spec is None:
        for u in updates:
            total += u.delta.values
        return ParamVector(total / cohort.m, global_params.shapes)

    for u in updates:
        total += clip_update(u.delta, spec.sensitivity).values
    round_spec = spec if sigma is None else NoiseSpec(spec.sensitivity, sigma)
    noise_rng = seeding.stream(root_seed, seeding.NOISE, round_index, cohort.cohort_id)
    total += gaussian_noise(len(global_params), round_spec, noise_rng)
    if cohort.ledger is not None:
        accumulate_round(cohort.ledger, sigma)
    return ParamVector(total / cohort.m, global_params.shapes)
