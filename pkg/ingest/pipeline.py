"""From a config to normalized, partitioned client shards."""

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .labels import BENIGN_ID
from .loader import load_csv
from .normalize import NormStats, apply_normalize, fit_normalize
from .partition import CohortAssignment, partition_clients, partition_cohorts, train_test_split
from .synth import SynthSpec, synth_generate, scaled_class_counts

logger = logging.getLogger(__name__)

# SeedSequence children of the data seed
_SYNTH, _SPLIT, _COHORTS, _CLIENTS = range(4)


@dataclass(frozen=True)
class PreparedData:
    train: Dataset
    test: Dataset
    stats: NormStats
    assignment: CohortAssignment
    shards: list

    def cohort_shards(self, cohort_id):
        return [s for s in self.shards if s.cohort_id == cohort_id]


def load_source(config, seed):
    if config.data_path:
        return load_csv(config.data_path)
    counts = scaled_class_counts(config.synth_total, config.synth_min_per_class)
    return synth_generate(SynthSpec(counts, separation=config.separation), seed)


def prepare(config):
    """Load or synthesize, split, normalize on the training split, then partition."""
    seeds = np.random.SeedSequence(config.data_seed).spawn(4)
    full = load_source(config, seeds[_SYNTH])
    train, test = train_test_split(full, config.test_fraction, seeds[_SPLIT])
    stats = fit_normalize(train)
    train = apply_normalize(train, stats)
    test = apply_normalize(test, stats)

    present = [int(c) for c in np.flatnonzero(train.histogram()) if c != BENIGN_ID]
    assignment = partition_cohorts(present, config.num_cohorts, seeds[_COHORTS])
    shards = partition_clients(train, assignment, config.clients_per_cohort, seeds[_CLIENTS])
    logger.info(
        'prepared %d train / %d test rows, %d cohorts x %d clients',
        len(train), len(test), assignment.num_cohorts, config.clients_per_cohort,
    )
    return PreparedData(train, test, stats, assignment, shards)
