"""Non-iid cohort and client partitioning plus the stratified split."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from cohortdp.exceptions import DataError

from .dataset import Dataset
from .labels import BENIGN_ID

logger = logging.getLogger(__name__)

LABELS_PER_CLIENT = 2


@dataclass(frozen=True)
class CohortAssignment:
    cohort_label_sets: tuple
    benign_id: int = BENIGN_ID

    @property
    def num_cohorts(self):
        return len(self.cohort_label_sets)


@dataclass(frozen=True)
class ClientShard:
    client_id: int
    cohort_id: int
    rows: np.ndarray
    data: Dataset

    @property
    def features(self):
        return self.data.features

    @property
    def labels(self):
        return self.data.labels

    def label_ids(self):
        return tuple(int(x) for x in np.unique(self.data.labels))

    def __len__(self):
        return len(self.data)


def partition_cohorts(attack_ids, num_cohorts, seed, benign_id=BENIGN_ID):
    """Randomly split the attack classes into balanced disjoint cohort label sets."""
    ids = sorted(int(a) for a in attack_ids if int(a) != benign_id)
    if not 1 <= num_cohorts <= len(ids):
        raise DataError(f'{num_cohorts} cohorts for {len(ids)} attack labels')
    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(ids)
    sets = tuple(frozenset(int(x) for x in part) for part in np.array_split(shuffled, num_cohorts))
    logger.info('cohort label sets: %s', [sorted(s) for s in sets])
    return CohortAssignment(sets, benign_id)


def _client_labels(cohort_labels, clients):
    """Cycle the cohort's labels over its clients, two per client where possible."""
    n = len(cohort_labels)
    per_client = min(n, max(LABELS_PER_CLIENT, math.ceil(n / clients)))
    return [
        sorted({cohort_labels[(per_client * k + j) % n] for j in range(per_client)})
        for k in range(clients)
    ]


def partition_clients(d, assignment, clients_per_cohort, seed):
    if clients_per_cohort < 1:
        raise DataError('clients_per_cohort must be at least 1')
    if any(not s for s in assignment.cohort_label_sets):
        raise DataError('every cohort needs a nonempty label set')

    rng = np.random.default_rng(seed)
    holders = []  # (cohort_id, attack labels) per global client id
    for cohort_id, label_set in enumerate(assignment.cohort_label_sets):
        cohort_labels = [int(x) for x in rng.permutation(sorted(label_set))]
        for labels in _client_labels(cohort_labels, clients_per_cohort):
            holders.append((cohort_id, labels))

    rows = [[] for _ in holders]

    def deal(class_id, client_ids):
        pool = rng.permutation(d.rows_of(class_id))
        if pool.shape[0] < len(client_ids):
            raise DataError(
                f'class {class_id} has {pool.shape[0]} rows for {len(client_ids)} clients'
            )
        for client_id, part in zip(client_ids, np.array_split(pool, len(client_ids))):
            rows[client_id].append(part)

    # benign rows are spread over every client of every cohort
    deal(assignment.benign_id, list(range(len(holders))))
    attack_ids = sorted(set().union(*assignment.cohort_label_sets))
    for class_id in attack_ids:
        deal(class_id, [i for i, (_, labels) in enumerate(holders) if class_id in labels])

    shards = []
    for client_id, (cohort_id, _) in enumerate(holders):
        index = np.sort(np.concatenate(rows[client_id]))
        shards.append(ClientShard(client_id, cohort_id, index, d.subset(index)))
    logger.info('partitioned %d rows over %d clients', sum(len(s) for s in shards), len(shards))
    return shards


def train_test_split(d, test_fraction, seed):
    """Stratified split; each class keeps at least one row on either side."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f'test fraction {test_fraction} outside (0, 1)')
    rng = np.random.default_rng(seed)
    train_rows, test_rows = [], []
    for class_id in range(d.num_classes):
        rows = d.rows_of(class_id)
        if rows.shape[0] == 0:
            continue
        if rows.shape[0] < 2:
            raise DataError(f'class {d.label_names[class_id]!r} has a single row; cannot stratify')
        rows = rng.permutation(rows)
        n_test = min(max(int(round(test_fraction * rows.shape[0])), 1), rows.shape[0] - 1)
        test_rows.append(rows[:n_test])
        train_rows.append(rows[n_test:])
    if not train_rows:
        return d, d
    train = np.sort(np.concatenate(train_rows))
    test = np.sort(np.concatenate(test_rows))
    return d.subset(train), d.subset(test)
