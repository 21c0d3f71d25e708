from dataclasses import dataclass

import numpy as np

from cohortdp.exceptions import DataError

from .dataset import Dataset


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray


def fit_normalize(train):
    if len(train) == 0:
        raise DataError('cannot fit normalization on an empty dataset')
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    # degenerate columns pass through centered
    std = np.where(std > 0.0, std, 1.0)
    return NormStats(mean, std)


def apply_normalize(d, stats):
    if d.width != stats.mean.shape[0]:
        raise DataError(f'{d.width} columns but statistics for {stats.mean.shape[0]}')
    return Dataset((d.features - stats.mean) / stats.std, d.labels, d.label_names)
