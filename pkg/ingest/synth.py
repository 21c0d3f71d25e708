"""Class-conditional Gaussian stand-in for the flow-feature data."""

import logging
from dataclasses import dataclass

import numpy as np

from cohortdp.exceptions import DataError

from .dataset import Dataset
from .labels import FEATURE_WIDTH, LABEL_NAMES, SOURCE_CLASS_COUNTS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthSpec:
    counts: tuple
    separation: float = 3.0
    width: int = FEATURE_WIDTH


def scaled_class_counts(total, min_per_class=0):
    """Per-class counts in published proportions, scaled to about `total` rows."""
    grand = sum(SOURCE_CLASS_COUNTS)
    return tuple(max(min_per_class, int(round(total * c / grand))) for c in SOURCE_CLASS_COUNTS)


def synth_generate(spec, seed):
    counts = tuple(int(c) for c in spec.counts)
    if any(c < 0 for c in counts):
        raise DataError(f'negative class count in {counts}')
    if sum(counts) == 0:
        raise DataError('all class counts are zero')
    if spec.separation <= 0:
        raise DataError('cluster separation must be positive')

    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((len(counts), spec.width))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    # random directions are nearly orthogonal, so centroids sit about `separation` apart
    centroids = directions * (spec.separation / np.sqrt(2.0))

    labels = np.repeat(np.arange(len(counts)), counts)
    features = centroids[labels] + rng.standard_normal((labels.shape[0], spec.width))
    order = rng.permutation(labels.shape[0])

    names = LABEL_NAMES if len(counts) == len(LABEL_NAMES) else tuple(f'class-{i}' for i in range(len(counts)))
    logger.debug('generated %d synthetic rows, histogram %s', labels.shape[0], counts)
    return Dataset(features[order], labels[order], names)
