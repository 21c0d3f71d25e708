from dataclasses import dataclass, field

import numpy as np

from .labels import LABEL_NAMES


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    label_names: tuple = field(default=LABEL_NAMES)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            features = features.reshape(len(labels), -1)
        if features.shape[0] != labels.shape[0]:
            raise ValueError(f'{features.shape[0]} rows but {labels.shape[0]} labels')
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.label_names)):
            raise ValueError('label id outside the label space')
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    @property
    def num_classes(self):
        return len(self.label_names)

    @property
    def width(self):
        return self.features.shape[1]

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, index):
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.features[index], self.labels[index], self.label_names)

    def histogram(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    def rows_of(self, class_id):
        return np.flatnonzero(self.labels == class_id)
