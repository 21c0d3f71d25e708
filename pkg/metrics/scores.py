"""Confusion matrices and micro / macro / weighted F1."""

from dataclasses import dataclass

import numpy as np

from cohortdp.exceptions import MetricsError


@dataclass(frozen=True)
class ConfusionMatrix:
    # counts[true, predicted]
    counts: np.ndarray

    @property
    def num_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    def support(self):
        return self.counts.sum(axis=1)

    def true_positives(self):
        return np.diag(self.counts)

    def accuracy(self):
        if self.total == 0:
            raise MetricsError('accuracy of an empty confusion matrix')
        return float(self.true_positives().sum() / self.total)


@dataclass(frozen=True)
class F1Report:
    micro: float
    macro: float
    weighted: float
    per_class: tuple
    support: tuple
    precision: tuple = ()
    recall: tuple = ()


def confusion(predictions, labels, num_classes):
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise MetricsError(f'{predictions.shape[0]} predictions for {labels.shape[0]} labels')
    for name, ids in (('prediction', predictions), ('label', labels)):
        if ids.size and (ids.min() < 0 or ids.max() >= num_classes):
            raise MetricsError(f'{name} id outside [0, {num_classes})')
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (labels, predictions), 1)
    return ConfusionMatrix(counts)


def _safe_ratio(num, den):
    return np.divide(num, den, out=np.zeros(num.shape, dtype=np.float64), where=den > 0)


def f1_report(cm):
    """Per-class F1 from the matrix; classes without support are left out of the macro mean."""
    if cm.total == 0:
        raise MetricsError('cannot score an all-zero confusion matrix')
    tp = cm.true_positives().astype(np.float64)
    predicted = cm.counts.sum(axis=0).astype(np.float64)
    support = cm.support().astype(np.float64)
    precision = _safe_ratio(tp, predicted)
    recall = _safe_ratio(tp, support)
    per_class = _safe_ratio(2.0 * precision * recall, precision + recall)

    present = support > 0
    micro = float(tp.sum() / cm.total)
    macro = float(per_class[present].mean())
    weighted = float((per_class * support).sum() / support.sum())
    return F1Report(
        micro=micro,
        macro=macro,
        weighted=weighted,
        per_class=tuple(float(x) for x in per_class),
        support=tuple(int(x) for x in support),
        precision=tuple(float(x) for x in precision),
        recall=tuple(float(x) for x in recall),
    )


def score(predictions, labels, num_classes):
    return f1_report(confusion(predictions, labels, num_classes))
