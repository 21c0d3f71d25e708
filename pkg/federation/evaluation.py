import logging

import numpy as np

from metrics.scores import score
from nn_core.mlp import forward, xent_loss

logger = logging.getLogger(__name__)


class RoundEvaluator:
    """Scores the global model after each round.

    Train loss and accuracy cover the union of all client shards; per-cohort
    accuracy covers each cohort's rows. Test F1 is computed every
    `eval_every` rounds and on request.
    """

    def __init__(self, train, test, cohort_rows, eval_every=5):
        if eval_every < 1:
            raise ValueError('eval_every must be at least 1')
        self.train = train
        self.test = test
        self.cohort_rows = cohort_rows
        self.eval_every = eval_every

    @classmethod
    def for_shards(cls, train, test, shards, eval_every=5):
        by_cohort = {}
        for shard in shards:
            by_cohort.setdefault(shard.cohort_id, []).append(shard.rows)
        cohort_rows = [np.sort(np.concatenate(by_cohort[c])) for c in sorted(by_cohort)]
        return cls(train, test, cohort_rows, eval_every)

    def evaluate(self, params, round_index, final=False):
        probs = forward(params, self.train.features)
        predicted = np.argmax(probs, axis=1)
        hits = predicted == self.train.labels
        scores = {
            'train_loss': xent_loss(probs, self.train.labels),
            'train_acc': float(hits.mean()) if hits.size else 0.0,
            'cohort_acc': tuple(
                float(hits[rows].mean()) if rows.size else 0.0 for rows in self.cohort_rows
            ),
        }
        if final or (round_index + 1) % self.eval_every == 0:
            scores.update(self.test_scores(params))
        return scores

    def test_scores(self, params):
        report = self.test_report(params)
        return {
            'test_micro_f1': report.micro,
            'test_macro_f1': report.macro,
            'test_weighted_f1': report.weighted,
        }

    def test_report(self, params):
        predicted = np.argmax(forward(params, self.test.features), axis=1)
        return score(predicted, self.test.labels, self.test.num_classes)
