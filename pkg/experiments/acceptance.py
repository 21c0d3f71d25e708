"""Desk-scale comparisons of the four algorithms over several seeds.

Each check trains every configuration it needs once per seed, takes medians
over seeds and reports one Comparison per claim. Nothing here feeds back into
training; the checks only read final rows and train accuracy curves.
"""

import copy
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cohortdp.exceptions import CohortDPError
from federation.training import DP, DP_R, DP_SI, NONPRIVATE, relax_cohort, run_training
from ingest.pipeline import prepare

from .config import seeded

logger = logging.getLogger(__name__)

FORGETTING_WINDOW = 3
F1_MARGIN = 0.02
BASELINE_DROP_FLOOR = 0.05
SI_DROP_CEILING = 0.02
RELAX_EXTRA_ROUNDS = 10
ROBUSTNESS_GAMMAS = (0.25, 1.0, 2.0)
ROBUSTNESS_RHOS = (0.125, 0.25, 0.5)
F1_KEYS = ('test_micro_f1', 'test_macro_f1', 'test_weighted_f1')

CHECKS = ('forgetting', 'relaxation', 'robustness')


@dataclass(frozen=True)
class Comparison:
    """left >= right + margin (left > right + margin when strict)."""

    check: str
    claim: str
    left: float
    right: float
    margin: float = 0.0
    strict: bool = False

    @property
    def passed(self):
        if math.isnan(self.left) or math.isnan(self.right):
            return False
        if self.strict:
            return self.left > self.right + self.margin
        return self.left >= self.right + self.margin


def first_exhaustion(history, cohort_id=None):
    """Index of the first row in which the cohort (any cohort if None) is exhausted."""
    for i, row in enumerate(history):
        flags = row.exhausted
        if cohort_id is None:
            if any(flags):
                return i
        elif flags[cohort_id]:
            return i
    return None


def accuracy_drop(history, cohort_id=None, window=FORGETTING_WINDOW):
    """Train accuracy before the first exhaustion minus its lowest value over the next rounds.

    None when no cohort exhausts. A rise gives a negative drop.
    """
    i = first_exhaustion(history, cohort_id)
    if i is None:
        return None
    before = history[i - 1].train_acc if i > 0 else history[i].train_acc
    return before - min(row.train_acc for row in history[i:i + window])


def _median(values):
    values = [v for v in values if v is not None]
    if not values:
        return float('nan')
    return float(np.median(values))


class SeededRuns:
    """Trains (config overrides, seed) pairs once and keeps the histories."""

    def __init__(self, config, seeds):
        self.config = config
        self.seeds = list(seeds)
        self._data = {}
        self._states = {}

    def data(self, seed):
        if seed not in self._data:
            self._data[seed] = prepare(seeded(self.config, seed))
        return self._data[seed]

    def state(self, seed, **overrides):
        key = (seed, tuple(sorted(overrides.items())))
        if key not in self._states:
            config = seeded(self.config.with_overrides(**overrides), seed)
            state, _ = run_training(config, self.data(seed))
            self._states[key] = state
        return self._states[key]

    def histories(self, **overrides):
        return [self.state(seed, **overrides).history for seed in self.seeds]

    def relaxed_final(self, seed, cohort_id, extra_rounds, **overrides):
        """Final row after reopening one cohort of a finished run; the cached run is untouched."""
        config = seeded(self.config.with_overrides(**overrides), seed)
        finished = self.state(seed, **overrides)
        state = copy.deepcopy(finished, memo={id(finished.evaluator): finished.evaluator})
        relax_cohort(state, cohort_id, extra_rounds)
        state, history = run_training(
            config, self.data(seed), state=state, max_rounds=state.round + extra_rounds
        )
        return history[-1]

    def median_final(self, key='test_micro_f1', **overrides):
        return _median(getattr(h[-1], key) for h in self.histories(**overrides))


def forgetting(runs):
    """Final F1 ordering of the four algorithms and the train-accuracy drop at exhaustion."""
    f1 = {algo: runs.median_final(algorithm=algo) for algo in (NONPRIVATE, DP, DP_R, DP_SI)}
    drops = {
        algo: _median(accuracy_drop(h) for h in runs.histories(algorithm=algo))
        for algo in (DP, DP_SI)
    }
    logger.info('forgetting: median micro F1 %s, median drops %s', f1, drops)
    return [
        Comparison('forgetting', 'nonprivate > dp-r (micro F1)', f1[NONPRIVATE], f1[DP_R], strict=True),
        Comparison('forgetting', 'dp-r >= dp + 0.02 (micro F1)', f1[DP_R], f1[DP], F1_MARGIN),
        Comparison('forgetting', 'dp-si >= dp + 0.02 (micro F1)', f1[DP_SI], f1[DP], F1_MARGIN),
        Comparison('forgetting', 'dp train-acc drop >= 0.05', drops[DP], BASELINE_DROP_FLOOR),
        Comparison('forgetting', 'dp-si train-acc drop < 0.02', SI_DROP_CEILING, drops[DP_SI], strict=True),
    ]


def relaxation(runs, extra_rounds=RELAX_EXTRA_ROUNDS):
    """dp-si against dp-r after reopening either cohort for extra rounds."""
    comparisons = []
    for cohort_id in range(runs.config.num_cohorts):
        finals = {
            algo: [runs.relaxed_final(seed, cohort_id, extra_rounds, algorithm=algo) for seed in runs.seeds]
            for algo in (DP_R, DP_SI)
        }
        for key in F1_KEYS:
            si = _median(getattr(row, key) for row in finals[DP_SI])
            rehearsal = _median(getattr(row, key) for row in finals[DP_R])
            comparisons.append(Comparison(
                'relaxation', f'cohort {cohort_id} +{extra_rounds}: dp-si >= dp-r ({key})', si, rehearsal,
            ))
    return comparisons


def robustness(runs, gammas=ROBUSTNESS_GAMMAS, rhos=ROBUSTNESS_RHOS):
    """Every gamma of dp-si and every rho of dp-r against the dp baseline."""
    baseline = runs.median_final(algorithm=DP)
    comparisons = [
        Comparison('robustness', f'dp-si gamma={g} >= dp (micro F1)',
                   runs.median_final(algorithm=DP_SI, gamma=float(g)), baseline)
        for g in gammas
    ]
    comparisons.extend(
        Comparison('robustness', f'dp-r rho={r} >= dp (micro F1)',
                   runs.median_final(algorithm=DP_R, rho=float(r)), baseline)
        for r in rhos
    )
    return comparisons


def run_checks(config, seeds, checks=CHECKS, extra_rounds=RELAX_EXTRA_ROUNDS):
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise CohortDPError(f'unknown checks {unknown}; choose from {", ".join(CHECKS)}')
    runs = SeededRuns(config, seeds)
    results = []
    if 'forgetting' in checks:
        results.extend(forgetting(runs))
    if 'relaxation' in checks:
        results.extend(relaxation(runs, extra_rounds))
    if 'robustness' in checks:
        results.extend(robustness(runs))
    return results


ACCEPTANCE_HEADER = ['check', 'claim', 'left', 'right', 'margin', 'passed']


def write_comparisons(path, comparisons):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(ACCEPTANCE_HEADER)
        for c in comparisons:
            writer.writerow([c.check, c.claim, repr(c.left), repr(c.right), repr(c.margin), int(c.passed)])
    return path
