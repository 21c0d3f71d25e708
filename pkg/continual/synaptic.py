"""Synaptic-intelligence bookkeeping over cohort deltas already released by the server."""

from dataclasses import dataclass, field

import numpy as np

from cohortdp.exceptions import ContinualStateError
from nn_core.params import Gradient, ParamVector


@dataclass
class SIState:
    gamma: float = 1.0
    xi: float = 0.1
    # cohort id -> running importance sums w
    importance: dict = field(default_factory=dict)
    # cohort id -> anchor params at task end
    anchors: dict = field(default_factory=dict)
    # cohort id -> net change over the task
    path_deltas: dict = field(default_factory=dict)
    # cohort id -> consolidated strengths
    omegas: dict = field(default_factory=dict)
    task_start: np.ndarray = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ContinualStateError('SI weight gamma must be nonnegative')
        if self.xi <= 0:
            raise ContinualStateError('damping xi must be positive')

    @classmethod
    def start(cls, cohort_ids, initial_params, gamma=1.0, xi=0.1):
        size = len(initial_params)
        return cls(
            gamma=gamma,
            xi=xi,
            importance={c: np.zeros(size, dtype=np.float64) for c in cohort_ids},
            task_start=initial_params.values.copy(),
        )

    def consolidated(self, cohort_id):
        return cohort_id in self.omegas

    def consolidated_ids(self):
        return sorted(self.omegas)

    def to_record(self):
        def arrays(d):
            return {str(c): [float(x) for x in v] for c, v in d.items()}

        return {
            'gamma': self.gamma,
            'xi': self.xi,
            'importance': arrays(self.importance),
            'anchors': arrays(self.anchors),
            'path_deltas': arrays(self.path_deltas),
            'omegas': arrays(self.omegas),
            'task_start': [float(x) for x in self.task_start],
        }

    @classmethod
    def from_record(cls, record):
        def arrays(d):
            return {int(c): np.asarray(v, dtype=np.float64) for c, v in d.items()}

        return cls(
            gamma=record['gamma'],
            xi=record['xi'],
            importance=arrays(record['importance']),
            anchors=arrays(record['anchors']),
            path_deltas=arrays(record['path_deltas']),
            omegas=arrays(record['omegas']),
            task_start=np.asarray(record['task_start'], dtype=np.float64),
        )


def si_accumulate(si, cohort_id, cohort_delta, global_change):
    """w += cohort_delta * global_change, coordinate-wise."""
    if si.consolidated(cohort_id):
        raise ContinualStateError(f'cohort {cohort_id} is already consolidated')
    if cohort_id not in si.importance:
        raise ContinualStateError(f'no importance sums for cohort {cohort_id}')
    si.importance[cohort_id] = si.importance[cohort_id] + cohort_delta.values * global_change.values
    return si


def si_consolidate(si, cohort_id, final_params):
    if si.consolidated(cohort_id):
        raise ContinualStateError(f'cohort {cohort_id} consolidated twice')
    anchor = final_params.values.copy()
    path = anchor - si.task_start
    w = si.importance.get(cohort_id)
    if w is None:
        raise ContinualStateError(f'no importance sums for cohort {cohort_id}')
    si.anchors[cohort_id] = anchor
    si.path_deltas[cohort_id] = path
    si.omegas[cohort_id] = np.maximum(w, 0.0) / (path * path + si.xi)
    return si


def advance_task_start(si, params):
    si.task_start = params.values.copy()
    return si


def _check_consolidated(si, cohort_ids):
    missing = [c for c in cohort_ids if not si.consolidated(c)]
    if missing:
        raise ContinualStateError(f'cohorts {missing} have no consolidated anchor')


def si_loss(si, cohort_ids, params):
    """sum over cohorts and coordinates of omega * (anchor - theta)^2."""
    _check_consolidated(si, cohort_ids)
    total = 0.0
    for c in sorted(cohort_ids):
        gap = si.anchors[c] - params.values
        total += float(np.sum(si.omegas[c] * gap * gap))
    return total


def si_gradient(si, cohort_ids, params):
    _check_consolidated(si, cohort_ids)
    grad = np.zeros_like(params.values)
    for c in sorted(cohort_ids):
        grad -= 2.0 * si.omegas[c] * (si.anchors[c] - params.values)
    return Gradient(grad, params.shapes)


def si_correction(si, params):
    """Descent step on the SI loss of every consolidated cohort, as a parameter delta."""
    cohort_ids = si.consolidated_ids()
    if not cohort_ids or si.gamma == 0:
        return None
    grad = si_gradient(si, cohort_ids, params)
    return ParamVector(-si.gamma * grad.values, params.shapes)
