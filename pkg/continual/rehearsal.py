"""Rehearsal schedules: a dense phase, then periodic rehearsal rounds up to T_max.

A cohort with allowance T_c and rehearsal ratio rho trains every round until
dense_end = ceil((1 - rho) * T_c), then spends its remaining floor(rho * T_c)
rounds spread evenly over [dense_end, T_max).
"""

import math
from dataclasses import dataclass, field

from cohortdp.exceptions import ContinualStateError


def dense_phase_end(rho, allowance):
    # rounding guards against 0.7 * 10 == 7.000000000000001
    return min(allowance, math.ceil(round((1.0 - rho) * allowance, 9)))


@dataclass
class CohortSchedule:
    rho: float
    allowance: int
    t_max: int
    remaining_rehearsals: int = None
    relaxed: bool = False

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ContinualStateError(f'rehearsal ratio {self.rho} outside [0, 1)')
        if self.allowance < 0:
            raise ContinualStateError('round allowance must be nonnegative')
        if self.t_max < 1:
            raise ContinualStateError('T_max must be a positive round count')
        if self.remaining_rehearsals is None:
            self.remaining_rehearsals = self.rehearsals

    @property
    def dense_end(self):
        return dense_phase_end(self.rho, self.allowance)

    @property
    def rehearsals(self):
        return min(math.floor(self.rho * self.allowance), self.allowance - self.dense_end)

    @property
    def interval(self):
        return max(1, (self.t_max - self.dense_end) // max(1, self.rehearsals))

    def is_rehearsal_round(self, t):
        offset = t - self.dense_end
        if offset < 0 or t >= self.t_max or offset % self.interval:
            return False
        return offset // self.interval < self.rehearsals

    def last_round(self):
        if self.rehearsals == 0 or self.t_max <= self.dense_end:
            return self.dense_end - 1
        k = min(self.rehearsals - 1, (self.t_max - 1 - self.dense_end) // self.interval)
        return self.dense_end + k * self.interval


@dataclass
class RehearsalSchedule:
    cohorts: dict = field(default_factory=dict)

    @classmethod
    def build(cls, allowances, rhos, t_max=None):
        """allowances and rhos map cohort id to T_c and rho."""
        if t_max is None or t_max <= 0:
            t_max = max(allowances.values())
        return cls({
            c: CohortSchedule(rho=float(rhos[c]), allowance=int(allowances[c]), t_max=int(t_max))
            for c in sorted(allowances)
        })

    def _get(self, cohort_id):
        try:
            return self.cohorts[cohort_id]
        except KeyError:
            raise ContinualStateError(f'no rehearsal schedule for cohort {cohort_id}') from None

    def record_participation(self, cohort_id, t):
        entry = self._get(cohort_id)
        if not entry.relaxed and t >= entry.dense_end:
            entry.remaining_rehearsals -= 1

    def finished(self, cohort_id, t):
        entry = self._get(cohort_id)
        return not entry.relaxed and t > entry.last_round()

    def relax(self, cohort_id):
        self._get(cohort_id).relaxed = True

    def to_record(self):
        return {
            str(c): {
                'rho': s.rho,
                'allowance': s.allowance,
                't_max': s.t_max,
                'remaining_rehearsals': s.remaining_rehearsals,
                'relaxed': s.relaxed,
            }
            for c, s in self.cohorts.items()
        }

    @classmethod
    def from_record(cls, record):
        return cls({int(c): CohortSchedule(**entry) for c, entry in record.items()})


def rehearsal_should_run(sched, cohort_id, t):
    """Whether the cohort contributes in round t. Pure; never mutates the schedule."""
    if sched is None:
        raise ContinualStateError('rehearsal schedule not initialized')
    entry = sched._get(cohort_id)
    if entry.relaxed or t < entry.dense_end:
        return True
    return entry.remaining_rehearsals > 0 and entry.is_rehearsal_round(t)
