"""Server rounds for the two continual variants: rehearsal and synaptic intelligence."""

import logging
import time

from federation.server import apply_average, cohort_delta, finish_round
from nn_core.params import ParamVector, vec_add_scaled, vec_sub, zeros_like
from privacy.accountant import close_ledger

from .rehearsal import rehearsal_should_run
from .synaptic import advance_task_start, si_accumulate, si_consolidate, si_correction

logger = logging.getLogger(__name__)


def dp_r_server_round(state, sched):
    """Baseline round in which a cohort contributes only on its scheduled rounds."""
    started = time.perf_counter()
    t = state.round
    deltas = []
    for cohort in state.cohort_order():
        if cohort.exhausted:
            deltas.append(zeros_like(state.global_params))
        elif rehearsal_should_run(sched, cohort.cohort_id, t):
            before = cohort.query_count
            deltas.append(cohort_delta(state, cohort, t))
            if cohort.query_count > before:
                sched.record_participation(cohort.cohort_id, t)
        else:
            if sched.finished(cohort.cohort_id, t):
                close_ledger(cohort.ledger)
                logger.info('cohort %d finished its rehearsal schedule at round %d',
                            cohort.cohort_id, t)
            deltas.append(zeros_like(state.global_params))
    new_params = apply_average(state.global_params, deltas, len(state.cohorts))
    return finish_round(state, new_params, started)


def dp_si_server_round(state, si):
    """Average over active cohorts, pull toward consolidated anchors, then update SI sums.

    Cohorts are visited in increasing epsilon order. A cohort that exhausts
    this round is consolidated at the model it last trained.
    """
    started = time.perf_counter()
    t = state.round
    w_t = state.global_params
    ordered = state.cohort_order()
    was_active = {c.cohort_id: not c.exhausted for c in ordered}

    deltas = [cohort_delta(state, c, t) for c in ordered]
    contributing = len(state.cohorts) - sum(c.exhausted for c in ordered)
    if contributing:
        new_params = apply_average(w_t, deltas, contributing)
    else:
        new_params = ParamVector(w_t.values.copy(), w_t.shapes)
    correction = si_correction(si, w_t)
    if correction is not None:
        new_params = vec_add_scaled(new_params, correction, 1.0)

    change = vec_sub(new_params, w_t)
    for cohort, delta in zip(ordered, deltas):
        if cohort.exhausted or si.consolidated(cohort.cohort_id):
            continue
        si_accumulate(si, cohort.cohort_id, delta, change)

    newly_exhausted = [
        c for c in ordered
        if was_active[c.cohort_id] and c.exhausted and not si.consolidated(c.cohort_id)
    ]
    for cohort in newly_exhausted:
        si_consolidate(si, cohort.cohort_id, w_t)
        logger.info('cohort %d consolidated at round %d', cohort.cohort_id, t)
    if newly_exhausted:
        advance_task_start(si, w_t)
    return finish_round(state, new_params, started)
