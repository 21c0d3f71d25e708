"""Server rounds: combine cohort deltas into the global model and record metrics."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from nn_core.params import ParamVector
from privacy.accountant import spent_delta

from .cohort import dp_cohort_round
from .state import MetricsRow

logger = logging.getLogger(__name__)


def cohort_delta(state, cohort, t):
    return dp_cohort_round(
        cohort, state.global_params, state.noise, t, state.root_seed, state.local,
        sigma=state.sigma_for(t) if state.private else None, workers=state.workers,
    )


def apply_average(global_params, deltas, divisor):
    """global + (sum of deltas in the given order) / divisor."""
    total = np.zeros(len(global_params), dtype=np.float64)
    for d in deltas:
        total += d.values
    return ParamVector(global_params.values + total / divisor, global_params.shapes)


def finish_round(state, new_params, started):
    """Install the new model, append the round's metrics row and advance the round counter."""
    state.global_params = new_params
    t = state.round
    ordered = sorted(state.cohorts, key=lambda c: c.cohort_id)
    if state.private:
        deltas = tuple(spent_delta(c.ledger) for c in ordered)
        flags = tuple(c.exhausted for c in ordered)
    else:
        deltas = tuple(None for _ in ordered)
        flags = tuple(None for _ in ordered)

    scores = state.evaluator.evaluate(new_params, t) if state.evaluator is not None else {}
    row = MetricsRow(
        round=t,
        cohort_deltas=deltas,
        exhausted=flags,
        train_loss=scores.get('train_loss'),
        train_acc=scores.get('train_acc'),
        cohort_acc=scores.get('cohort_acc', ()),
        test_micro_f1=scores.get('test_micro_f1'),
        test_macro_f1=scores.get('test_macro_f1'),
        test_weighted_f1=scores.get('test_weighted_f1'),
        wall_ms=(time.perf_counter() - started) * 1000.0 if state.record_timing else None,
    )
    state.history.append(row)
    state.round = t + 1
    logger.debug('round %d done: loss=%s exhausted=%s', t, row.train_loss, flags)
    return row


def dp_server_round(state):
    """Baseline round: every cohort contributes, the server divides by the cohort count."""
    started = time.perf_counter()
    t = state.round
    ordered = state.cohort_order()
    if state.workers > 1 and len(ordered) > 1:
        # each cohort touches only its own ledger; map keeps the reduction order
        with ThreadPoolExecutor(max_workers=len(ordered)) as pool:
            deltas = list(pool.map(lambda c: cohort_delta(state, c, t), ordered))
    else:
        deltas = [cohort_delta(state, c, t) for c in ordered]
    new_params = apply_average(state.global_params, deltas, len(state.cohorts))
    return finish_round(state, new_params, started)
