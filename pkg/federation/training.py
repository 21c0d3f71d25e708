"""Building a federation from a config and driving it to exhaustion or the round cap."""

import logging

from django.conf import settings

from cohortdp.exceptions import CohortDPError
from continual.rehearsal import RehearsalSchedule
from continual.rounds import dp_r_server_round, dp_si_server_round
from continual.synaptic import SIState
from nn_core.optim import OptimizerConfig
from nn_core.params import LayerShapes, init_params
from privacy.accountant import CohortLedger, relax_ledger, rounds_to_exhaustion
from privacy.mechanisms import NoiseSpec

from .evaluation import RoundEvaluator
from .server import dp_server_round
from .state import CohortRuntime, FederationState, LocalTraining

logger = logging.getLogger(__name__)

NONPRIVATE = 'nonprivate'
DP = 'dp'
DP_R = 'dp-r'
DP_SI = 'dp-si'
ALGORITHMS = (NONPRIVATE, DP, DP_R, DP_SI)


def cohort_allowances(state, cap=None):
    """T_c per cohort id: the rounds its ledger admits at the configured sigma."""
    cap = settings.COHORTDP['ACCOUNTANT_ROUND_CAP'] if cap is None else cap
    return {
        c.cohort_id: rounds_to_exhaustion(
            c.ledger.q, c.ledger.sigma, c.epsilon, c.ledger.delta_threshold,
            c.ledger.lambdas, cap=cap,
        ) - 1
        for c in state.cohorts
    }


def build_federation(config, data):
    if config.algorithm not in ALGORITHMS:
        raise ValueError(f'unknown algorithm {config.algorithm!r}')
    shapes = LayerShapes((data.train.width, *config.hidden, data.train.num_classes))
    params = init_params(shapes, config.model_seed)
    private = config.algorithm != NONPRIVATE
    m = config.clients_sampled

    cohorts = []
    for cohort_id, epsilon in enumerate(config.epsilons):
        shards = data.cohort_shards(cohort_id)
        ledger = None
        if private:
            ledger = CohortLedger(
                epsilon_target=float(epsilon),
                delta_threshold=config.delta_threshold,
                q=m / len(shards),
                sigma=config.sigma,
            )
        cohorts.append(CohortRuntime(cohort_id, shards, ledger, m, float(epsilon)))

    local = LocalTraining(
        epochs=config.local_epochs,
        batch_size=config.batch_size,
        optimizer=OptimizerConfig(config.optimizer, config.learning_rate),
    )
    state = FederationState(
        global_params=params,
        cohorts=cohorts,
        algorithm=config.algorithm,
        noise=NoiseSpec(config.sensitivity, config.sigma) if private else None,
        local=local,
        root_seed=config.seed,
        sigma_schedule=tuple(config.sigma_schedule),
        workers=config.workers or settings.COHORTDP['WORKERS'],
        record_timing=config.record_timing,
    )
    if config.algorithm == DP_R:
        state.rehearsal = RehearsalSchedule.build(cohort_allowances(state), config.rhos(), config.t_max)
        logger.info('rehearsal schedule: %s', state.rehearsal.to_record())
    elif config.algorithm == DP_SI:
        state.si = SIState.start(
            [c.cohort_id for c in cohorts], params, gamma=config.gamma, xi=config.xi
        )
    return state


def advance(state):
    """Run one server round of the state's algorithm."""
    if state.algorithm == DP_R:
        return dp_r_server_round(state, state.rehearsal)
    if state.algorithm == DP_SI:
        return dp_si_server_round(state, state.si)
    return dp_server_round(state)


def finalize(state):
    """Make sure the last history row carries test scores."""
    if not state.history or state.evaluator is None:
        return
    last = state.history[-1]
    if not last.has_test_scores:
        scores = state.evaluator.test_scores(state.global_params)
        last.test_micro_f1 = scores['test_micro_f1']
        last.test_macro_f1 = scores['test_macro_f1']
        last.test_weighted_f1 = scores['test_weighted_f1']


def run_training(config, data, state=None, max_rounds=None, stop_after=None, on_round=None):
    """Loop server rounds until every cohort is exhausted or the round cap is hit.

    stop_after pauses at that round without finalizing, for checkpoint and resume.
    """
    if state is None:
        state = build_federation(config, data)
    if state.evaluator is None:
        state.evaluator = RoundEvaluator.for_shards(
            data.train, data.test, data.shards, config.eval_every
        )
    limit = config.max_rounds if max_rounds is None else max_rounds

    while state.round < limit and not state.all_exhausted():
        if stop_after is not None and state.round >= stop_after:
            return state, state.history
        advance(state)
        if on_round is not None:
            on_round(state)

    finalize(state)
    logger.info(
        '%s training stopped after %d rounds (queries per cohort: %s)',
        state.algorithm, state.round, [c.query_count for c in state.cohorts],
    )
    return state, state.history


def relax_cohort(state, cohort_id, extra_rounds):
    """Reopen one cohort of a fully exhausted run for extra rounds.

    Under dp-r the reopened cohort participates in every remaining round.
    """
    if not state.private:
        raise CohortDPError('a nonprivate run has no privacy budget to relax')
    cohorts = {c.cohort_id: c for c in state.cohorts}
    if cohort_id not in cohorts:
        raise CohortDPError(f'unknown cohort {cohort_id}; known: {sorted(cohorts)}')
    if not state.all_exhausted():
        raise CohortDPError('relaxation needs a run in which every cohort is exhausted')

    relax_ledger(cohorts[cohort_id].ledger, extra_rounds)
    if state.algorithm == DP_R:
        state.rehearsal.relax(cohort_id)
    logger.info('relaxing cohort %d by %d rounds from round %d', cohort_id, extra_rounds, state.round)
    return state
