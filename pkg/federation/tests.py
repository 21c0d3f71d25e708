import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from cohortdp.exceptions import DataError
from experiments.config import build_config
from ingest.dataset import Dataset
from ingest.partition import ClientShard
from ingest.pipeline import prepare
from nn_core.mlp import Batch, backward
from nn_core.optim import OptimizerConfig
from nn_core.params import LayerShapes, ParamVector, init_params, vec_l2_norm, zeros_like
from privacy.accountant import CohortLedger, round_log_moments, rounds_to_exhaustion
from privacy.mechanisms import NoiseSpec

from . import seeding
from .checkpoint import load_checkpoint, restore_state, save_checkpoint
from .client import dp_client_update
from .cohort import dp_cohort_round, sample_clients
from .server import apply_average, dp_server_round
from .state import CohortRuntime, FederationState, LocalTraining
from .training import advance, build_federation, run_training

NAMES = ('benign', 'a', 'b')


def make_shard(client_id, cohort_id, n, seed, width=4):
    rng = np.random.default_rng(seed)
    data = Dataset(rng.standard_normal((n, width)), rng.integers(0, len(NAMES), n), NAMES)
    return ClientShard(client_id, cohort_id, np.arange(n), data)


def make_cohort(cohort_id, clients, m, ledger=None, rows=12, width=4):
    shards = [make_shard(cohort_id * 100 + k, cohort_id, rows, seed=cohort_id * 100 + k, width=width)
              for k in range(clients)]
    return CohortRuntime(cohort_id, shards, ledger, m, epsilon=6.0 + cohort_id)


def small_config(**overrides):
    values = {
        'algorithm': 'dp',
        'clients_per_cohort': 10,
        'sample_fraction': 0.2,
        'hidden': [8],
        'synth_total': 600,
        'synth_min_per_class': 30,
        'separation': 6.0,
        'eval_every': 2,
        'max_rounds': 60,
        'workers': 1,
    }
    values.update(overrides)
    return build_config(values)


class ClientUpdateTests(SimpleTestCase):
    def setUp(self):
        self.params = init_params(LayerShapes((4, 5, 3)), seed=0)
        self.shard = make_shard(0, 0, 10, seed=1)

    def test_zero_epochs_gives_zero_delta(self):
        update = dp_client_update(self.params, self.shard, 0, 4, OptimizerConfig(), seed=3)
        self.assertEqual(update.norm, 0.0)
        assert_array_equal(update.delta.values, 0.0)

    def test_full_batch_sgd_is_one_gradient_step(self):
        opt = OptimizerConfig('sgd', learning_rate=0.05)
        update = dp_client_update(self.params, self.shard, 1, len(self.shard), opt, seed=3)
        grad, _ = backward(self.params, Batch(self.shard.features, self.shard.labels))
        assert_allclose(update.delta.values, -0.05 * grad.values, rtol=1e-10, atol=1e-14)

    def test_norm_matches_delta(self):
        update = dp_client_update(self.params, self.shard, 2, 3, OptimizerConfig(), seed=4)
        self.assertEqual(update.norm, vec_l2_norm(update.delta))
        self.assertGreater(update.norm, 0.0)

    def test_same_seed_same_update(self):
        a = dp_client_update(self.params, self.shard, 1, 3, OptimizerConfig(), seed=9)
        b = dp_client_update(self.params, self.shard, 1, 3, OptimizerConfig(), seed=9)
        assert_array_equal(a.delta.values, b.delta.values)

    def test_empty_shard_raises(self):
        empty = ClientShard(5, 0, np.arange(0), Dataset(np.zeros((0, 4)), np.zeros(0), NAMES))
        with self.assertRaises(DataError):
            dp_client_update(self.params, empty, 1, 3, OptimizerConfig(), seed=0)


class CohortRoundTests(SimpleTestCase):
    def setUp(self):
        self.params = init_params(LayerShapes((4, 5, 3)), seed=0)
        self.local = LocalTraining(epochs=1, batch_size=4)

    def test_sampled_clients_are_distinct(self):
        cohort = make_cohort(0, clients=10, m=4)
        for t in range(20):
            chosen = sample_clients(cohort, t, root_seed=1)
            self.assertEqual(len(set(chosen.tolist())), 4)
            self.assertEqual(chosen.tolist(), sorted(chosen.tolist()))

    def test_noiseless_single_client_passes_delta_through(self):
        ledger = CohortLedger(8.0, 1e-5, q=1.0, sigma=1.0)
        cohort = make_cohort(0, clients=1, m=1, ledger=ledger)
        delta = dp_cohort_round(cohort, self.params, NoiseSpec(100.0, 0.0), 0, 7, self.local)
        shard = cohort.shards[0]
        expected = dp_client_update(
            self.params, shard, 1, 4, self.local.optimizer,
            seeding.stream(7, seeding.CLIENT, 0, 0, shard.client_id),
        )
        assert_array_equal(delta.values, expected.delta.values)
        self.assertEqual(ledger.rounds_composed, 1)
        self.assertEqual(cohort.query_count, 1)

    def test_noise_scale_is_s_sigma_over_m(self):
        params = init_params(LayerShapes((50, 100, 10)), seed=1)
        cohort = make_cohort(0, clients=6, m=4, width=50)
        local = LocalTraining(epochs=0, batch_size=4)
        samples = [
            dp_cohort_round(cohort, params, NoiseSpec(1.0, 1.0), t, 3, local).values
            for t in range(10)
        ]
        std = float(np.std(np.concatenate(samples)))
        self.assertAlmostEqual(std, 0.25, delta=0.25 * 0.02)

    def test_exhausted_cohort_returns_zero_and_leaves_ledger(self):
        ledger = CohortLedger(6.0, 1e-5, q=0.5, sigma=1.0)
        ledger.exhausted = True
        cohort = make_cohort(0, clients=4, m=2, ledger=ledger)
        delta = dp_cohort_round(cohort, self.params, NoiseSpec(), 0, 1, self.local)
        assert_array_equal(delta.values, 0.0)
        self.assertEqual(ledger.rounds_composed, 0)
        self.assertEqual(cohort.query_count, 0)

    def test_cohort_closes_when_next_round_would_overspend(self):
        ledger = CohortLedger(6.0, 1e-5, q=0.5, sigma=1.0)
        cohort = make_cohort(0, clients=4, m=2, ledger=ledger)
        allowance = rounds_to_exhaustion(0.5, 1.0, 6.0, 1e-5) - 1
        for t in range(allowance + 3):
            dp_cohort_round(cohort, self.params, NoiseSpec(), t, 1, self.local)
        self.assertTrue(ledger.exhausted)
        self.assertEqual(ledger.rounds_composed, allowance)
        self.assertEqual(cohort.query_count, allowance * 2)


class ServerRoundTests(SimpleTestCase):
    def make_state(self, cohorts, noise=None):
        params = init_params(LayerShapes((4, 5, 3)), seed=0)
        return FederationState(
            global_params=params, cohorts=cohorts, algorithm='dp' if noise else 'nonprivate',
            noise=noise, local=LocalTraining(epochs=1, batch_size=4), root_seed=5,
        )

    def test_single_cohort_moves_by_its_delta(self):
        state = self.make_state([make_cohort(0, clients=3, m=2)])
        twin = make_cohort(0, clients=3, m=2)
        start = state.global_params
        expected = dp_cohort_round(twin, start, None, 0, 5, state.local)
        dp_server_round(state)
        assert_array_equal(state.global_params.values, start.values + expected.values)
        self.assertEqual(state.round, 1)
        self.assertEqual(len(state.history), 1)

    def test_opposite_deltas_cancel(self):
        params = init_params(LayerShapes((4, 5, 3)), seed=2)
        d = ParamVector(np.random.default_rng(0).standard_normal(len(params)), params.shapes)
        minus = ParamVector(-d.values, params.shapes)
        assert_array_equal(apply_average(params, [d, minus], 2).values, params.values)

    def test_all_exhausted_leaves_params(self):
        ledgers = [CohortLedger(6.0, 1e-5, q=0.5, sigma=1.0) for _ in range(2)]
        for ledger in ledgers:
            ledger.exhausted = True
        state = self.make_state(
            [make_cohort(c, clients=4, m=2, ledger=ledgers[c]) for c in range(2)], noise=NoiseSpec()
        )
        before = state.global_params.values.copy()
        row = dp_server_round(state)
        assert_array_equal(state.global_params.values, before)
        self.assertEqual(row.exhausted, (True, True))

    def test_zero_delta_unchanged(self):
        params = init_params(LayerShapes((4, 5, 3)), seed=2)
        out = apply_average(params, [zeros_like(params)], 1)
        assert_array_equal(out.values, params.values)


class TrainingTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.config = small_config()
        cls.data = prepare(cls.config)

    def test_baseline_runs_until_both_cohorts_exhaust(self):
        state, history = run_training(self.config, self.data)
        self.assertTrue(state.all_exhausted())
        self.assertEqual(len(history), state.round)
        self.assertEqual(history[-1].exhausted, (True, True))
        self.assertTrue(history[-1].has_test_scores)
        for c in range(2):
            deltas = [row.cohort_deltas[c] for row in history]
            self.assertEqual(deltas, sorted(deltas))
            self.assertLessEqual(deltas[-1], 1e-5)

    def test_query_counts_match_allowance(self):
        state, _ = run_training(self.config, self.data)
        for cohort in state.cohorts:
            allowance = rounds_to_exhaustion(cohort.ledger.q, 1.0, cohort.epsilon, 1e-5) - 1
            self.assertEqual(cohort.query_count, allowance * cohort.m)

    def test_equal_cohorts_exhaust_together(self):
        config = small_config(epsilons=[6.0, 6.0])
        _, history = run_training(config, prepare(config))
        first = next(row for row in history if any(row.exhausted))
        self.assertEqual(first.exhausted, (True, True))

    def test_nonprivate_runs_to_cap(self):
        config = small_config(algorithm='nonprivate', max_rounds=4)
        state, history = run_training(config, self.data)
        self.assertEqual(state.round, 4)
        self.assertEqual(history[0].cohort_deltas, (None, None))
        self.assertEqual(history[0].exhausted, (None, None))
        self.assertFalse(history[0].has_test_scores)
        self.assertTrue(history[1].has_test_scores)

    def test_rerun_is_bit_identical(self):
        _, a = run_training(self.config, self.data)
        _, b = run_training(self.config, prepare(self.config))
        self.assertEqual([r.to_record() for r in a], [r.to_record() for r in b])

    def test_resume_matches_straight_run(self):
        straight, _ = run_training(self.config, self.data)
        paused, _ = run_training(self.config, self.data, stop_after=3)
        self.assertEqual(paused.round, 3)
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(Path(tmp) / 'ckpt.json', paused, self.config)
            resumed_state = restore_state(load_checkpoint(path), self.data)
        resumed, _ = run_training(self.config, self.data, state=resumed_state)
        assert_array_equal(resumed.global_params.values, straight.global_params.values)
        self.assertEqual(
            [r.to_record() for r in resumed.history], [r.to_record() for r in straight.history]
        )

    def test_parallel_clients_do_not_change_results(self):
        _, serial = run_training(self.config, self.data)
        _, threaded = run_training(small_config(workers=4), self.data)
        self.assertEqual([r.to_record() for r in serial], [r.to_record() for r in threaded])

    def test_build_uses_sampled_fraction(self):
        state = build_federation(self.config, self.data)
        for cohort in state.cohorts:
            self.assertEqual(cohort.m, 2)
            self.assertEqual(cohort.ledger.q, 0.2)


class SigmaScheduleTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = prepare(small_config())

    def test_each_round_composes_its_own_sigma(self):
        state = build_federation(small_config(sigma_schedule=[2.0, 1.5]), self.data)
        advance(state)
        advance(state)
        for cohort in state.cohorts:
            q = cohort.ledger.q
            expected = round_log_moments(q, 2.0) + round_log_moments(q, 1.5)
            assert_allclose(cohort.ledger.log_moments, expected, rtol=0, atol=1e-12)
            self.assertEqual(cohort.ledger.rounds_composed, 2)

    def test_schedule_moves_exhaustion(self):
        _, constant = run_training(small_config(), self.data)
        state, scheduled = run_training(small_config(sigma_schedule=[1.0, 0.5]), self.data)
        # one round at sigma 0.5 and q 0.2 would overshoot the threshold for both cohorts
        self.assertEqual(len(scheduled), 2)
        self.assertEqual(scheduled[-1].exhausted, (True, True))
        for cohort in state.cohorts:
            self.assertEqual(cohort.ledger.rounds_composed, 1)
            assert_allclose(cohort.ledger.log_moments, round_log_moments(cohort.ledger.q, 1.0), rtol=0, atol=1e-12)
        self.assertGreater(len(constant), len(scheduled))
