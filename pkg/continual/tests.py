import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from cohortdp.exceptions import ContinualStateError
from experiments.acceptance import accuracy_drop, first_exhaustion
from federation.tests import small_config
from federation.training import run_training
from ingest.pipeline import prepare
from nn_core.params import LayerShapes, ParamVector

from .rehearsal import CohortSchedule, RehearsalSchedule, rehearsal_should_run
from .synaptic import SIState, si_accumulate, si_consolidate, si_gradient, si_loss


def vec(values):
    values = np.asarray(values, dtype=np.float64)
    # n biases behind a 1-wide input; the weights stay zero
    shapes = LayerShapes((1, len(values)))
    full = np.zeros(shapes.param_count)
    full[-len(values):] = values
    return ParamVector(full, shapes)


class RehearsalScheduleTests(SimpleTestCase):
    def test_quarter_reserve_schedule(self):
        sched = RehearsalSchedule.build({0: 40}, {0: 0.25}, t_max=100)
        runs = [t for t in range(100) if rehearsal_should_run(sched, 0, t)]
        self.assertEqual(runs[:30], list(range(30)))
        self.assertEqual(runs[30:], list(range(30, 100, 7))[:10])
        self.assertEqual(len(runs), 40)
        self.assertEqual(sched.cohorts[0].interval, 7)

    def test_no_reserve_is_dense_then_silent(self):
        sched = RehearsalSchedule.build({0: 23}, {0: 0.0}, t_max=200)
        runs = [t for t in range(200) if rehearsal_should_run(sched, 0, t)]
        self.assertEqual(runs, list(range(23)))
        self.assertFalse(sched.finished(0, 22))
        self.assertTrue(sched.finished(0, 23))

    def test_participations_never_exceed_allowance(self):
        for rho in (0.1, 0.3, 0.5, 0.7, 0.9):
            for allowance in (1, 7, 10, 23, 64):
                for t_max in (allowance, allowance + 5, 3 * allowance):
                    sched = RehearsalSchedule.build({0: allowance}, {0: rho}, t_max=t_max)
                    count = sum(rehearsal_should_run(sched, 0, t) for t in range(4 * t_max))
                    self.assertLessEqual(count, allowance, (rho, allowance, t_max))

    def test_default_t_max_is_longest_allowance(self):
        sched = RehearsalSchedule.build({0: 10, 1: 30}, {0: 0.5, 1: 0.0})
        self.assertEqual(sched.cohorts[0].t_max, 30)

    def test_query_is_pure(self):
        sched = RehearsalSchedule.build({0: 40}, {0: 0.25}, t_max=100)
        before = sched.to_record()
        for t in range(100):
            rehearsal_should_run(sched, 0, t)
        self.assertEqual(sched.to_record(), before)

    def test_uninitialized_schedule_raises(self):
        with self.assertRaises(ContinualStateError):
            rehearsal_should_run(None, 0, 0)
        with self.assertRaises(ContinualStateError):
            rehearsal_should_run(RehearsalSchedule.build({0: 4}, {0: 0.0}), 1, 0)

    def test_rejects_rho_of_one(self):
        with self.assertRaises(ContinualStateError):
            CohortSchedule(rho=1.0, allowance=10, t_max=20)


class SynapticTests(SimpleTestCase):
    def start(self, size=2, xi=0.1):
        return SIState.start([0, 1], vec(np.zeros(size)), xi=xi)

    def test_accumulate_is_coordinate_product(self):
        si = self.start()
        si_accumulate(si, 0, vec([1.0, -1.0]), vec([0.5, 0.5]))
        assert_array_equal(si.importance[0][-2:], [0.5, -0.5])
        si_accumulate(si, 0, vec([1.0, -1.0]), vec([0.5, 0.5]))
        assert_array_equal(si.importance[0][-2:], [1.0, -1.0])

    def test_zero_change_leaves_importance(self):
        si = self.start()
        si_accumulate(si, 0, vec([3.0, 2.0]), vec([0.0, 0.0]))
        assert_array_equal(si.importance[0], 0.0)

    def test_consolidation_strengths(self):
        si = SIState.start([0], vec([0.0, 0.0, 0.0]), xi=0.1)
        si.importance[0][-3:] = [0.5, 0.0, 0.3]
        si_consolidate(si, 0, vec([1.0, 4.0, 0.0]))
        assert_allclose(si.omegas[0][-3:], [0.5 / 1.1, 0.0, 3.0], rtol=1e-15)

    def test_negative_importance_clamped(self):
        si = SIState.start([0], vec([0.0]), xi=0.1)
        si.importance[0][-1] = -2.0
        si_consolidate(si, 0, vec([1.0]))
        self.assertEqual(si.omegas[0][-1], 0.0)

    def test_double_consolidation_and_late_accumulate_raise(self):
        si = self.start()
        si_consolidate(si, 0, vec([1.0, 1.0]))
        with self.assertRaises(ContinualStateError):
            si_consolidate(si, 0, vec([1.0, 1.0]))
        with self.assertRaises(ContinualStateError):
            si_accumulate(si, 0, vec([1.0, 1.0]), vec([1.0, 1.0]))

    def test_loss_and_gradient_by_hand(self):
        si = SIState.start([0], vec([0.0]), xi=0.1)
        si.anchors[0] = vec([1.0]).values
        si.omegas[0] = np.zeros(2)
        si.omegas[0][-1] = 2.0
        self.assertEqual(si_loss(si, [0], vec([0.0])), 2.0)
        si.omegas[0][-1] = 1.0
        self.assertEqual(si_gradient(si, [0], vec([0.0])).values[-1], -2.0)

    def test_zero_at_anchor(self):
        si = self.start()
        si.importance[0][-2:] = [0.4, 0.9]
        si_consolidate(si, 0, vec([1.0, -2.0]))
        anchor = vec([1.0, -2.0])
        self.assertEqual(si_loss(si, [0], anchor), 0.0)
        assert_array_equal(si_gradient(si, [0], anchor).values, 0.0)

    def test_loss_adds_over_cohorts(self):
        si = self.start()
        si.importance[0][-2:] = [0.4, 0.9]
        si.importance[1][-2:] = [0.2, 0.1]
        si_consolidate(si, 0, vec([1.0, -2.0]))
        si_consolidate(si, 1, vec([0.5, 3.0]))
        theta = vec([0.1, 0.2])
        self.assertAlmostEqual(
            si_loss(si, [0, 1], theta), si_loss(si, [0], theta) + si_loss(si, [1], theta), places=14
        )

    def test_unconsolidated_cohort_raises(self):
        with self.assertRaises(ContinualStateError):
            si_loss(self.start(), [0], vec([0.0, 0.0]))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        shapes = LayerShapes((3, 4, 2))
        si = SIState.start([0, 1], ParamVector(rng.standard_normal(shapes.param_count), shapes))
        for c in (0, 1):
            si.importance[c] = rng.uniform(0.0, 1.0, shapes.param_count)
            si_consolidate(si, c, ParamVector(rng.standard_normal(shapes.param_count), shapes))
        theta = ParamVector(rng.standard_normal(shapes.param_count), shapes)
        analytic = si_gradient(si, [0, 1], theta).values
        numeric = np.zeros_like(analytic)
        h = 1e-5
        for i in range(analytic.shape[0]):
            up, down = theta.values.copy(), theta.values.copy()
            up[i] += h
            down[i] -= h
            numeric[i] = (
                si_loss(si, [0, 1], ParamVector(up, shapes)) - si_loss(si, [0, 1], ParamVector(down, shapes))
            ) / (2 * h)
        rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic)
        self.assertLess(rel, 1e-8)

    def test_descent_step_moves_toward_anchor(self):
        si = self.start()
        si.importance[0][-2:] = [0.5, 0.5]
        si_consolidate(si, 0, vec([1.0, -1.0]))
        theta = vec([0.0, 0.0])
        step = theta.values - 0.1 * si_gradient(si, [0], theta).values
        anchor = si.anchors[0]
        self.assertTrue(np.all(np.abs(anchor - step) <= np.abs(anchor - theta.values)))

    def test_record_round_trip(self):
        si = self.start()
        si.importance[0][-2:] = [0.4, 0.9]
        si_consolidate(si, 0, vec([1.0, -2.0]))
        back = SIState.from_record(si.to_record())
        assert_array_equal(back.omegas[0], si.omegas[0])
        assert_array_equal(back.task_start, si.task_start)
        self.assertEqual(back.consolidated_ids(), [0])


class ContinualTrainingTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = prepare(small_config())

    def history(self, **overrides):
        state, history = run_training(small_config(**overrides), self.data)
        return state, [row.to_record() for row in history]

    def test_rehearsal_without_reserve_matches_baseline(self):
        _, baseline = self.history(algorithm='dp')
        _, rehearsal = self.history(algorithm='dp-r', rho=0.0)
        self.assertEqual(rehearsal, baseline)

    def test_rehearsal_keeps_within_budget(self):
        state, _ = self.history(algorithm='dp-r', rho_per_cohort=[0.5, 0.25])
        allowances = {c: s.allowance for c, s in state.rehearsal.cohorts.items()}
        for cohort in state.cohorts:
            self.assertLessEqual(cohort.ledger.rounds_composed, allowances[cohort.cohort_id])
            self.assertLessEqual(cohort.query_count, allowances[cohort.cohort_id] * cohort.m)
        self.assertTrue(state.all_exhausted())

    def test_si_without_weight_follows_baseline_until_exhaustion(self):
        _, baseline = self.history(algorithm='dp')
        _, si = self.history(algorithm='dp-si', gamma=0.0)
        first = next(i for i, row in enumerate(baseline) if any(row['exhausted']))
        self.assertEqual(si[:first], baseline[:first])

    def test_si_queries_equal_baseline(self):
        base_state, _ = self.history(algorithm='dp')
        si_state, _ = self.history(algorithm='dp-si')
        self.assertEqual(
            [c.query_count for c in si_state.cohorts], [c.query_count for c in base_state.cohorts]
        )

    def test_si_consolidates_every_cohort(self):
        state, _ = self.history(algorithm='dp-si')
        self.assertEqual(state.si.consolidated_ids(), [0, 1])
        for omega in state.si.omegas.values():
            self.assertTrue(np.all(omega >= 0.0))

    def test_exhaustion_drop_starts_from_shared_model(self):
        base_state, _ = run_training(small_config(algorithm='dp'), self.data)
        si_state, _ = run_training(small_config(algorithm='dp-si'), self.data)
        first = first_exhaustion(base_state.history)
        self.assertEqual(first_exhaustion(si_state.history), first)
        self.assertEqual(
            [r.to_record() for r in si_state.history[:first]],
            [r.to_record() for r in base_state.history[:first]],
        )
        self.assertIsNotNone(accuracy_drop(base_state.history))
        self.assertIsNotNone(accuracy_drop(si_state.history))
