import math

import numpy as np
from django.test import SimpleTestCase

from cohortdp.exceptions import AccountantError, BudgetExhausted
from nn_core.params import LayerShapes, ParamVector, vec_l2_norm

from .accountant import (
    LAMBDA_GRID, CohortLedger, accumulate_round, admits_round, delta_for_epsilon,
    delta_trace, log_moment, relax_ledger, round_log_moments, rounds_to_exhaustion,
)
from .mechanisms import NoiseSpec, clip_update, gaussian_mechanism_satisfies, gaussian_noise


def binomial_log_moment(q, sigma, lam):
    """Closed form of E_{nu0}[(nu1/nu0)^(lam+1)] for integer orders."""
    n = lam + 1
    total = sum(
        math.comb(n, k) * (1 - q) ** (n - k) * q ** k * math.exp(k * (k - 1) / (2 * sigma ** 2))
        for k in range(n + 1)
    )
    return math.log(total)


def vec(*values):
    return ParamVector(np.array(values, dtype=float), LayerShapes((1, len(values) - 1)))


class ClipTests(SimpleTestCase):

    def test_small_update_unchanged(self):
        delta = vec(0.3, 0.4)
        self.assertIs(clip_update(delta, 1.0), delta)

    def test_large_update_scaled_to_bound(self):
        clipped = clip_update(vec(1.2, 1.6), 1.0)
        self.assertAlmostEqual(vec_l2_norm(clipped), 1.0, places=15)
        np.testing.assert_allclose(clipped.values, [0.6, 0.8])

    def test_zero_vector(self):
        self.assertEqual(vec_l2_norm(clip_update(vec(0.0, 0.0), 1.0)), 0.0)

    def test_idempotent(self):
        once = clip_update(vec(3.0, -4.0), 2.0)
        np.testing.assert_array_equal(clip_update(once, 2.0).values, once.values)


class NoiseTests(SimpleTestCase):

    def test_zero_sigma(self):
        out = gaussian_noise(5, NoiseSpec(1.0, 0.0), np.random.default_rng(0))
        self.assertTrue(np.all(out == 0.0))

    def test_moments_of_draws(self):
        draws = gaussian_noise(10 ** 6, NoiseSpec(1.0, 1.0), np.random.default_rng(42))
        self.assertLess(abs(draws.mean()), 0.01)
        self.assertLess(abs(draws.var() - 1.0), 0.01)

    def test_same_stream_same_noise(self):
        spec = NoiseSpec(2.0, 0.5)
        a = gaussian_noise(8, spec, np.random.default_rng(3))
        b = gaussian_noise(8, spec, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_reference_condition(self):
        self.assertTrue(gaussian_mechanism_satisfies(1.0, 6.0, 1e-5))
        self.assertFalse(gaussian_mechanism_satisfies(1.0, 1.0, 1e-5))


class LogMomentTests(SimpleTestCase):

    def test_full_sampling_closed_form_example(self):
        self.assertAlmostEqual(log_moment(1.0, 1.0, 2), 3.0, places=9)

    def test_full_sampling_matches_closed_form_on_grid(self):
        for sigma in (0.5, 1.0, 2.0):
            for lam in LAMBDA_GRID:
                expected = lam * (lam + 1) / (2 * sigma ** 2)
                self.assertLess(abs(log_moment(1.0, sigma, lam) - expected), 1e-9, (sigma, lam))

    def test_subsampled_matches_binomial_expansion(self):
        for lam in (1, 3, 8, 16):
            self.assertAlmostEqual(log_moment(0.05, 1.0, lam), binomial_log_moment(0.05, 1.0, lam), places=9)

    def test_vanishing_sampling_leaks_nothing(self):
        self.assertLess(log_moment(1e-9, 1.0, 32), 1e-6)

    def test_monotone_in_order(self):
        alphas = round_log_moments(0.05, 1.0)
        self.assertTrue(np.all(np.diff(alphas) >= 0.0))

    def test_parameter_errors(self):
        with self.assertRaises(AccountantError):
            log_moment(0.0, 1.0, 2)
        with self.assertRaises(AccountantError):
            log_moment(0.1, 0.0, 2)


class LedgerTests(SimpleTestCase):

    def ledger(self, q=0.05, epsilon=6.0):
        return CohortLedger(epsilon_target=epsilon, delta_threshold=1e-5, q=q, sigma=1.0)

    def test_fresh_ledger(self):
        ledger = self.ledger()
        self.assertTrue(np.all(ledger.log_moments == 0.0))
        self.assertEqual(ledger.rounds_composed, 0)
        self.assertAlmostEqual(delta_for_epsilon(ledger, 6.0) / math.exp(-192), 1.0, places=12)

    def test_composition_is_additive(self):
        ledger = self.ledger()
        for _ in range(17):
            accumulate_round(ledger)
        np.testing.assert_allclose(ledger.log_moments, 17 * round_log_moments(0.05, 1.0), rtol=0, atol=1e-9)
        self.assertEqual(ledger.rounds_composed, 17)

    def test_larger_sampling_dominates(self):
        low, high = self.ledger(q=0.05), self.ledger(q=0.10)
        for _ in range(5):
            accumulate_round(low)
            accumulate_round(high)
        self.assertTrue(np.all(high.log_moments >= low.log_moments))

    def test_delta_monotonicity(self):
        ledger = self.ledger()
        previous = delta_for_epsilon(ledger, 6.0)
        for _ in range(10):
            accumulate_round(ledger)
            current = delta_for_epsilon(ledger, 6.0)
            self.assertGreaterEqual(current, previous)
            previous = current
        self.assertLessEqual(delta_for_epsilon(ledger, 8.0), delta_for_epsilon(ledger, 6.0))

    def test_ledger_admits_exactly_allowance_rounds(self):
        T = rounds_to_exhaustion(0.10, 1.0, 6.0, 1e-5)
        ledger = self.ledger(q=0.10)
        executed = 0
        while admits_round(ledger):
            accumulate_round(ledger)
            executed += 1
        self.assertEqual(executed, T - 1)
        self.assertLessEqual(delta_for_epsilon(ledger, 6.0), 1e-5)

    def test_exhausted_ledger_refuses(self):
        ledger = self.ledger()
        ledger.exhausted = True
        with self.assertRaises(BudgetExhausted):
            accumulate_round(ledger)

    def test_relaxation_grants_fixed_rounds(self):
        ledger = self.ledger()
        ledger.exhausted = True
        relax_ledger(ledger, 2)
        self.assertTrue(admits_round(ledger))
        accumulate_round(ledger)
        accumulate_round(ledger)
        self.assertTrue(ledger.exhausted)
        with self.assertRaises(AccountantError):
            relax_ledger(self.ledger(), 3)

    def test_zero_relaxation_stays_closed(self):
        ledger = self.ledger()
        ledger.exhausted = True
        relax_ledger(ledger, 0)
        self.assertFalse(admits_round(ledger))

    def test_record_round_trip(self):
        ledger = self.ledger()
        accumulate_round(ledger)
        restored = CohortLedger.from_record(ledger.to_record())
        np.testing.assert_array_equal(restored.log_moments, ledger.log_moments)
        self.assertEqual(restored.rounds_composed, 1)


class ExhaustionTests(SimpleTestCase):

    def test_looser_epsilon_lasts_longer(self):
        self.assertGreater(
            rounds_to_exhaustion(0.05, 1.0, 8.0, 1e-5),
            rounds_to_exhaustion(0.05, 1.0, 6.0, 1e-5),
        )

    def test_smaller_sampling_lasts_longer(self):
        rounds = [rounds_to_exhaustion(q, 1.0, 6.0, 1e-5) for q in (0.015, 0.03, 0.05, 0.075, 0.10)]
        self.assertEqual(rounds, sorted(rounds, reverse=True))
        self.assertEqual(len(set(rounds)), len(rounds))

    def test_trace_ends_at_exhaustion(self):
        trace = delta_trace(0.10, 1.0, 6.0, 1e-5)
        self.assertEqual(trace[-1][0], rounds_to_exhaustion(0.10, 1.0, 6.0, 1e-5))
        deltas = [d for _, d in trace]
        self.assertTrue(all(b > a for a, b in zip(deltas, deltas[1:])))
        self.assertGreater(deltas[-1], 1e-5)
        self.assertLessEqual(deltas[-2], 1e-5)

    def test_round_cap(self):
        with self.assertRaises(AccountantError):
            rounds_to_exhaustion(0.05, 1.0, 6.0, 1e-5, cap=3)


class ExhaustionRegressionTests(SimpleTestCase):
    """Exhaustion rounds of the default setup (sigma=1, threshold 1e-5), pinned against drift."""

    def test_strict_cohort_at_default_sampling(self):
        self.assertEqual(rounds_to_exhaustion(0.05, 1.0, 6.0, 1e-5), 190)

    def test_loose_cohort_at_default_sampling(self):
        self.assertEqual(rounds_to_exhaustion(0.05, 1.0, 8.0, 1e-5), 365)

    def test_sampling_grid(self):
        rounds = [rounds_to_exhaustion(q, 1.0, 6.0, 1e-5) for q in (0.015, 0.03, 0.05, 0.075, 0.10)]
        self.assertEqual(rounds, [2821, 599, 190, 74, 37])
