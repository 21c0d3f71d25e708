import numpy as np
from django.test import SimpleTestCase

from cohortdp.exceptions import MetricsError

from .scores import confusion, f1_report, score


class ConfusionTests(SimpleTestCase):
    def test_counts_true_by_predicted(self):
        cm = confusion([0, 1, 1, 2], [0, 0, 1, 2], 3)
        self.assertEqual(cm.counts.tolist(), [[1, 1, 0], [0, 1, 0], [0, 0, 1]])
        self.assertEqual(cm.total, 4)

    def test_rejects_out_of_range_ids(self):
        with self.assertRaises(MetricsError):
            confusion([0, 3], [0, 1], 3)

    def test_rejects_mismatched_lengths(self):
        with self.assertRaises(MetricsError):
            confusion([0, 1], [0], 2)


class F1Tests(SimpleTestCase):
    def test_two_class_example(self):
        report = score([0, 0, 1], [0, 1, 1], 2)
        self.assertAlmostEqual(report.micro, 2 / 3, places=12)
        # both classes score 2/3
        self.assertAlmostEqual(report.macro, 2 / 3, places=12)
        self.assertAlmostEqual(report.weighted, 2 / 3, places=12)

    def test_perfect_predictions(self):
        labels = np.array([0, 1, 2, 2, 1])
        report = score(labels, labels, 3)
        self.assertEqual(report.micro, 1.0)
        self.assertEqual(report.macro, 1.0)
        self.assertEqual(report.weighted, 1.0)

    def test_micro_equals_accuracy(self):
        rng = np.random.default_rng(11)
        labels = rng.integers(0, 9, size=1000)
        predictions = rng.integers(0, 9, size=1000)
        report = score(predictions, labels, 9)
        self.assertAlmostEqual(report.micro, float(np.mean(predictions == labels)), places=12)

    def test_zero_support_class_left_out_of_macro(self):
        # class 2 never occurs and is never predicted
        with_absent = score([0, 1, 1], [0, 1, 0], 3)
        without = score([0, 1, 1], [0, 1, 0], 2)
        self.assertAlmostEqual(with_absent.macro, without.macro, places=12)
        self.assertEqual(with_absent.support[2], 0)

    def test_invariant_to_row_order(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 4, size=200)
        predictions = rng.integers(0, 4, size=200)
        order = rng.permutation(200)
        a = score(predictions, labels, 4)
        b = score(predictions[order], labels[order], 4)
        self.assertEqual((a.micro, a.macro, a.weighted), (b.micro, b.macro, b.weighted))

    def test_all_zero_matrix_raises(self):
        with self.assertRaises(MetricsError):
            f1_report(confusion([], [], 3))
