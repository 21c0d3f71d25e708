import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from cohortdp.exceptions import DataError

from .dataset import Dataset
from .labels import ATTACK_IDS, LABEL_NAMES, label_id
from .loader import load_csv
from .manifest import read_manifest, write_manifest
from .normalize import apply_normalize, fit_normalize
from .partition import partition_clients, partition_cohorts, train_test_split
from .synth import SynthSpec, synth_generate, scaled_class_counts


def write_csv(directory, text):
    path = Path(directory) / 'flows.csv'
    path.write_text(text, encoding='utf-8')
    return path


class LabelTests(SimpleTestCase):
    def test_spellings(self):
        self.assertEqual(label_id('Benign'), 0)
        self.assertEqual(label_id(' infiltration '), LABEL_NAMES.index('Infilteration'))
        self.assertIsNone(label_id('Heartbleed'))


class LoadCsvTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_header_only_gives_empty_dataset(self):
        path = write_csv(self.tmp.name, 'Dst Port,Flow Duration,Label\n')
        d = load_csv(path, expected_width=None)
        self.assertEqual(len(d), 0)
        self.assertEqual(d.width, 2)

    def test_single_row(self):
        path = write_csv(self.tmp.name, 'Dst Port,Flow Duration,Timestamp,Label\n80,12,02/03/2018 08:47:38,Bot\n')
        d = load_csv(path, expected_width=2)
        self.assertEqual(d.labels.tolist(), [1])
        self.assertEqual(d.features.tolist(), [[80.0, 12.0]])

    def test_unknown_label_reports_line(self):
        path = write_csv(self.tmp.name, 'a,b,Label\n1,2,Benign\n3,4,Heartbleed\n')
        with self.assertRaises(DataError) as ctx:
            load_csv(path, expected_width=2)
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn('flows.csv:3', str(ctx.exception))

    def test_ragged_row_reports_line(self):
        path = write_csv(self.tmp.name, 'a,b,Label\n1,2,Benign\n3,4,5,Bot\n')
        with self.assertRaises(DataError) as ctx:
            load_csv(path, expected_width=2)
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn('flows.csv:3', str(ctx.exception))

    def test_non_finite_cells_take_column_median(self):
        path = write_csv(self.tmp.name, 'a,b,Label\n1,Infinity,Benign\n3,2,Bot\nNaN,4,Benign\n5,6,Bot\n')
        d = load_csv(path, expected_width=2)
        self.assertTrue(np.all(np.isfinite(d.features)))
        self.assertEqual(d.features[2, 0], 3.0)
        self.assertEqual(d.features[0, 1], 4.0)

    def test_width_mismatch(self):
        path = write_csv(self.tmp.name, 'a,b,Label\n1,2,Benign\n')
        with self.assertRaises(DataError):
            load_csv(path)

    def test_missing_label_column_and_file(self):
        path = write_csv(self.tmp.name, 'a,b\n1,2\n')
        with self.assertRaises(DataError):
            load_csv(path, expected_width=None)
        with self.assertRaises(DataError):
            load_csv(Path(self.tmp.name) / 'absent.csv')


class NormalizeTests(SimpleTestCase):
    def test_two_values_map_to_unit(self):
        d = Dataset(np.array([[1.0], [3.0]]), np.array([0, 1]))
        out = apply_normalize(d, fit_normalize(d))
        self.assertEqual(out.features[:, 0].tolist(), [-1.0, 1.0])

    def test_constant_column_is_centered_not_divided(self):
        d = Dataset(np.array([[5.0, 1.0], [5.0, 2.0]]), np.array([0, 0]))
        stats = fit_normalize(d)
        self.assertEqual(stats.std[0], 1.0)
        out = apply_normalize(d, stats)
        self.assertEqual(out.features[:, 0].tolist(), [0.0, 0.0])

    def test_empty_training_set(self):
        with self.assertRaises(DataError):
            fit_normalize(Dataset(np.zeros((0, 3)), np.zeros(0)))


class SynthTests(SimpleTestCase):
    def test_histogram_matches_counts(self):
        counts = (30, 5, 0, 7, 1, 1, 2, 3, 4)
        d = synth_generate(SynthSpec(counts), seed=1)
        self.assertEqual(tuple(d.histogram()), counts)
        self.assertEqual(d.width, 79)

    def test_deterministic(self):
        a = synth_generate(SynthSpec(scaled_class_counts(500, 5)), seed=4)
        b = synth_generate(SynthSpec(scaled_class_counts(500, 5)), seed=4)
        self.assertTrue(np.array_equal(a.features, b.features))
        self.assertTrue(np.array_equal(a.labels, b.labels))

    def test_well_separated_classes_are_nearest_centroid_separable(self):
        d = synth_generate(SynthSpec((200,) * 9, separation=8.0), seed=2)
        centroids = np.stack([d.features[d.labels == c].mean(axis=0) for c in range(9)])
        distances = ((d.features[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        accuracy = float(np.mean(distances.argmin(axis=1) == d.labels))
        self.assertGreater(accuracy, 0.95)

    def test_counts_follow_published_proportions(self):
        counts = scaled_class_counts(20000, 200)
        self.assertEqual(counts[0], max(counts))
        self.assertTrue(all(c >= 200 for c in counts))

    def test_all_zero_counts(self):
        with self.assertRaises(DataError):
            synth_generate(SynthSpec((0,) * 9), seed=0)


class PartitionTests(SimpleTestCase):
    def setUp(self):
        self.data = synth_generate(SynthSpec((400,) + (40,) * 8, separation=3.0), seed=0)

    def test_cohorts_split_attacks_evenly_and_disjointly(self):
        assignment = partition_cohorts(ATTACK_IDS, 2, seed=3)
        a, b = assignment.cohort_label_sets
        self.assertEqual((len(a), len(b)), (4, 4))
        self.assertFalse(a & b)
        self.assertEqual(a | b, ATTACK_IDS)

    def test_too_many_cohorts(self):
        with self.assertRaises(DataError):
            partition_cohorts(ATTACK_IDS, 9, seed=0)

    def test_every_row_lands_on_exactly_one_client(self):
        assignment = partition_cohorts(ATTACK_IDS, 2, seed=3)
        shards = partition_clients(self.data, assignment, 5, seed=4)
        rows = np.concatenate([s.rows for s in shards])
        self.assertEqual(sorted(rows.tolist()), list(range(len(self.data))))
        for shard in shards:
            attacks = set(shard.label_ids()) - {0}
            self.assertLessEqual(len(attacks), 2)
            self.assertTrue(attacks <= assignment.cohort_label_sets[shard.cohort_id])
            self.assertIn(0, shard.label_ids())

    def test_one_client_per_cohort_holds_every_cohort_label(self):
        assignment = partition_cohorts(ATTACK_IDS, 2, seed=3)
        shards = partition_clients(self.data, assignment, 1, seed=4)
        self.assertEqual(len(shards), 2)
        for shard in shards:
            expected = assignment.cohort_label_sets[shard.cohort_id] | {0}
            self.assertEqual(set(shard.label_ids()), expected)

    def test_too_few_rows_for_clients(self):
        assignment = partition_cohorts(ATTACK_IDS, 2, seed=3)
        with self.assertRaises(DataError):
            partition_clients(self.data, assignment, 300, seed=0)

    def test_stratified_split(self):
        train, test = train_test_split(self.data, 0.25, seed=1)
        self.assertEqual(len(train) + len(test), len(self.data))
        self.assertEqual(test.histogram().tolist(), [100] + [10] * 8)

    def test_single_row_class_cannot_be_split(self):
        d = Dataset(np.zeros((3, 2)), np.array([0, 0, 1]))
        with self.assertRaises(DataError):
            train_test_split(d, 0.5, seed=0)

    def test_manifest_round_trip(self):
        assignment = partition_cohorts(ATTACK_IDS, 2, seed=3)
        shards = partition_clients(self.data, assignment, 3, seed=4)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_manifest(Path(tmp) / 'm.csv', shards)
            clients = read_manifest(path)
        self.assertEqual([c['rows'] for c in clients], [len(s) for s in shards])
        self.assertEqual([c['label_ids'] for c in clients], [s.label_ids() for s in shards])
