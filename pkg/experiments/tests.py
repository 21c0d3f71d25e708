import tempfile
from io import StringIO
from pathlib import Path

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from rest_framework.exceptions import ValidationError

from federation.state import MetricsRow
from ingest.manifest import read_manifest

from .acceptance import Comparison, accuracy_drop, first_exhaustion
from .config import build_config, config_hash, load_config
from .models import ExperimentRun
from .records import read_metrics, write_metrics

SMOKE = settings.BASE_DIR / 'configs' / 'smoke.yaml'


def write_yaml(directory, text):
    path = Path(directory) / 'config.yaml'
    path.write_text(SMOKE.read_text(encoding='utf-8') + text, encoding='utf-8')
    return str(path)


def curve(accuracies, exhausted_from):
    return [
        MetricsRow(t, (0.0, 0.0), (t >= exhausted_from, False), 1.0, acc)
        for t, acc in enumerate(accuracies)
    ]


class AcceptanceHelperTests(SimpleTestCase):
    def test_drop_measured_over_window_after_exhaustion(self):
        history = curve([0.5, 0.6, 0.7, 0.62, 0.66, 0.55], exhausted_from=3)
        self.assertEqual(first_exhaustion(history), 3)
        self.assertEqual(first_exhaustion(history, cohort_id=1), None)
        self.assertAlmostEqual(accuracy_drop(history), 0.7 - 0.62, places=12)

    def test_rise_after_exhaustion_is_negative_drop(self):
        history = curve([0.5, 0.6, 0.65, 0.7], exhausted_from=2)
        self.assertAlmostEqual(accuracy_drop(history), 0.6 - 0.65, places=12)

    def test_no_exhaustion_no_drop(self):
        self.assertIsNone(accuracy_drop(curve([0.5, 0.6], exhausted_from=10)))

    def test_comparison_rules(self):
        self.assertTrue(Comparison('c', 'x', 0.80, 0.78, 0.02).passed)
        self.assertFalse(Comparison('c', 'x', 0.79, 0.78, 0.02).passed)
        self.assertFalse(Comparison('c', 'x', 0.5, 0.5, strict=True).passed)
        self.assertFalse(Comparison('c', 'x', float('nan'), 0.0).passed)


class ConfigTests(SimpleTestCase):
    def test_defaults_are_reference_setup(self):
        config = build_config({})
        self.assertEqual(config.algorithm, 'dp')
        self.assertEqual(config.epsilons, (6.0, 8.0))
        self.assertEqual(config.sample_fraction, 0.05)
        self.assertEqual((config.sigma, config.sensitivity, config.delta_threshold), (1.0, 1.0, 1e-5))
        self.assertEqual((config.batch_size, config.learning_rate), (10, 0.1))
        self.assertEqual((config.gamma, config.rho), (1.0, 0.25))
        self.assertEqual(config.clients_sampled, 5)

    def test_reserve_goes_to_all_but_loosest_cohort(self):
        self.assertEqual(build_config({}).rhos(), {0: 0.25, 1: 0.0})
        self.assertEqual(build_config({'rho_per_cohort': [0.5, 0.1]}).rhos(), {0: 0.5, 1: 0.1})

    def test_unknown_key_rejected(self):
        with self.assertRaises(ValidationError):
            build_config({'epsilon': 6})

    def test_out_of_range_values_rejected(self):
        for bad in ({'sample_fraction': 0.0}, {'rho': 1.0}, {'epsilons': [6, -1]}, {'rho_per_cohort': [0.1]}):
            with self.assertRaises(ValidationError, msg=bad):
                build_config(bad)

    def test_schedule_needs_positive_noise_when_private(self):
        with self.assertRaises(ValidationError):
            build_config({'sigma_schedule': [1.0, 0.0]})
        config = build_config({'algorithm': 'nonprivate', 'sigma_schedule': [0.0]})
        self.assertEqual(tuple(config.sigma_schedule), (0.0,))

    def test_nested_yaml_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'nested.yaml'
            path.write_text('privacy:\n  sigma: 1.0\n', encoding='utf-8')
            with self.assertRaises(ValidationError):
                load_config(path)

    def test_overrides_and_hash(self):
        config = load_config(SMOKE, seed=7, algorithm='dp-si')
        self.assertEqual((config.seed, config.algorithm), (7, 'dp-si'))
        self.assertEqual(config_hash(config), config_hash(load_config(SMOKE, seed=8, algorithm='dp-si')))
        self.assertNotEqual(config_hash(config), config_hash(load_config(SMOKE, algorithm='dp')))


class MetricsFileTests(SimpleTestCase):
    def test_rows_parse_back(self):
        rows = [
            MetricsRow(0, (1e-9, 2e-10), (False, False), 0.7, 0.5, (0.4, 0.6)),
            MetricsRow(1, (3e-6, 1e-9), (True, False), 0.6, 0.55, (0.45, 0.65), 0.5, 0.25, 0.4),
            MetricsRow(2, (None, None), (None, None), 0.5, 0.6, (0.5, 0.7), wall_ms=12.5),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_metrics(Path(tmp) / 'm.csv', rows, 2)
            header = path.read_text(encoding='utf-8').splitlines()[0]
            back = read_metrics(path)
        self.assertEqual(back, rows)
        self.assertTrue(header.startswith('round,cohort_0_delta,cohort_1_delta,exhausted_flags,train_loss'))
        self.assertTrue(header.endswith('cohort_0_acc,cohort_1_acc,wall_ms'))


class CommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def call(self, *args, **options):
        stdout = StringIO()
        call_command(*args, stdout=stdout, **options)
        return stdout.getvalue()

    def train(self, config=None, **options):
        self.call('train', config=config or str(SMOKE), out=self.out, **options)
        return ExperimentRun.objects.latest('id')

    def test_accountant_prints_increasing_deltas(self):
        text = self.call('accountant', q=0.5, sigma=1.0, epsilon=6.0, threshold=1e-5)
        lines = text.splitlines()
        self.assertEqual(lines[0], 'rounds,delta')
        deltas = [float(line.split(',')[1]) for line in lines[1:-1]]
        self.assertEqual(deltas, sorted(set(deltas)))
        self.assertGreater(deltas[-1], 1e-5)
        self.assertIn('exhausted at round', lines[-1])

    def test_partition_is_disjoint_and_repeatable(self):
        self.call('partition', config=str(SMOKE), out=self.out)
        manifest = next(Path(self.out).glob('*.manifest.csv'))
        first = manifest.read_bytes()
        clients = read_manifest(manifest)
        by_cohort = {}
        for client in clients:
            by_cohort.setdefault(client['cohort_id'], set()).update(client['label_ids'])
        attacks = [labels - {0} for _, labels in sorted(by_cohort.items())]
        self.assertEqual([len(a) for a in attacks], [4, 4])
        self.assertFalse(attacks[0] & attacks[1])
        self.call('partition', config=str(SMOKE), out=self.out)
        self.assertEqual(manifest.read_bytes(), first)

    def test_single_client_holds_whole_cohort(self):
        config = write_yaml(self.out, 'clients_per_cohort: 1\nsample_fraction: 1.0\n')
        self.call('partition', config=config, out=self.out)
        clients = read_manifest(next(Path(self.out).glob('*.manifest.csv')))
        self.assertEqual(len(clients), 2)
        self.assertEqual(sorted(len(c['label_ids']) for c in clients), [5, 5])

    def test_train_writes_metrics_checkpoint_and_record(self):
        run = self.train()
        self.assertEqual(run.status, 'FINISHED')
        rows = read_metrics(run.metrics_path)
        self.assertEqual(len(rows), run.rounds)
        self.assertEqual(run.round_metrics.count(), run.rounds)
        self.assertEqual(rows[-1].exhausted, (True, True))
        self.assertEqual(run.final_micro_f1, rows[-1].test_micro_f1)
        self.assertTrue(Path(run.checkpoint_path).exists())

    def test_same_seed_same_metrics_file(self):
        first = Path(self.train().metrics_path).read_bytes()
        second = Path(self.train().metrics_path).read_bytes()
        self.assertEqual(first, second)

    def test_rehearsal_without_reserve_reproduces_baseline_file(self):
        baseline = Path(self.train().metrics_path).read_bytes()
        config = write_yaml(self.out, 'rho: 0.0\n')
        rehearsal = Path(self.train(config=config, algo='dp-r').metrics_path).read_bytes()
        self.assertEqual(rehearsal, baseline)

    def test_nonprivate_leaves_delta_columns_empty(self):
        config = write_yaml(self.out, 'max_rounds: 3\n')
        run = self.train(config=config, algo='nonprivate')
        rows = read_metrics(run.metrics_path)
        self.assertEqual(len(rows), 3)
        self.assertTrue(all(r.cohort_deltas == (None, None) for r in rows))

    def test_relax_zero_rounds_repeats_final_row(self):
        run = self.train()
        self.call('relax', run.checkpoint_path, cohort=0, extra_rounds=0, out=self.out)
        relaxed = ExperimentRun.objects.latest('id')
        self.assertEqual(relaxed.kind, 'RELAX')
        rows = read_metrics(relaxed.metrics_path)
        self.assertEqual(rows, read_metrics(run.metrics_path)[-1:])

    def test_relax_adds_rounds_for_one_cohort(self):
        for algo in ('dp', 'dp-r', 'dp-si'):
            run = self.train(algo=algo)
            self.call('relax', run.checkpoint_path, cohort=1, extra_rounds=3, out=self.out)
            relaxed = ExperimentRun.objects.latest('id')
            rows = read_metrics(relaxed.metrics_path)
            self.assertEqual(len(rows), 4, algo)
            self.assertEqual(relaxed.query_counts[0], run.query_counts[0], algo)
            self.assertEqual(relaxed.query_counts[1], run.query_counts[1] + 3 * 2, algo)
            self.assertEqual(rows[-1].exhausted, (True, True), algo)

    def test_relax_rejects_bad_requests(self):
        run = self.train()
        with self.assertRaises(CommandError):
            self.call('relax', run.checkpoint_path, cohort=5, extra_rounds=1, out=self.out)
        config = write_yaml(self.out, 'max_rounds: 2\n')
        nonprivate = self.train(config=config, algo='nonprivate')
        with self.assertRaises(CommandError):
            self.call('relax', nonprivate.checkpoint_path, cohort=0, extra_rounds=1, out=self.out)

    def test_evaluate_reports_every_class(self):
        run = self.train()
        text = self.call('evaluate', run.checkpoint_path, out=self.out)
        self.assertIn('Benign', text)
        self.assertIn('weighted', text)
        self.assertTrue(list(Path(self.out).glob('*.classes.csv')))
        record = ExperimentRun.objects.latest('id')
        self.assertEqual((record.kind, record.status), ('EVALUATE', 'FINISHED'))
        self.assertEqual(record.rounds, run.rounds)
        self.assertAlmostEqual(record.final_micro_f1, run.final_micro_f1, places=12)
        self.assertTrue(record.metrics_path.endswith('.classes.csv'))

    def test_sweep_writes_medians(self):
        self.call('sweep', 'gamma', '0.5', '1.0', config=str(SMOKE), algo='dp-si', seeds=2, out=self.out)
        summary = next(Path(self.out).glob('sweep-gamma-*.csv')).read_text(encoding='utf-8').splitlines()
        self.assertEqual(len(summary), 1 + 2 * 3)
        self.assertEqual(sum(1 for line in summary if ',median,' in line), 2)
        record = ExperimentRun.objects.latest('id')
        self.assertEqual((record.kind, record.status), ('SWEEP', 'FINISHED'))
        self.assertEqual(record.rounds, 4)
        self.assertTrue(record.metrics_path.endswith('.csv'))
        self.assertEqual(ExperimentRun.objects.filter(kind='TRAIN').count(), 0)

    def test_median_row_is_middle_of_seeds(self):
        self.call('sweep', 'rho', '0.25', config=str(SMOKE), algo='dp-r', seeds=3, out=self.out)
        lines = next(Path(self.out).glob('sweep-rho-*.csv')).read_text(encoding='utf-8').splitlines()
        per_seed = sorted(int(line.split(',')[6]) for line in lines[1:] if ',median,' not in line)
        median = next(line for line in lines if ',median,' in line)
        self.assertEqual(float(median.split(',')[6]), float(per_seed[1]))

    def test_sample_fraction_sweep_rounds_decrease(self):
        self.call(
            'sweep', 'sample_fraction', '0.1', '0.2', '0.3', config=str(SMOKE), seeds=1, out=self.out
        )
        lines = next(Path(self.out).glob('sweep-sample_fraction-*.csv')).read_text(encoding='utf-8').splitlines()
        rounds = [int(line.split(',')[6]) for line in lines[1:] if ',median,' not in line]
        self.assertEqual(len(rounds), 3)
        self.assertGreater(rounds[0], rounds[1])
        self.assertGreater(rounds[1], rounds[2])

    def test_acceptance_writes_one_row_per_comparison(self):
        text = self.call(
            'acceptance', 'forgetting', 'relaxation', config=str(SMOKE), seeds=1, extra_rounds=2, out=self.out
        )
        self.assertIn('of 11 comparisons hold', text)
        lines = next(Path(self.out).glob('acceptance-*.csv')).read_text(encoding='utf-8').splitlines()
        self.assertEqual(lines[0], 'check,claim,left,right,margin,passed')
        self.assertEqual(len(lines), 1 + 5 + 2 * 3)
        self.assertNotIn('nan', '\n'.join(lines))

    def test_acceptance_rejects_unknown_check(self):
        with self.assertRaises(CommandError):
            self.call('acceptance', 'speed', config=str(SMOKE), seeds=1, out=self.out)

    def test_invalid_config_is_a_command_error(self):
        config = write_yaml(self.out, 'learning_rte: 0.1\n')
        with self.assertRaises(CommandError):
            self.call('train', config=config, out=self.out)


class RunApiTests(TestCase):
    def setUp(self):
        self.run = ExperimentRun.objects.create(
            algorithm='dp', config_hash='abc123', seed=0, status='FINISHED', rounds=2,
        )
        self.run.round_metrics.create(round=0, cohort_deltas=[1e-8, 1e-9], exhausted_flags='00')
        self.run.round_metrics.create(round=1, cohort_deltas=[2e-8, 2e-9], exhausted_flags='10')

    def test_list_and_filter(self):
        response = self.client.get('/api/runs/')
        self.assertEqual(response.status_code, 200)
        self.assertEqual(len(response.json()), 1)
        self.assertEqual(len(self.client.get('/api/runs/?algorithm=dp-si').json()), 0)

    def test_detail_and_metrics(self):
        detail = self.client.get(f'/api/runs/{self.run.pk}/').json()
        self.assertEqual(detail['metrics_count'], 2)
        self.assertEqual(detail['status_display'], 'Finished')
        metrics = self.client.get(f'/api/runs/{self.run.pk}/metrics/?since=0').json()
        self.assertEqual([m['round'] for m in metrics], [1])

    def test_non_numeric_since_is_400(self):
        response = self.client.get(f'/api/runs/{self.run.pk}/metrics/?since=last')
        self.assertEqual(response.status_code, 400)
        self.assertIn('error', response.json())

    def test_missing_run_is_404(self):
        self.assertEqual(self.client.get('/api/runs/999/').status_code, 404)
