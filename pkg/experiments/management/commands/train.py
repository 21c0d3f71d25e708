from django.core.management.base import BaseCommand

from experiments import runner
from experiments.cli import add_config_arguments, config_from_options, reports_errors


class Command(BaseCommand):
    help = 'Train with the configured algorithm until every cohort is exhausted or the round cap'

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument('--no-record', action='store_true', help='skip the database run record')

    @reports_errors
    def handle(self, *args, **options):
        config = config_from_options(options)
        self.stdout.write(f'training {config.algorithm} (seed {config.seed}, epsilons {list(config.epsilons)})')
        output = runner.train(config, options['out'], record=not options['no_record'])
        if output.final is not None and output.final.has_test_scores:
            self.stdout.write(
                f'final test F1 micro={output.final.test_micro_f1:.4f} '
                f'macro={output.final.test_macro_f1:.4f} weighted={output.final.test_weighted_f1:.4f}'
            )
        self.stdout.write(f'rounds: {output.rounds}, client queries per cohort: {list(output.query_counts)}')
        self.stdout.write(self.style.SUCCESS(f'metrics: {output.metrics_path}'))
        self.stdout.write(self.style.SUCCESS(f'checkpoint: {output.checkpoint_path}'))
