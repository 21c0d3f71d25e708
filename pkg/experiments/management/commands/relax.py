from django.core.management.base import BaseCommand

from experiments import runner
from experiments.cli import reports_errors


class Command(BaseCommand):
    help = "Reopen an exhausted cohort's privacy budget for extra rounds and continue training"

    def add_arguments(self, parser):
        parser.add_argument('checkpoint', help='checkpoint of a finished private run')
        parser.add_argument('--cohort', type=int, required=True, help='cohort id to relax')
        parser.add_argument('--extra-rounds', type=int, default=10)
        parser.add_argument('--out', help='output directory')
        parser.add_argument('--no-record', action='store_true')

    @reports_errors
    def handle(self, *args, **options):
        output = runner.relax(
            options['checkpoint'], options['cohort'], options['extra_rounds'],
            out=options['out'], record=not options['no_record'],
        )
        if output.final is not None and output.final.has_test_scores:
            self.stdout.write(
                f'final test F1 micro={output.final.test_micro_f1:.4f} '
                f'macro={output.final.test_macro_f1:.4f} weighted={output.final.test_weighted_f1:.4f}'
            )
        self.stdout.write(self.style.SUCCESS(f'metrics: {output.metrics_path}'))
