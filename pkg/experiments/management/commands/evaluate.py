from django.core.management.base import BaseCommand

from experiments import runner
from experiments.cli import reports_errors


class Command(BaseCommand):
    help = "Per-class precision, recall and F1 of a checkpoint's model on the test split"

    def add_arguments(self, parser):
        parser.add_argument('checkpoint')
        parser.add_argument('--out', help='also write the report as CSV into this directory')

    @reports_errors
    def handle(self, *args, **options):
        report, names, path = runner.evaluate(options['checkpoint'], options['out'])
        self.stdout.write(f'{"label":<26}{"precision":>10}{"recall":>10}{"f1":>10}{"support":>9}')
        for i, name in enumerate(names):
            self.stdout.write(
                f'{name:<26}{report.precision[i]:>10.4f}{report.recall[i]:>10.4f}'
                f'{report.per_class[i]:>10.4f}{report.support[i]:>9d}'
            )
        self.stdout.write(
            f'micro {report.micro:.4f}  macro {report.macro:.4f}  weighted {report.weighted:.4f}'
        )
        if path is not None:
            self.stdout.write(self.style.SUCCESS(f'report: {path}'))
