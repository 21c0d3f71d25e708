from django.core.management.base import BaseCommand

from experiments import runner
from experiments.cli import reports_errors


class Command(BaseCommand):
    help = 'Print delta after each composed round until the cohort budget is exhausted'

    def add_arguments(self, parser):
        parser.add_argument('--q', type=float, default=0.05, help='client sampling fraction')
        parser.add_argument('--sigma', type=float, default=1.0)
        parser.add_argument('--epsilon', type=float, default=6.0)
        parser.add_argument('--threshold', type=float, default=1e-5, help='delta threshold Q')
        parser.add_argument('--cap', type=int, help='give up after this many rounds')

    @reports_errors
    def handle(self, *args, **options):
        trace = runner.accountant_table(
            options['q'], options['sigma'], options['epsilon'], options['threshold'], options['cap']
        )
        self.stdout.write('rounds,delta')
        for rounds, delta in trace:
            self.stdout.write(f'{rounds},{delta!r}')
        exhausted_at = trace[-1][0]
        self.stdout.write(self.style.SUCCESS(
            f'exhausted at round {exhausted_at}; {exhausted_at - 1} rounds can be trained'
        ))
