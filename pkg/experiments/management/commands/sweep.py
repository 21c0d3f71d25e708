from django.core.management.base import BaseCommand, CommandError

from experiments import runner
from experiments.cli import add_config_arguments, config_from_options, reports_errors


class Command(BaseCommand):
    help = 'Train once per value and seed of one hyperparameter; write a summary CSV with medians'

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument('parameter', choices=runner.SWEEP_PARAMETERS)
        parser.add_argument('values', nargs='+', type=float)
        parser.add_argument('--seeds', type=int, help='number of seeds (default: sweep_seeds)')
        parser.add_argument('--jobs', type=int, default=1, help='parallel training processes')

    @reports_errors
    def handle(self, *args, **options):
        config = config_from_options(options)
        if options['jobs'] < 1:
            raise CommandError('--jobs must be at least 1')
        count = options['seeds'] or config.sweep_seeds
        seeds = range(config.seed, config.seed + count)
        summary, path = runner.sweep(
            config, options['parameter'], options['values'], seeds=seeds,
            out=options['out'], jobs=options['jobs'],
        )
        for row in summary:
            if row['seed'] == 'median':
                self.stdout.write(
                    f'{options["parameter"]}={row["value"]}: median micro F1 {row.get("micro_f1")}, '
                    f'rounds {row.get("rounds")}'
                )
        self.stdout.write(self.style.SUCCESS(f'summary: {path}'))
