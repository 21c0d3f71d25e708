from django.core.management.base import BaseCommand

from experiments import acceptance, runner
from experiments.cli import add_config_arguments, config_from_options, reports_errors


class Command(BaseCommand):
    help = 'Compare the algorithms at desk scale over several seeds (forgetting, relaxation, robustness)'

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument(
            'checks', nargs='*', help=f'any of {", ".join(acceptance.CHECKS)} (default: all)'
        )
        parser.add_argument('--seeds', type=int, help='number of seeds (default: sweep_seeds)')
        parser.add_argument('--extra-rounds', type=int, default=acceptance.RELAX_EXTRA_ROUNDS)

    @reports_errors
    def handle(self, *args, **options):
        config = config_from_options(options)
        count = options['seeds'] or config.sweep_seeds
        checks = options['checks'] or acceptance.CHECKS
        comparisons = acceptance.run_checks(
            config, range(config.seed, config.seed + count), checks, options['extra_rounds'],
        )
        for c in comparisons:
            mark = self.style.SUCCESS('PASS') if c.passed else self.style.ERROR('FAIL')
            self.stdout.write(f'{mark} {c.check:<11} {c.claim:<52} {c.left:.4f} vs {c.right:.4f}')
        path = acceptance.write_comparisons(
            runner.output_dir(options['out']) / f'acceptance-{runner.config_hash(config)}.csv', comparisons
        )
        passed = sum(c.passed for c in comparisons)
        self.stdout.write(f'{passed} of {len(comparisons)} comparisons hold; table: {path}')
