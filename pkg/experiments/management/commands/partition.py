from django.core.management.base import BaseCommand

from experiments import runner
from experiments.cli import add_config_arguments, config_from_options, reports_errors


class Command(BaseCommand):
    help = 'Split the data into cohorts and clients; write the shard manifest and normalization stats'

    def add_arguments(self, parser):
        add_config_arguments(parser)

    @reports_errors
    def handle(self, *args, **options):
        config = config_from_options(options)
        data, manifest, stats = runner.partition(config, options['out'])
        for cohort_id, labels in enumerate(data.assignment.cohort_label_sets):
            names = ', '.join(data.train.label_names[i] for i in sorted(labels))
            self.stdout.write(f'cohort {cohort_id}: {names}')
        self.stdout.write(self.style.SUCCESS(f'manifest: {manifest}'))
        self.stdout.write(self.style.SUCCESS(f'normalization stats: {stats}'))
