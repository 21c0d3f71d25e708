"""Arguments and error handling shared by the management commands."""

import functools
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError

from cohortdp.exceptions import CohortDPError

from .config import load_config
from .serializers import ALGORITHM_CHOICES


def add_config_arguments(parser):
    parser.add_argument('--config', help='flat YAML experiment config (default: the desk profile)')
    parser.add_argument('--seed', type=int, help='root seed; overrides the config')
    parser.add_argument('--out', help='output directory (default: COHORTDP OUTPUT_DIR)')
    parser.add_argument('--algo', choices=ALGORITHM_CHOICES, help='algorithm; overrides the config')


def config_from_options(options):
    path = options.get('config')
    if path is None:
        default = Path(settings.COHORTDP['DEFAULT_CONFIG'])
        path = default if default.exists() else None
    return load_config(path, seed=options.get('seed'), algorithm=options.get('algo'))


def format_validation(exc):
    detail = exc.detail
    if isinstance(detail, dict):
        return '; '.join(
            f'{key}: {" ".join(str(m) for m in (msgs if isinstance(msgs, list) else [msgs]))}'
            for key, msgs in detail.items()
        )
    return str(detail)


def reports_errors(handle):
    """Turn simulator and validation errors into CommandError."""
    @functools.wraps(handle)
    def wrapper(self, *args, **options):
        try:
            return handle(self, *args, **options)
        except ValidationError as exc:
            raise CommandError(f'invalid config: {format_validation(exc)}') from exc
        except CohortDPError as exc:
            raise CommandError(str(exc)) from exc
    return wrapper
