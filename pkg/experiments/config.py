"""Experiment configuration: flat YAML validated into a frozen ExperimentConfig."""

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import yaml
from rest_framework.exceptions import ValidationError

from .serializers import ExperimentConfigSerializer


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str
    epsilons: tuple
    clients_per_cohort: int
    sample_fraction: float
    sigma: float
    sensitivity: float
    delta_threshold: float
    sigma_schedule: tuple
    hidden: tuple
    optimizer: str
    learning_rate: float
    batch_size: int
    local_epochs: int
    rho: float
    rho_per_cohort: tuple
    gamma: float
    xi: float
    t_max: int
    data_path: str
    synth_total: int
    synth_min_per_class: int
    separation: float
    test_fraction: float
    seed: int
    partition_seed: int
    init_seed: int
    eval_every: int
    max_rounds: int
    record_timing: bool
    workers: int
    sweep_seeds: int

    @property
    def num_cohorts(self):
        return len(self.epsilons)

    @property
    def private(self):
        return self.algorithm != 'nonprivate'

    @property
    def clients_sampled(self):
        """m: clients drawn per cohort per round."""
        return min(self.clients_per_cohort, max(1, round(self.sample_fraction * self.clients_per_cohort)))

    @property
    def data_seed(self):
        return self.seed if self.partition_seed is None else self.partition_seed

    @property
    def model_seed(self):
        return self.seed if self.init_seed is None else self.init_seed

    def rhos(self):
        """rho per cohort id; the most lenient cohort keeps its budget to the end by default."""
        if self.rho_per_cohort:
            return {c: float(r) for c, r in enumerate(self.rho_per_cohort)}
        loosest = max(range(self.num_cohorts), key=lambda c: (self.epsilons[c], c))
        return {
            c: 0.0 if c == loosest and self.num_cohorts > 1 else float(self.rho)
            for c in range(self.num_cohorts)
        }

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def with_overrides(self, **overrides):
        return build_config({**self.to_dict(), **overrides})


def build_config(values):
    """Validate a flat mapping and freeze it; raises ValidationError."""
    serializer = ExperimentConfigSerializer(data=dict(values))
    serializer.is_valid(raise_exception=True)
    data = dict(serializer.validated_data)
    for key, value in data.items():
        if isinstance(value, list):
            data[key] = tuple(value)
    return ExperimentConfig(**data)


def load_config(path=None, **overrides):
    """Read a flat YAML document; overrides whose value is None are ignored."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ValidationError({'config': f'{path} does not exist.'})
        with open(path, encoding='utf-8') as fh:
            values = yaml.safe_load(fh) or {}
        if not isinstance(values, dict):
            raise ValidationError({'config': f'{path} must hold a key: value mapping.'})
        nested = sorted(
            k for k, v in values.items()
            if isinstance(v, dict) or (isinstance(v, list) and any(isinstance(x, (dict, list)) for x in v))
        )
        if nested:
            raise ValidationError({k: 'Nested values are not allowed.' for k in nested})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(values)


def config_hash(config):
    values = config.to_dict()
    values.pop('seed')
    payload = json.dumps(values, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:12]


def seeded(config, seed):
    return replace(config, seed=int(seed))
