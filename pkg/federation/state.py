from dataclasses import dataclass, field

from nn_core.optim import OptimizerConfig
from nn_core.params import ParamVector


@dataclass(frozen=True)
class ClientUpdate:
    delta: ParamVector
    norm: float


@dataclass(frozen=True)
class LocalTraining:
    epochs: int = 1
    batch_size: int = 10
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError('local epochs must be nonnegative')
        if self.batch_size < 1:
            raise ValueError('batch size must be at least 1')


@dataclass
class CohortRuntime:
    cohort_id: int
    shards: list
    ledger: object
    m: int
    epsilon: float
    query_count: int = 0

    def __post_init__(self):
        if not 1 <= self.m <= len(self.shards):
            raise ValueError(
                f'cohort {self.cohort_id}: cannot sample {self.m} of {len(self.shards)} clients'
            )

    @property
    def client_count(self):
        return len(self.shards)

    @property
    def q(self):
        return self.m / len(self.shards)

    @property
    def exhausted(self):
        return self.ledger is not None and self.ledger.exhausted


@dataclass
class MetricsRow:
    round: int
    cohort_deltas: tuple
    exhausted: tuple
    train_loss: float
    train_acc: float
    cohort_acc: tuple = ()
    test_micro_f1: float = None
    test_macro_f1: float = None
    test_weighted_f1: float = None
    wall_ms: float = None

    @property
    def has_test_scores(self):
        return self.test_micro_f1 is not None

    def to_record(self):
        return {
            'round': self.round,
            'cohort_deltas': list(self.cohort_deltas),
            'exhausted': list(self.exhausted),
            'train_loss': self.train_loss,
            'train_acc': self.train_acc,
            'cohort_acc': list(self.cohort_acc),
            'test_micro_f1': self.test_micro_f1,
            'test_macro_f1': self.test_macro_f1,
            'test_weighted_f1': self.test_weighted_f1,
            'wall_ms': self.wall_ms,
        }

    @classmethod
    def from_record(cls, record):
        record = dict(record)
        for key in ('cohort_deltas', 'exhausted', 'cohort_acc'):
            record[key] = tuple(record[key])
        return cls(**record)


@dataclass
class FederationState:
    global_params: ParamVector
    cohorts: list
    algorithm: str
    noise: object
    local: LocalTraining
    root_seed: int
    round: int = 0
    history: list = field(default_factory=list)
    sigma_schedule: tuple = ()
    rehearsal: object = None
    si: object = None
    workers: int = 1
    record_timing: bool = False
    # attached at run time, never checkpointed
    evaluator: object = None

    @property
    def private(self):
        return self.noise is not None

    def cohort_order(self):
        """Fixed reduction order: increasing epsilon, then cohort id."""
        return sorted(self.cohorts, key=lambda c: (c.epsilon, c.cohort_id))

    def sigma_for(self, t):
        if t < len(self.sigma_schedule):
            return float(self.sigma_schedule[t])
        return None if self.noise is None else self.noise.sigma

    def all_exhausted(self):
        return self.private and all(c.exhausted for c in self.cohorts)
