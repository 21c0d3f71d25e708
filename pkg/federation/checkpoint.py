"""JSON checkpoints of a FederationState.

Floats are written with repr precision so a resumed run continues bit-exactly.
Client shards are not stored; they are rebuilt from the config on restore.
"""

import json
import os
from pathlib import Path

import numpy as np

from cohortdp.exceptions import CheckpointError
from continual.rehearsal import RehearsalSchedule
from continual.synaptic import SIState
from nn_core.optim import OptimizerConfig
from nn_core.params import LayerShapes, ParamVector
from privacy.accountant import CohortLedger
from privacy.mechanisms import NoiseSpec

from .state import CohortRuntime, FederationState, LocalTraining, MetricsRow

FORMAT_VERSION = 1


def state_to_record(state, config=None):
    return {
        'version': FORMAT_VERSION,
        'config': config.to_dict() if config is not None else None,
        'algorithm': state.algorithm,
        'round': state.round,
        'root_seed': state.root_seed,
        'dims': list(state.global_params.shapes.dims),
        'params': [float(x) for x in state.global_params.values],
        'noise': None if state.noise is None else {
            'sensitivity': state.noise.sensitivity,
            'sigma': state.noise.sigma,
        },
        'local': {
            'epochs': state.local.epochs,
            'batch_size': state.local.batch_size,
            'optimizer': state.local.optimizer.name,
            'learning_rate': state.local.optimizer.learning_rate,
            'stability': state.local.optimizer.stability,
        },
        'sigma_schedule': [float(s) for s in state.sigma_schedule],
        'record_timing': state.record_timing,
        'cohorts': [
            {
                'cohort_id': c.cohort_id,
                'epsilon': c.epsilon,
                'm': c.m,
                'clients': c.client_count,
                'query_count': c.query_count,
                'ledger': None if c.ledger is None else c.ledger.to_record(),
            }
            for c in state.cohorts
        ],
        'rehearsal': None if state.rehearsal is None else state.rehearsal.to_record(),
        'si': None if state.si is None else state.si.to_record(),
        'history': [row.to_record() for row in state.history],
    }


def save_checkpoint(path, state, config=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + '.tmp')
    try:
        with tmp.open('w', encoding='utf-8') as fh:
            json.dump(state_to_record(state, config), fh)
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointError(f'cannot write checkpoint {path}: {exc}') from exc
    return path


def load_checkpoint(path):
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as fh:
            record = json.load(fh)
    except FileNotFoundError:
        raise CheckpointError(f'checkpoint {path} not found') from None
    except (OSError, ValueError) as exc:
        raise CheckpointError(f'cannot read checkpoint {path}: {exc}') from exc
    if record.get('version') != FORMAT_VERSION:
        raise CheckpointError(f'{path}: unsupported checkpoint version {record.get("version")!r}')
    return record


def restore_state(record, data, workers=1):
    """Rebuild the FederationState a record describes, over freshly prepared shards."""
    try:
        shapes = LayerShapes(tuple(record['dims']))
        params = ParamVector(np.asarray(record['params'], dtype=np.float64), shapes)
        cohorts = []
        for entry in record['cohorts']:
            shards = data.cohort_shards(entry['cohort_id'])
            if len(shards) != entry['clients']:
                raise CheckpointError(
                    f"cohort {entry['cohort_id']} has {len(shards)} clients, "
                    f"checkpoint expects {entry['clients']}"
                )
            ledger = None if entry['ledger'] is None else CohortLedger.from_record(entry['ledger'])
            cohorts.append(CohortRuntime(
                entry['cohort_id'], shards, ledger, entry['m'], entry['epsilon'],
                query_count=entry['query_count'],
            ))
        local = record['local']
        noise = record['noise']
        return FederationState(
            global_params=params,
            cohorts=cohorts,
            algorithm=record['algorithm'],
            noise=None if noise is None else NoiseSpec(**noise),
            local=LocalTraining(
                local['epochs'], local['batch_size'],
                OptimizerConfig(local['optimizer'], local['learning_rate'], local['stability']),
            ),
            root_seed=record['root_seed'],
            round=record['round'],
            history=[MetricsRow.from_record(r) for r in record['history']],
            sigma_schedule=tuple(record['sigma_schedule']),
            rehearsal=None if record['rehearsal'] is None else RehearsalSchedule.from_record(record['rehearsal']),
            si=None if record['si'] is None else SIState.from_record(record['si']),
            workers=workers,
            record_timing=record['record_timing'],
        )
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f'malformed checkpoint record: {exc}') from exc
