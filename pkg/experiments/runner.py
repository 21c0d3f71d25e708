"""Experiment driver behind the management commands."""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django.conf import settings
from django.utils import timezone

from cohortdp.exceptions import CohortDPError
from federation.checkpoint import load_checkpoint, restore_state, save_checkpoint
from federation.evaluation import RoundEvaluator
from federation.training import NONPRIVATE, relax_cohort, run_training
from ingest.manifest import write_manifest, write_norm_stats
from ingest.pipeline import prepare
from privacy.accountant import delta_trace

from .config import build_config, config_hash, seeded
from .models import ExperimentRun, RoundMetric
from .records import exhausted_string, write_class_report, write_metrics

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = ('rho', 'gamma', 'sample_fraction')


@dataclass(frozen=True)
class RunOutput:
    metrics_path: Path
    checkpoint_path: Path
    rounds: int
    final: object
    query_counts: tuple
    run_id: int = None


def output_dir(out=None):
    path = Path(out) if out else Path(settings.COHORTDP['OUTPUT_DIR'])
    path.mkdir(parents=True, exist_ok=True)
    return path


def run_stem(config):
    return f'{config.algorithm}-{config_hash(config)}-s{config.seed}'


# -- partition ---------------------------------------------------------------

def partition(config, out=None):
    data = prepare(config)
    directory = output_dir(out)
    stem = f'partition-{config_hash(config)}'
    manifest = write_manifest(directory / f'{stem}.manifest.csv', data.shards)
    stats = write_norm_stats(directory / f'{stem}.normstats.csv', data.stats)
    return data, manifest, stats


# -- database side records ---------------------------------------------------

def _open_run(kind, config, record):
    if not record:
        return None
    return ExperimentRun.objects.create(
        kind=kind,
        algorithm=config.algorithm,
        config_hash=config_hash(config),
        seed=config.seed,
        status='RUNNING',
        config=config.to_dict(),
    )


def _finish_run(run, **fields):
    if run is None:
        return
    for name, value in fields.items():
        setattr(run, name, value)
    run.status = 'FINISHED'
    run.finished_at = timezone.now()
    run.save()


def _close_run(run, output, rows):
    if run is None:
        return
    scores = {}
    if output.final is not None:
        scores = {
            'final_micro_f1': output.final.test_micro_f1,
            'final_macro_f1': output.final.test_macro_f1,
            'final_weighted_f1': output.final.test_weighted_f1,
        }
    _finish_run(
        run,
        rounds=output.rounds,
        query_counts=list(output.query_counts),
        metrics_path=str(output.metrics_path),
        checkpoint_path=str(output.checkpoint_path or ''),
        **scores,
    )
    RoundMetric.objects.bulk_create([
        RoundMetric(
            run=run,
            round=row.round,
            cohort_deltas=list(row.cohort_deltas),
            exhausted_flags=exhausted_string(row.exhausted),
            train_loss=row.train_loss,
            train_acc=row.train_acc,
            cohort_acc=list(row.cohort_acc),
            test_micro_f1=row.test_micro_f1,
            test_macro_f1=row.test_macro_f1,
            test_weighted_f1=row.test_weighted_f1,
            wall_ms=row.wall_ms,
        )
        for row in rows
    ])


def _fail_run(run, exc):
    if run is None:
        return
    run.status = 'FAILED'
    run.error = str(exc)
    run.finished_at = timezone.now()
    run.save()


# -- train ---------------------------------------------------------------------

def train(config, out=None, data=None, record=True, checkpoint_every=None):
    """Run the configured algorithm; write the metrics CSV and the final checkpoint."""
    directory = output_dir(out)
    stem = run_stem(config)
    metrics_path = directory / f'{stem}.metrics.csv'
    checkpoint_path = directory / f'{stem}.ckpt.json'
    every = settings.COHORTDP['CHECKPOINT_EVERY'] if checkpoint_every is None else checkpoint_every

    def on_round(state):
        if every and state.round % every == 0:
            save_checkpoint(checkpoint_path, state, config)

    run = _open_run('TRAIN', config, record)
    try:
        data = prepare(config) if data is None else data
        state, history = run_training(config, data, on_round=on_round)
        write_metrics(metrics_path, history, config.num_cohorts)
        save_checkpoint(checkpoint_path, state, config)
    except CohortDPError as exc:
        _fail_run(run, exc)
        raise
    output = RunOutput(
        metrics_path, checkpoint_path, state.round,
        history[-1] if history else None,
        tuple(c.query_count for c in state.cohorts),
        run.pk if run else None,
    )
    _close_run(run, output, history)
    logger.info('wrote %s (%d rounds)', metrics_path, state.round)
    return output


# -- relax ---------------------------------------------------------------------

def relax(checkpoint, cohort_id, extra_rounds, out=None, record=True):
    """Reopen one cohort's ledger for extra rounds and continue the checkpointed run.

    The metrics file starts with the checkpoint's final row.
    """
    snapshot = load_checkpoint(checkpoint)
    if snapshot['config'] is None:
        raise CohortDPError(f'{checkpoint} carries no config; cannot rebuild the shards')
    config = build_config(snapshot['config'])
    if config.algorithm == NONPRIVATE:
        raise CohortDPError('a nonprivate run has no privacy budget to relax')

    data = prepare(config)
    state = restore_state(snapshot, data, workers=config.workers or settings.COHORTDP['WORKERS'])
    relax_cohort(state, cohort_id, extra_rounds)

    start = len(state.history)
    run = _open_run('RELAX', config, record)
    state, history = run_training(config, data, state=state, max_rounds=state.round + extra_rounds)
    rows = history[max(start - 1, 0):]

    directory = output_dir(out)
    stem = f'{run_stem(config)}-relax{cohort_id}x{extra_rounds}'
    metrics_path = write_metrics(directory / f'{stem}.metrics.csv', rows, config.num_cohorts)
    checkpoint_path = save_checkpoint(directory / f'{stem}.ckpt.json', state, config)
    output = RunOutput(
        metrics_path, checkpoint_path, state.round, rows[-1] if rows else None,
        tuple(c.query_count for c in state.cohorts), run.pk if run else None,
    )
    _close_run(run, output, rows)
    return output


# -- evaluate ------------------------------------------------------------------

def evaluate(checkpoint, out=None, record=True):
    """Per-class report of a checkpoint's model on the test split."""
    snapshot = load_checkpoint(checkpoint)
    if snapshot['config'] is None:
        raise CohortDPError(f'{checkpoint} carries no config; cannot rebuild the test split')
    config = build_config(snapshot['config'])
    run = _open_run('EVALUATE', config, record)
    try:
        data = prepare(config)
        state = restore_state(snapshot, data)
        evaluator = RoundEvaluator.for_shards(data.train, data.test, data.shards, config.eval_every)
        report = evaluator.test_report(state.global_params)
        path = None
        if out:
            path = write_class_report(
                output_dir(out) / f'{run_stem(config)}.classes.csv', report, data.test.label_names
            )
    except CohortDPError as exc:
        _fail_run(run, exc)
        raise
    _finish_run(
        run,
        rounds=state.round,
        query_counts=[c.query_count for c in state.cohorts],
        final_micro_f1=report.micro,
        final_macro_f1=report.macro,
        final_weighted_f1=report.weighted,
        metrics_path=str(path or ''),
        checkpoint_path=str(checkpoint),
    )
    return report, data.test.label_names, path


# -- accountant ----------------------------------------------------------------

def accountant_table(q, sigma, epsilon, threshold, cap=None):
    cap = settings.COHORTDP['ACCOUNTANT_ROUND_CAP'] if cap is None else cap
    return delta_trace(q, sigma, epsilon, threshold, cap=cap)


# -- sweep ---------------------------------------------------------------------

def _sweep_job(job):
    config, out = job
    output = train(config, out=out, record=False, checkpoint_every=0)
    final = output.final
    return {
        'micro_f1': final.test_micro_f1 if final else None,
        'macro_f1': final.test_macro_f1 if final else None,
        'weighted_f1': final.test_weighted_f1 if final else None,
        'rounds': output.rounds,
        'query_counts': output.query_counts,
    }


def sweep_path(config, parameter, out=None):
    return output_dir(out) / f'sweep-{parameter}-{config.algorithm}-{config_hash(config)}.csv'


def sweep(config, parameter, values, seeds=None, out=None, jobs=1, record=True):
    """One run per (value, seed) plus a median row per value, written as a summary CSV.

    Returns the summary rows and the CSV path.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise CohortDPError(f'cannot sweep {parameter!r}; choose one of {", ".join(SWEEP_PARAMETERS)}')
    if not values:
        raise CohortDPError('a sweep needs at least one value')
    seeds = list(range(config.seed, config.seed + config.sweep_seeds)) if seeds is None else list(seeds)

    jobs_list = []
    for value in values:
        swept = config.with_overrides(**{parameter: value})
        for seed in seeds:
            jobs_list.append((value, seed, (seeded(swept, seed), out)))

    run = _open_run('SWEEP', config, record)
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_sweep_job, [j[2] for j in jobs_list]))
        else:
            results = [_sweep_job(j[2]) for j in jobs_list]
    except CohortDPError as exc:
        _fail_run(run, exc)
        raise

    rows = []
    for (value, seed, _), result in zip(jobs_list, results):
        rows.append({'value': value, 'seed': seed, **result})
    summary = []
    for value in values:
        group = [r for r in rows if r['value'] == value]
        summary.extend(group)
        summary.append({
            'value': value,
            'seed': 'median',
            **{
                key: float(np.median([r[key] for r in group if r[key] is not None]))
                for key in ('micro_f1', 'macro_f1', 'weighted_f1', 'rounds')
                if any(r[key] is not None for r in group)
            },
            'query_counts': (),
        })
    path = write_sweep(sweep_path(config, parameter, out), parameter, summary)
    _finish_run(run, rounds=len(rows), metrics_path=str(path))
    logger.info('sweep over %s finished: %d runs', parameter, len(rows))
    return summary, path


SWEEP_HEADER = ['parameter', 'value', 'seed', 'micro_f1', 'macro_f1', 'weighted_f1', 'rounds', 'query_counts']


def write_sweep(path, parameter, summary):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(SWEEP_HEADER)
        for row in summary:
            writer.writerow([
                parameter,
                row['value'],
                row['seed'],
                *['' if row.get(k) is None else repr(float(row[k])) for k in ('micro_f1', 'macro_f1', 'weighted_f1')],
                '' if row.get('rounds') is None else row['rounds'],
                ';'.join(str(q) for q in row['query_counts']),
            ])
    return path
