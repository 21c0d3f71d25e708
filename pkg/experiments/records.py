"""Metrics CSV files: one row per round, parsed back into MetricsRow."""

import csv
from pathlib import Path

from cohortdp.exceptions import DataError
from federation.state import MetricsRow

SCORE_COLUMNS = ['train_loss', 'train_acc', 'test_micro_f1', 'test_macro_f1', 'test_weighted_f1']


def metrics_header(num_cohorts):
    return [
        'round',
        *[f'cohort_{i}_delta' for i in range(num_cohorts)],
        'exhausted_flags',
        *SCORE_COLUMNS,
        *[f'cohort_{i}_acc' for i in range(num_cohorts)],
        'wall_ms',
    ]


def _fmt(value):
    return '' if value is None else repr(float(value))


def _parse(value):
    return None if value == '' else float(value)


def exhausted_string(flags):
    if any(f is None for f in flags):
        return ''
    return ''.join('1' if f else '0' for f in flags)


def metrics_line(row):
    return [
        row.round,
        *[_fmt(d) for d in row.cohort_deltas],
        exhausted_string(row.exhausted),
        _fmt(row.train_loss),
        _fmt(row.train_acc),
        _fmt(row.test_micro_f1),
        _fmt(row.test_macro_f1),
        _fmt(row.test_weighted_f1),
        *[_fmt(a) for a in row.cohort_acc],
        _fmt(row.wall_ms),
    ]


def write_metrics(path, rows, num_cohorts):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(metrics_header(num_cohorts))
        for row in rows:
            writer.writerow(metrics_line(row))
    return path


def read_metrics(path):
    path = Path(path)
    with path.open(newline='', encoding='utf-8') as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0] != 'round':
            raise DataError('not a metrics file', path=path)
        num_cohorts = sum(1 for h in header if h.endswith('_delta'))
        if header != metrics_header(num_cohorts):
            raise DataError('unexpected metrics columns', path=path, line=1)
        rows = []
        for line_no, values in enumerate(reader, start=2):
            if len(values) != len(header):
                raise DataError(f'{len(values)} fields, expected {len(header)}', path=path, line=line_no)
            record = dict(zip(header, values))
            flags = record['exhausted_flags']
            rows.append(MetricsRow(
                round=int(record['round']),
                cohort_deltas=tuple(_parse(record[f'cohort_{i}_delta']) for i in range(num_cohorts)),
                exhausted=(
                    tuple(ch == '1' for ch in flags) if flags else tuple(None for _ in range(num_cohorts))
                ),
                train_loss=_parse(record['train_loss']),
                train_acc=_parse(record['train_acc']),
                cohort_acc=tuple(_parse(record[f'cohort_{i}_acc']) for i in range(num_cohorts)),
                test_micro_f1=_parse(record['test_micro_f1']),
                test_macro_f1=_parse(record['test_macro_f1']),
                test_weighted_f1=_parse(record['test_weighted_f1']),
                wall_ms=_parse(record['wall_ms']),
            ))
    return rows


def write_class_report(path, report, label_names):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['class_id', 'label', 'precision', 'recall', 'f1', 'support'])
        for i, name in enumerate(label_names):
            writer.writerow([
                i, name, repr(report.precision[i]), repr(report.recall[i]),
                repr(report.per_class[i]), report.support[i],
            ])
        for name, value in (('micro', report.micro), ('macro', report.macro), ('weighted', report.weighted)):
            writer.writerow(['', name, '', '', repr(value), sum(report.support)])
    return path
