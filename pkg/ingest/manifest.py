"""Provenance files written by the partition command."""

import csv
from pathlib import Path


MANIFEST_HEADER = ['client_id', 'cohort_id', 'label_ids', 'rows', 'label_rows']


def write_manifest(path, shards):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(MANIFEST_HEADER)
        for shard in shards:
            ids = shard.label_ids()
            counts = shard.data.histogram()
            writer.writerow([
                shard.client_id,
                shard.cohort_id,
                ';'.join(str(i) for i in ids),
                len(shard),
                ';'.join(f'{i}:{counts[i]}' for i in ids),
            ])
    return path


def read_manifest(path):
    with Path(path).open(newline='', encoding='utf-8') as fh:
        return [
            {
                'client_id': int(row['client_id']),
                'cohort_id': int(row['cohort_id']),
                'label_ids': tuple(int(x) for x in row['label_ids'].split(';') if x),
                'rows': int(row['rows']),
            }
            for row in csv.DictReader(fh)
        ]


def write_norm_stats(path, stats):
    path = Path(path)
    with path.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['feature', 'mean', 'std'])
        for j, (m, s) in enumerate(zip(stats.mean, stats.std)):
            writer.writerow([j, repr(float(m)), repr(float(s))])
    return path
