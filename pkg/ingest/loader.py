"""Reading flow-feature CSV exports into a Dataset."""

import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from cohortdp.exceptions import DataError

from .dataset import Dataset
from .labels import FEATURE_WIDTH, LABEL_NAMES, label_id

logger = logging.getLogger(__name__)

# the extract carries 80 columns besides the label; the timestamp is not a feature
DEFAULT_DROP_COLUMNS = ('Timestamp', 'Flow ID')

_PARSER_LINE = re.compile(r'\bline (\d+)')


def load_csv(path, label_column='Label', drop_columns=DEFAULT_DROP_COLUMNS,
             expected_width=FEATURE_WIDTH):
    path = Path(path)
    if not path.is_file():
        raise DataError('file not found', path=path)

    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, on_bad_lines='error')
    except pd.errors.ParserError as exc:
        found = _PARSER_LINE.search(str(exc))
        line = int(found.group(1)) if found else None
        raise DataError(f'malformed row ({str(exc).strip()})', path=path, line=line) from exc
    except pd.errors.EmptyDataError as exc:
        raise DataError('no header row', path=path) from exc

    frame.columns = [c.strip() for c in frame.columns]
    if label_column not in frame.columns:
        raise DataError(f'label column {label_column!r} missing', path=path)

    labels = np.empty(len(frame), dtype=np.int64)
    for i, raw in enumerate(frame[label_column].tolist()):
        class_id = label_id(raw)
        if class_id is None:
            # header is line 1
            raise DataError(f'unknown label {raw!r}', path=path, line=i + 2)
        labels[i] = class_id

    dropped = [c for c in drop_columns if c in frame.columns]
    feature_frame = frame.drop(columns=[label_column, *dropped])
    if expected_width is not None and feature_frame.shape[1] != expected_width:
        raise DataError(
            f'{feature_frame.shape[1]} feature columns after dropping {dropped}, '
            f'expected {expected_width}',
            path=path,
        )

    features = feature_frame.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=np.float64)
    features = _fill_non_finite(features, list(feature_frame.columns))
    logger.info('loaded %d rows x %d features from %s', *features.shape, path)
    return Dataset(features, labels, LABEL_NAMES)


def _fill_non_finite(features, columns):
    """Replace NaN, +-inf and non-numeric cells with the column median of finite cells."""
    if features.size == 0:
        return features.reshape(0, len(columns))
    features = features.copy()
    bad = ~np.isfinite(features)
    for j in np.flatnonzero(bad.any(axis=0)):
        finite = features[~bad[:, j], j]
        fill = float(np.median(finite)) if finite.size else 0.0
        features[bad[:, j], j] = fill
        logger.warning('column %r: %d non-finite cells set to %r', columns[j], bad[:, j].sum(), fill)
    return features
