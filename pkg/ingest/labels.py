"""CSE-CIC-IDS2018 class names in the order used for class ids."""

BENIGN_ID = 0

LABEL_NAMES = (
    'Benign',
    'Bot',
    'DoS attacks-GoldenEye',
    'DoS attacks-Hulk',
    'DoS attacks-SlowHTTPTest',
    'DoS attacks-Slowloris',
    'FTP-BruteForce',
    'Infilteration',
    'SSH-Bruteforce',
)

# published per-class row counts of the extract used for the experiments
SOURCE_CLASS_COUNTS = (671244, 66308, 9801, 107373, 32673, 2642, 44816, 21631, 43512)

ATTACK_IDS = frozenset(range(1, len(LABEL_NAMES)))

FEATURE_WIDTH = 79

# spellings seen across the public CSV drops
_ALIASES = {
    'infiltration': 'Infilteration',
    'dos attacks-slowhttptest': 'DoS attacks-SlowHTTPTest',
    'ssh-bruteforce': 'SSH-Bruteforce',
    'ftp-bruteforce': 'FTP-BruteForce',
}

_BY_NAME = {name.lower(): i for i, name in enumerate(LABEL_NAMES)}


def label_id(name):
    """Map a label string to its class id; None when unknown."""
    key = str(name).strip().lower()
    key = _ALIASES.get(key, key).lower()
    return _BY_NAME.get(key)
