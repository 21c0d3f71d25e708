"""Moments accountant for the subsampled Gaussian mechanism, one ledger per cohort.

log_moment integrates both orderings of the privacy-loss moment numerically in
log space, so large orders and small noise multipliers do not overflow.
"""

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from cohortdp.exceptions import AccountantError, BudgetExhausted

logger = logging.getLogger(__name__)

LAMBDA_GRID = tuple(range(1, 33))

_ABS_TOL = 1e-12
_REL_TOL = 1e-10
_TAIL_WIDTH = 15.0


def _log_ratio(z, q, sigma):
    """log(nu1 / nu0) at z for nu1 = (1 - q) N(0, s^2) + q N(1, s^2)."""
    shift = (2.0 * z - 1.0) / (2.0 * sigma * sigma)
    if q == 1.0:
        return shift
    return np.logaddexp(math.log1p(-q), math.log(q) + shift)


def _log_nu0(z, sigma):
    return -z * z / (2.0 * sigma * sigma) - math.log(sigma * math.sqrt(2.0 * math.pi))


def _log_integral(log_f, lo, hi, sigma, params):
    """log of the integral of exp(log_f) over [lo, hi], scaled by the integrand peak."""
    grid = np.linspace(lo, hi, int(math.ceil((hi - lo) / (sigma / 50.0))) + 1)
    values = log_f(grid)
    peak = float(grid[int(np.argmax(values))])
    ref = float(values.max())
    points = sorted({p for p in (peak, 0.0, 1.0) if lo < p < hi})

    result = integrate.quad(
        lambda z: math.exp(float(log_f(z)) - ref),
        lo, hi, points=points, epsabs=_ABS_TOL, epsrel=_REL_TOL, limit=500, full_output=1,
    )
    value, abserr = result[0], result[1]
    if len(result) > 3 and abserr > 1e3 * _ABS_TOL:
        raise AccountantError(f'moment integration did not converge for {params}: {result[3]}')
    if not value > 0.0:
        raise AccountantError(f'moment integral vanished for {params}')
    return ref + math.log(value)


@functools.lru_cache(maxsize=4096)
def log_moment(q, sigma, lam):
    """alpha(lambda): max of the two orderings of the log moment of the privacy loss."""
    q, sigma, lam = float(q), float(sigma), int(lam)
    if not 0.0 < q <= 1.0:
        raise AccountantError(f'sampling fraction {q} outside (0, 1]')
    if sigma <= 0.0:
        raise AccountantError(f'noise multiplier {sigma} must be positive')
    if lam < 1:
        raise AccountantError(f'moment order {lam} must be a positive integer')

    params = {'q': q, 'sigma': sigma, 'lambda': lam}
    span = lam + 1.0 + _TAIL_WIDTH * sigma
    # E_{nu1}[(nu1/nu0)^lam] = E_{nu0}[(nu1/nu0)^(lam+1)]
    log_e1 = _log_integral(
        lambda z: _log_nu0(z, sigma) + (lam + 1) * _log_ratio(z, q, sigma),
        -span, span, sigma, params,
    )
    # E_{nu0}[(nu0/nu1)^lam]
    log_e0 = _log_integral(
        lambda z: _log_nu0(z, sigma) - lam * _log_ratio(z, q, sigma),
        -span, span, sigma, params,
    )
    return max(log_e0, log_e1, 0.0)


def round_log_moments(q, sigma, lambdas=LAMBDA_GRID):
    return np.array([log_moment(q, sigma, lam) for lam in lambdas], dtype=np.float64)


def _delta(log_moments, lambdas, epsilon):
    exponent = float(np.min(log_moments - np.asarray(lambdas, dtype=np.float64) * epsilon))
    return min(1.0, math.exp(exponent))


@dataclass
class CohortLedger:
    epsilon_target: float
    delta_threshold: float
    q: float
    sigma: float
    lambdas: tuple = LAMBDA_GRID
    log_moments: np.ndarray = None
    rounds_composed: int = 0
    exhausted: bool = False
    # set by relaxation: a fixed number of further rounds regardless of delta
    round_allowance: int = None

    def __post_init__(self):
        if self.epsilon_target <= 0:
            raise AccountantError('epsilon must be positive')
        if not 0.0 < self.delta_threshold < 1.0:
            raise AccountantError('delta threshold must lie in (0, 1)')
        if not 0.0 < self.q <= 1.0:
            raise AccountantError(f'sampling fraction {self.q} outside (0, 1]')
        if self.sigma <= 0:
            raise AccountantError('private training needs a positive noise multiplier')
        self.lambdas = tuple(int(x) for x in self.lambdas)
        if self.log_moments is None:
            self.log_moments = np.zeros(len(self.lambdas), dtype=np.float64)
        else:
            self.log_moments = np.asarray(self.log_moments, dtype=np.float64)

    def to_record(self):
        return {
            'epsilon_target': self.epsilon_target,
            'delta_threshold': self.delta_threshold,
            'q': self.q,
            'sigma': self.sigma,
            'lambdas': list(self.lambdas),
            'log_moments': [float(x) for x in self.log_moments],
            'rounds_composed': self.rounds_composed,
            'exhausted': self.exhausted,
            'round_allowance': self.round_allowance,
        }

    @classmethod
    def from_record(cls, record):
        return cls(**record)


def accumulate_round(ledger, sigma=None):
    """Compose one more round into the ledger (log moments add up)."""
    if ledger.exhausted:
        raise BudgetExhausted('cannot compose a round on an exhausted ledger')
    sigma = ledger.sigma if sigma is None else sigma
    ledger.log_moments = ledger.log_moments + round_log_moments(ledger.q, sigma, ledger.lambdas)
    ledger.rounds_composed += 1
    if ledger.round_allowance is not None:
        ledger.round_allowance -= 1
        if ledger.round_allowance <= 0:
            ledger.exhausted = True
    return ledger


def delta_for_epsilon(ledger, epsilon):
    if epsilon <= 0:
        raise AccountantError('epsilon must be positive')
    return _delta(ledger.log_moments, ledger.lambdas, epsilon)


def spent_delta(ledger):
    return delta_for_epsilon(ledger, ledger.epsilon_target)


def admits_round(ledger, sigma=None):
    """Whether one more round keeps delta within the threshold (or the relaxed allowance)."""
    if ledger.exhausted:
        return False
    if ledger.round_allowance is not None:
        return ledger.round_allowance > 0
    sigma = ledger.sigma if sigma is None else sigma
    prospective = ledger.log_moments + round_log_moments(ledger.q, sigma, ledger.lambdas)
    return _delta(prospective, ledger.lambdas, ledger.epsilon_target) <= ledger.delta_threshold


def close_ledger(ledger):
    if not ledger.exhausted:
        logger.info(
            'ledger closed after %d rounds (epsilon=%s, delta spent=%.3e)',
            ledger.rounds_composed, ledger.epsilon_target, spent_delta(ledger),
        )
    ledger.exhausted = True
    return ledger


def relax_ledger(ledger, extra_rounds):
    """Reopen an exhausted ledger for a fixed number of further rounds."""
    if not ledger.exhausted:
        raise AccountantError('only an exhausted ledger can be relaxed')
    if extra_rounds < 0:
        raise AccountantError('extra rounds must be nonnegative')
    ledger.round_allowance = int(extra_rounds)
    ledger.exhausted = extra_rounds == 0
    return ledger


def rounds_to_exhaustion(q, sigma, epsilon, Q, lambdas=LAMBDA_GRID, cap=100_000):
    """Smallest T whose composition pushes delta past Q; a cohort trains T - 1 rounds."""
    step = round_log_moments(q, sigma, lambdas)
    cumulative = np.zeros_like(step)
    for T in range(1, cap + 1):
        cumulative = cumulative + step
        if _delta(cumulative, lambdas, epsilon) > Q:
            return T
    raise AccountantError(
        f'delta stays below {Q} for {cap} rounds (q={q}, sigma={sigma}, epsilon={epsilon})'
    )


def delta_trace(q, sigma, epsilon, Q, lambdas=LAMBDA_GRID, cap=100_000):
    """[(round, delta)] up to and including the exhausting round."""
    step = round_log_moments(q, sigma, lambdas)
    cumulative = np.zeros_like(step)
    trace = []
    for T in range(1, cap + 1):
        cumulative = cumulative + step
        delta = _delta(cumulative, lambdas, epsilon)
        trace.append((T, delta))
        if delta > Q:
            return trace
    raise AccountantError(f'delta stays below {Q} for {cap} rounds')
