from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from src.errors import ConfigError, InputError
from src.pauli import DiagonalObservable, pauli_expectation, transverse_commutator
from src.simulator import apply_mixer_layer, expectation_diag

LAWS = ('identity', 'bang_bang', 'finite_time', 'fixed_time')
DEFAULT_FD_STEP = 1e-5


@dataclass
class FeedbackLaw:
    kind: str = 'identity'
    kappa: float = 1.0
    kappa2: float = None
    a1: float = None

    def __post_init__(self):
        if self.kind not in LAWS:
            raise ConfigError(f'unknown feedback law {self.kind!r}, expected one of {LAWS}')
        if not self.kappa > 0:
            raise ConfigError(f'kappa must be positive, got {self.kappa}')
        if self.kind in ('finite_time', 'fixed_time') and (self.a1 is None or not 0 < self.a1 < 1):
            raise ConfigError(f'{self.kind} law needs a1 in (0, 1), got {self.a1}')
        if self.kind == 'fixed_time' and (self.kappa2 is None or not self.kappa2 > 0):
            raise ConfigError(f'fixed_time law needs a positive kappa2, got {self.kappa2}')

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if 'law' in d:
            d['kind'] = d.pop('law')
        unknown = set(d) - {'kind', 'kappa', 'kappa2', 'a1'}
        if unknown:
            raise ConfigError(f'unknown feedback-law keys {sorted(unknown)}')
        return cls(**d)

    def to_dict(self):
        return {'law': self.kind, 'kappa': self.kappa, 'kappa2': self.kappa2, 'a1': self.a1}


def apply_law(law, w):
    """theta_{k+1} from the measured w = <i[H_M, Q]>; always opposes the sign of w."""
    sign = float(np.sign(w))
    if law.kind == 'identity':
        return -law.kappa * w
    if law.kind == 'bang_bang':
        return -law.kappa * sign
    if law.kind == 'finite_time':
        return -law.kappa * sign * abs(w) ** law.a1
    return -law.kappa * sign * abs(w) ** law.a1 - law.kappa2 * sign * abs(w) ** (1.0 / law.a1)


class DtBound(NamedTuple):
    value: float
    stalled: bool


def dt_bound(w, norm_hm, norm_hp, theta_prev):
    """Largest step that keeps the Lyapunov function non-increasing; 0 and stalled at w = 0."""
    w = abs(w)
    if w == 0.0:
        return DtBound(0.0, True)
    return DtBound(w / (2.0 * (2.0 * norm_hm * norm_hp + w) * (norm_hp + norm_hm * abs(theta_prev))), False)


def _diagonal(Q):
    return Q if isinstance(Q, DiagonalObservable) else Q.diag


def finite_diff_expectation(s, Q, m, dt, h=DEFAULT_FD_STEP):
    """Central-difference estimate of <i[H_M, Q]> from two trial layers V_M(+-h)."""
    if not h > 0:
        raise InputError(f'finite-difference step must be positive, got {h}')
    d = _diagonal(Q)
    plus = expectation_diag(apply_mixer_layer(s.copy(), m, h, dt), d)
    minus = expectation_diag(apply_mixer_layer(s.copy(), m, -h, dt), d)
    return (plus - minus) / (2.0 * h * dt)


def finite_diff_controller(s, Q, m, dt, h=DEFAULT_FD_STEP, kappa=1.0):
    return -kappa * finite_diff_expectation(s, Q, m, dt, h)


def controller_pauli_sum(Q, m):
    """sum_r a_r R_r = i[H_M, Q] for the transverse mixer, from the Pauli expansion of Q."""
    if m.kind != 'transverse_x':
        raise ConfigError('the Pauli-expansion controller supports the transverse_x mixer only')
    if Q.pauli is None:
        raise ConfigError(f'the {Q.variant} observable has no Pauli expansion')
    return transverse_commutator(Q.pauli)


def pauli_controller_expectation(s, R):
    return pauli_expectation(R, s.amps)
