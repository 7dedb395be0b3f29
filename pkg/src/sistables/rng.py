"""Counter-based random streams.

Every uniform is a pure function of ``(key, counter)``: the key is the
splitmix64 mix of (run seed, trial index), and draw ``i`` of a trial is the
splitmix64 output for state ``key + (i + 1) * golden``. So any trial can be
replayed in isolation and trials can be farmed out in any order.

Key derivation::

    run_key(master, run)   = mix64(mix64(master) ^ mix64(run + RUN_SALT))
    trial_key(run_key, t)  = mix64(run_key ^ mix64(t + TRIAL_SALT))
"""
from __future__ import annotations

import numpy as np

from ._jit import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
RUN_SALT = np.uint64(0x5EED5EED00000001)
TRIAL_SALT = np.uint64(0x7A1A100000000003)
_INV53 = 1.0 / 9007199254740992.0


@njit
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def uniform(key, counter):
    """Uniform double in [0, 1) for draw ``counter`` of stream ``key``."""
    z = mix64(key + (np.uint64(counter) + _ONE) * GOLDEN)
    return float(z >> _S11) * _INV53


@njit
def trial_key(run_key, trial):
    return mix64(run_key ^ mix64(np.uint64(trial) + TRIAL_SALT))


def run_key(master_seed: int, run: int = 0) -> np.uint64:
    # jitted calls hand back Python ints; re-wrap so they stay unsigned
    with np.errstate(over="ignore"):
        a = np.uint64(mix64(np.uint64(master_seed)))
        b = np.uint64(mix64(np.uint64(run) + RUN_SALT))
        return np.uint64(mix64(a ^ b))


class CounterStream:
    """A replayable stream of uniforms for one trial.

    >>> s = CounterStream(42, trial=3)
    >>> u = s.uniform()
    >>> CounterStream(42, trial=3).uniform() == u
    True
    """

    def __init__(self, seed: int, trial: int = 0, run: int = 0):
        with np.errstate(over="ignore"):
            self.key = np.uint64(trial_key(run_key(seed, run), np.uint64(trial)))
        self.counter = 0

    def uniform(self) -> float:
        with np.errstate(over="ignore"):
            u = uniform(self.key, self.counter)
        self.counter += 1
        return u
