"""Sequential importance sampling of 0/1 tables, one column at a time.

Column ``j`` gets the vector ``t`` (with ``sum(t) == c_j``) with probability
proportional to ``prod_i (r'_i / (n' - r'_i)) ** t_i``, where ``r'`` are the
residual row sums and ``n'`` the number of columns not yet filled. Two ways
of handling dead ends:

``restart``
    a column with no admissible vector ends the trial, which then counts as
    a zero in the estimator.
``feasible``
    column vectors whose residual margins fail Gale-Ryser are removed and the
    rest renormalized, so every trial completes.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import InfeasibleInstance, NoAdmissibleAssignment, TooLarge
from .margins import Margins, ResidualState, gale_ryser_feasible
from .rng import CounterStream, run_key


class Variant(str, enum.Enum):
    RESTART = "restart"
    FEASIBLE = "feasible"


class Orientation(str, enum.Enum):
    COLUMN_WISE = "column_wise"
    ROW_WISE = "row_wise"


class Ordering(str, enum.Enum):
    AS_GIVEN = "as_given"
    DESCENDING = "descending_sum"
    ASCENDING = "ascending_sum"


@dataclass(frozen=True)
class SamplerConfig:
    variant: Variant = Variant.FEASIBLE
    orientation: Orientation = Orientation.COLUMN_WISE
    ordering: Ordering = Ordering.AS_GIVEN
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        object.__setattr__(self, "ordering", Ordering(self.ordering))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class TrialResult:
    success: bool
    table: np.ndarray | None
    log_mu: float | None
    columns_assigned: int
    dead_end_step: int | None = None

    @property
    def log_weight(self) -> float:
        """log(1/mu), or -inf for a dead end."""
        return -self.log_mu if self.success else -math.inf


def order_outer(margins: Margins, config: SamplerConfig) -> np.ndarray:
    """0-based order in which the outer dimension is filled (stable)."""
    sums = margins.col_sums if config.orientation is Orientation.COLUMN_WISE else margins.row_sums
    idx = np.arange(len(sums))
    if config.ordering is Ordering.AS_GIVEN:
        return idx
    key = np.asarray(sums)
    if config.ordering is Ordering.DESCENDING:
        key = -key
    return np.argsort(key, kind="stable")


@dataclass(frozen=True)
class _Frame:
    """Margins as the kernels see them: inner sums, outer sums in fill order."""

    inner: np.ndarray
    outer: np.ndarray
    perm: np.ndarray
    transposed: bool
    feasible: bool

    def to_original(self, table: np.ndarray) -> np.ndarray:
        out = np.empty_like(table)
        out[:, self.perm] = table
        return out.T.copy() if self.transposed else out

    def from_original(self, table: np.ndarray) -> np.ndarray:
        t = np.asarray(table, dtype=np.int64)
        if self.transposed:
            t = t.T
        return np.ascontiguousarray(t[:, self.perm])


def _frame(margins: Margins, config: SamplerConfig) -> _Frame:
    perm = order_outer(margins, config)
    transposed = config.orientation is Orientation.ROW_WISE
    m = margins.transpose() if transposed else margins
    return _Frame(
        inner=m.rows_array(),
        outer=m.cols_array()[perm],
        perm=perm,
        transposed=transposed,
        feasible=config.variant is Variant.FEASIBLE,
    )


def _check_feasible(margins: Margins, config: SamplerConfig):
    if config.variant is Variant.FEASIBLE and not margins.is_feasible():
        raise InfeasibleInstance("no table has these margins; the feasible variant needs one")


def column_weights(residuals: ResidualState):
    """Per-row weights ``r'/(n'-r')`` plus forced (r' == n') and forbidden (r' == 0) masks.

    Masked rows get weight nan.
    """
    r = np.asarray(residuals.residual_rows, dtype=float)
    n = residuals.columns_remaining
    forced = r == n
    forbidden = r == 0
    w = np.full(r.shape, np.nan)
    free = ~forced & ~forbidden
    w[free] = r[free] / (n - r[free])
    return w, forced, forbidden


def sample_column(residuals: ResidualState, col_sum: int, stream: CounterStream,
                  remaining_cols: Sequence[int] | None = None):
    """Draw one column vector; returns (assignment, log_prob).

    With ``remaining_cols`` the draw is restricted to vectors that leave a
    Gale-Ryser feasible residual against those columns.
    """
    res = np.asarray(residuals.residual_rows, dtype=np.int64)
    rest = np.asarray(remaining_cols if remaining_cols is not None else [], dtype=np.int64)
    out = np.zeros((1, res.size), dtype=np.int64)
    with np.errstate(over="ignore"):
        ok, logp, ctr = kernels.sample_column_many(
            res, residuals.columns_remaining, int(col_sum), remaining_cols is not None,
            rest, np.uint64(stream.key), stream.counter, 1, out)
    if not ok:
        raise NoAdmissibleAssignment(f"no admissible column with sum {col_sum}")
    stream.counter = int(ctr)
    return out[0], float(logp[0])


def sample_column_draws(residuals: ResidualState, col_sum: int, draws: int, seed: int = 0,
                        remaining_cols: Sequence[int] | None = None):
    """Many independent draws (rows of the returned array) plus their log-probs."""
    res = np.asarray(residuals.residual_rows, dtype=np.int64)
    rest = np.asarray(remaining_cols if remaining_cols is not None else [], dtype=np.int64)
    out = np.zeros((draws, res.size), dtype=np.int64)
    with np.errstate(over="ignore"):
        ok, logp, _ = kernels.sample_column_many(
            res, residuals.columns_remaining, int(col_sum), remaining_cols is not None,
            rest, run_key(seed), 0, draws, out)
    if not ok:
        raise NoAdmissibleAssignment(f"no admissible column with sum {col_sum}")
    return out, logp


def column_log_prob(residuals: ResidualState, col_sum: int, vector: Sequence[int],
                    remaining_cols: Sequence[int] | None = None) -> float:
    res = np.asarray(residuals.residual_rows, dtype=np.int64)
    rest = np.asarray(remaining_cols if remaining_cols is not None else [], dtype=np.int64)
    with np.errstate(over="ignore"):
        return float(kernels.score_column(res, residuals.columns_remaining, int(col_sum),
                                          remaining_cols is not None, rest,
                                          np.asarray(vector, dtype=np.int64)))


def column_distribution(residuals: ResidualState, col_sum: int,
                        remaining_cols: Sequence[int] | None = None) -> dict[tuple[int, ...], Fraction]:
    """Exact proposal over admissible column vectors, by enumeration.

    Independent of the DP kernel: weights are multiplied out as fractions and
    feasibility (when ``remaining_cols`` is given) is checked directly.
    """
    r = residuals.residual_rows
    n = residuals.columns_remaining
    forced = [i for i, v in enumerate(r) if v == n]
    free = [i for i, v in enumerate(r) if 0 < v < n]
    if len(free) > 20:
        raise TooLarge(f"{len(free)} free rows; exact enumeration is capped at 20")
    need = col_sum - len(forced)
    weights: dict[tuple[int, ...], Fraction] = {}
    if 0 <= need <= len(free):
        for chosen in itertools.combinations(free, need):
            vec = [0] * len(r)
            w = Fraction(1)
            for i in forced:
                vec[i] = 1
            for i in chosen:
                vec[i] = 1
                w *= Fraction(r[i], n - r[i])
            if remaining_cols is not None:
                after = [a - b for a, b in zip(r, vec)]
                if not gale_ryser_feasible(after, remaining_cols):
                    continue
            weights[tuple(vec)] = w
    total = sum(weights.values())
    if not weights:
        raise NoAdmissibleAssignment(f"no admissible column with sum {col_sum}")
    return {vec: w / total for vec, w in weights.items()}


def run_trial(margins: Margins, config: SamplerConfig, trial: int = 0, run: int = 0) -> TrialResult:
    """Trial number ``trial`` of run ``run`` under ``config.seed``."""
    _check_feasible(margins, config)
    frame = _frame(margins, config)
    with np.errstate(over="ignore"):
        key = np.uint64(kernels.trial_key(run_key(config.seed, run), np.uint64(trial)))
        ok, log_mu, step, table = kernels.run_one(frame.inner, frame.outer, frame.feasible, key)
    if not ok:
        return TrialResult(False, None, None, int(step), dead_end_step=int(step))
    return TrialResult(True, frame.to_original(table), float(log_mu), int(step))


def sample_tables(margins: Margins, config: SamplerConfig, trials: int, start: int = 0,
                  run: int = 0, chunk: int = 4096) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (tables, log_weights) in chunks; dead ends come back as zero tables
    with log weight -inf."""
    _check_feasible(margins, config)
    frame = _frame(margins, config)
    rkey = run_key(config.seed, run)
    m, n = frame.inner.size, frame.outer.size
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        tables = np.zeros((k, m, n), dtype=np.int8)
        logw = np.empty(k)
        with np.errstate(over="ignore"):
            kernels.sample_tables_batch(frame.inner, frame.outer, frame.feasible, rkey,
                                        start + done, k, tables, logw)
        out = np.empty_like(tables)
        out[:, :, frame.perm] = tables
        if frame.transposed:
            out = out.transpose(0, 2, 1).copy()
        yield out, logw
        done += k


def log_proposal_probability(margins: Margins, table, config: SamplerConfig) -> float:
    """log mu(table) under ``config``; -inf if the sampler can never produce it."""
    frame = _frame(margins, config)
    with np.errstate(over="ignore"):
        return float(kernels.score_table(frame.inner, frame.outer, frame.feasible,
                                         frame.from_original(table)))


def trial_log_weights(margins: Margins, config: SamplerConfig, start: int, count: int,
                      run: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """log(1/mu) for trials ``start .. start+count-1`` (-inf for dead ends) and
    the number of columns each trial assigned."""
    frame = _frame(margins, config)
    logw = np.empty(count)
    steps = np.empty(count, dtype=np.int64)
    with np.errstate(over="ignore"):
        kernels.run_batch(frame.inner, frame.outer, frame.feasible, run_key(config.seed, run),
                          start, count, logw, steps)
    return logw, steps
