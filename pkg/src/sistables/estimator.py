"""Running estimate of the table count: the average of 1/mu over trials.

Everything is held in natural-log space and reported as log10. Dead ends
count as trials contributing zero. The stop rule fires once at least
``k * N`` trials have run (``N`` = rows + columns) and the last ``k * N``
running estimates, the current one included, all lie within a factor
``1 + eps`` of the current estimate.

:class:`RunningEstimate` is the reference, value-semantics implementation;
:func:`run_fixed` and :func:`run_until_stop` drive the compiled kernels and
produce the same numbers for long runs.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ParamMismatch, WindowInvalid
from .margins import Margins
from .sampler import SamplerConfig, TrialResult, _check_feasible, _frame
from .rng import run_key

LN10 = math.log(10.0)
DEFAULT_EPSILON = 0.01
DEFAULT_K = 5


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def _within(a: float, b: float, tol: float) -> bool:
    if a == -math.inf or b == -math.inf:
        return a == b
    return abs(a - b) <= tol


@dataclass(frozen=True)
class EstimatorParams:
    epsilon: float = DEFAULT_EPSILON
    k: int = DEFAULT_K
    n_total: int = 2  # rows + columns

    @property
    def window(self) -> int:
        return self.k * self.n_total

    @classmethod
    def for_margins(cls, margins: Margins, epsilon: float = DEFAULT_EPSILON, k: int = DEFAULT_K):
        return cls(epsilon, k, margins.n_rows + margins.n_cols)


@dataclass(frozen=True)
class StopDecision:
    stopped: bool
    at_trial: int
    final_log10_estimate: float | None


@dataclass(frozen=True)
class RunningEstimate:
    params: EstimatorParams = field(default_factory=EstimatorParams)
    trials: int = 0
    log_sum: float = -math.inf  # ln of the sum of 1/mu; -inf while all-zero
    failures: int = 0
    window: tuple[float, ...] = ()  # ln X_s for the most recent trials
    window_valid: bool = True

    @property
    def successes(self) -> int:
        return self.trials - self.failures

    @property
    def log_estimate(self) -> float | None:
        """ln X_t; None before the first trial, -inf while every trial failed."""
        if self.trials == 0:
            return None
        if self.log_sum == -math.inf:
            return -math.inf
        return self.log_sum - math.log(self.trials)

    @property
    def log10_estimate(self) -> float | None:
        le = self.log_estimate
        return None if le is None else le / LN10

    @property
    def estimate(self) -> float | None:
        """X_t on a linear scale, only while log10 X_t < 300."""
        l10 = self.log10_estimate
        if l10 is None or l10 >= 300:
            return None
        return 10.0**l10

    def accumulate(self, log_weight: float) -> "RunningEstimate":
        return accumulate(self, log_weight)


def accumulate(est: RunningEstimate, trial: TrialResult | float) -> RunningEstimate:
    """Fold one trial in. Accepts a TrialResult or a bare log(1/mu) (-inf for a dead end)."""
    lw = trial.log_weight if isinstance(trial, TrialResult) else float(trial)
    t = est.trials + 1
    failures = est.failures + (lw == -math.inf)
    log_sum = _logaddexp(est.log_sum, lw)
    cur = -math.inf if log_sum == -math.inf else log_sum - math.log(t)
    window = (est.window + (cur,))[-est.params.window:]
    return replace(est, trials=t, log_sum=log_sum, failures=failures, window=window)


def merge(a: RunningEstimate, b: RunningEstimate) -> RunningEstimate:
    """Combine two independent accumulators; the result is for final values only."""
    if a.params != b.params:
        raise ParamMismatch(f"cannot merge estimates with params {a.params} and {b.params}")
    if b.trials == 0:
        return a
    if a.trials == 0:
        return b
    return RunningEstimate(
        params=a.params,
        trials=a.trials + b.trials,
        log_sum=_logaddexp(a.log_sum, b.log_sum),
        failures=a.failures + b.failures,
        window=(),
        window_valid=False,
    )


def should_stop(est: RunningEstimate) -> StopDecision:
    if not est.window_valid:
        raise WindowInvalid("merged estimates carry no stopping window")
    need = est.params.window
    if est.trials < need or len(est.window) < need:
        return StopDecision(False, est.trials, est.log10_estimate)
    cur = est.window[-1]
    tol = math.log1p(est.params.epsilon)
    ok = all(_within(x, cur, tol) for x in est.window)
    return StopDecision(ok, est.trials, est.log10_estimate)


# --- kernel-backed runs -------------------------------------------------------

@dataclass
class RunTrace:
    """Per-trial history of one run: ln X_t and cumulative failures at t = 1..trials."""

    log_estimates: np.ndarray
    failures: np.ndarray
    stop_trial: int | None  # first t at which the stop rule held
    trials: int
    log_sum: float

    @property
    def log10_estimates(self) -> np.ndarray:
        return self.log_estimates / LN10

    @property
    def final_log10(self) -> float:
        if self.trials == 0:
            return math.nan
        return float(self.log_estimates[self.trials - 1] / LN10)

    @property
    def total_failures(self) -> int:
        return int(self.failures[self.trials - 1]) if self.trials else 0

    def to_running_estimate(self, params: EstimatorParams) -> RunningEstimate:
        w = self.log_estimates[max(0, self.trials - params.window): self.trials]
        return RunningEstimate(params, self.trials, self.log_sum, self.total_failures,
                               tuple(float(x) for x in w))


class _Accumulator:
    def __init__(self, params: EstimatorParams, capacity: int):
        self.params = params
        self.trace = np.empty(max(capacity, 1))
        self.fails = np.empty(max(capacity, 1), dtype=np.int64)
        self.ref = -math.inf
        self.scaled = 0.0
        self.failures = 0
        self.t = 0
        self.stop_trial: int | None = None

    def _grow(self, need: int):
        if need > self.trace.size:
            size = max(need, 2 * self.trace.size)
            self.trace = np.resize(self.trace, size)
            self.fails = np.resize(self.fails, size)

    def feed(self, logw: np.ndarray, stop_at_first: bool) -> int | None:
        self._grow(self.t + logw.size)
        ref, scaled, fails, t, stop = kernels.accumulate_chunk(
            logw, self.t, self.ref, self.scaled, self.failures, self.trace, self.fails,
            self.params.window, math.log1p(self.params.epsilon), stop_at_first)
        self.ref, self.scaled, self.failures, self.t = float(ref), float(scaled), int(fails), int(t)
        if stop >= 0 and self.stop_trial is None:
            self.stop_trial = int(stop)
            return self.stop_trial
        return None

    def result(self) -> RunTrace:
        log_sum = -math.inf if self.ref == -math.inf else self.ref + math.log(self.scaled)
        return RunTrace(self.trace[: self.t].copy(), self.fails[: self.t].copy(),
                        self.stop_trial, self.t, log_sum)


def _batch(frame, rkey, start: int, count: int) -> np.ndarray:
    logw = np.empty(count)
    steps = np.empty(count, dtype=np.int64)
    with np.errstate(over="ignore"):
        kernels.run_batch(frame.inner, frame.outer, frame.feasible, rkey, start, count, logw,
                          steps)
    return logw


def run_fixed(margins: Margins, config: SamplerConfig, trials: int, run: int = 0,
              params: EstimatorParams | None = None, workers: int = 1) -> RunTrace:
    """Exactly ``trials`` trials, generated in parallel chunks and folded in order.

    The trace does not depend on ``workers``: trial t always uses substream
    (seed, run, t) and accumulation is sequential.
    """
    _check_feasible(margins, config)
    params = params or EstimatorParams.for_margins(margins)
    frame = _frame(margins, config)
    rkey = run_key(config.seed, run)
    workers = max(1, int(workers))
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    spans = [(int(a), int(b - a)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1 or len(spans) <= 1:
        parts = [_batch(frame, rkey, a, n) for a, n in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: _batch(frame, rkey, *s), spans))
    logw = np.concatenate(parts) if parts else np.empty(0)
    acc = _Accumulator(params, trials)
    acc.feed(logw, stop_at_first=False)
    return acc.result()


def run_until_stop(margins: Margins, config: SamplerConfig, run: int = 0,
                   params: EstimatorParams | None = None, max_trials: int = 10**7,
                   extend: float = 1.0, chunk: int = 4096) -> RunTrace:
    """Sequential run that halts when the stop rule first holds.

    With ``extend > 1`` the run continues to ``ceil(extend * stop_trial)``
    trials. Without a stop before ``max_trials`` the run ends there with
    ``stop_trial = None``.
    """
    _check_feasible(margins, config)
    params = params or EstimatorParams.for_margins(margins)
    frame = _frame(margins, config)
    rkey = run_key(config.seed, run)
    acc = _Accumulator(params, min(max_trials, 1 << 16))
    while acc.t < max_trials:
        n = min(chunk, max_trials - acc.t)
        stop = acc.feed(_batch(frame, rkey, acc.t, n), stop_at_first=True)
        if stop is not None:
            break
    if acc.stop_trial is not None and extend > 1.0:
        target = min(max_trials, math.ceil(extend * acc.stop_trial))
        while acc.t < target:
            n = min(chunk, target - acc.t)
            acc.feed(_batch(frame, rkey, acc.t, n), stop_at_first=False)
    return acc.result()
