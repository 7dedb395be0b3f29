import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sistables import kernels
from sistables.errors import ParamMismatch, WindowInvalid
from sistables.estimator import (
    EstimatorParams,
    RunningEstimate,
    accumulate,
    merge,
    run_fixed,
    run_until_stop,
    should_stop,
)
from sistables.margins import make_one_heavy, make_regular, validate_margins
from sistables.sampler import SamplerConfig, TrialResult, trial_log_weights

P = EstimatorParams(0.01, 5, 2)


def feed(values, params=P):
    est = RunningEstimate(params)
    for v in values:
        est = accumulate(est, math.log(v) if v > 0 else -math.inf)
    return est


def test_constant_stream():
    est = feed([6, 6, 6])
    assert est.estimate == pytest.approx(6)
    assert est.trials == 3 and est.failures == 0


def test_dead_end_counts_as_zero():
    est = RunningEstimate(P)
    est = accumulate(est, TrialResult(True, None, -math.log(6), 1))
    est = accumulate(est, TrialResult(False, None, None, 0, dead_end_step=0))
    assert est.estimate == pytest.approx(3)
    assert est.failures == 1 and est.successes == 1


def test_empty_and_all_failures():
    est = RunningEstimate(P)
    assert est.log_estimate is None and est.estimate is None
    est = feed([0, 0])
    assert est.log_estimate == -math.inf and est.estimate == 0.0


def test_huge_estimate_has_no_linear_value():
    est = accumulate(RunningEstimate(P), 400 * math.log(10))
    assert est.log10_estimate == pytest.approx(400)
    assert est.estimate is None


def test_merge_examples():
    a = feed([6, 6])
    b = feed([0])
    m = merge(a, b)
    assert m.trials == 3 and m.estimate == pytest.approx(4)
    assert merge(a, RunningEstimate(P)) == a
    ab, ba = merge(a, b), merge(b, a)
    assert (ab.trials, ab.log_sum) == (ba.trials, ba.log_sum)
    with pytest.raises(WindowInvalid):
        should_stop(m)
    with pytest.raises(ParamMismatch):
        merge(a, feed([1], EstimatorParams(0.02, 5, 2)))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.one_of(st.just(-math.inf), st.floats(-50, 50)), min_size=1, max_size=60),
       st.lists(st.integers(0, 60), max_size=5))
def test_merge_partition_matches_sequential(logs, cuts):
    seq = RunningEstimate(P)
    for v in logs:
        seq = accumulate(seq, v)
    bounds = sorted({0, len(logs), *[c for c in cuts if c <= len(logs)]})
    parts = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        e = RunningEstimate(P)
        for v in logs[a:b]:
            e = accumulate(e, v)
        parts.append(e)
    merged = parts[0]
    for p in parts[1:]:
        merged = merge(merged, p)
    assert merged.trials == seq.trials and merged.failures == seq.failures
    if seq.log_sum == -math.inf:
        assert merged.log_sum == -math.inf
    else:
        assert merged.log10_estimate == pytest.approx(seq.log10_estimate, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-300, 300), min_size=1, max_size=100))
def test_log_sum_exact_against_rationals(exps):
    """Weights 10^e with |e| <= 300, summed exactly."""
    est = RunningEstimate(P)
    for e in exps:
        est = accumulate(est, e * math.log(10))
    exact = sum(Fraction(10) ** e for e in exps) / len(exps)
    num, den = exact.numerator, exact.denominator
    log10_exact = (math.log10(num >> max(0, num.bit_length() - 64))
                   + max(0, num.bit_length() - 64) * math.log10(2)
                   - math.log10(den >> max(0, den.bit_length() - 64))
                   - max(0, den.bit_length() - 64) * math.log10(2))
    assert est.log10_estimate == pytest.approx(log10_exact, abs=1e-9)


def test_extreme_magnitudes():
    est = RunningEstimate(P)
    for v in (1e6, 1e6 - 1, -1e6):
        est = accumulate(est, v * math.log(10))
    assert est.log10_estimate == pytest.approx(1e6 + math.log10((1 + 0.1) / 3), abs=1e-6)


def test_stop_constant_stream_at_kN():
    est = RunningEstimate(P)
    for t in range(1, 12):
        est = accumulate(est, math.log(7))
        assert should_stop(est).stopped == (t >= 10)
    d = should_stop(est)
    assert d.at_trial == 11 and d.final_log10_estimate == pytest.approx(math.log10(7))


def test_alternating_stream_does_not_stop_early():
    # X_t = 2 at even t and 2 - 1/t at odd t: spread above 1% until t ~ 50
    est = RunningEstimate(P)
    stop_at = None
    for t in range(1, 200):
        est = accumulate(est, math.log(1 if t % 2 else 3))
        if should_stop(est).stopped:
            stop_at = t
            break
    # exact running means as rationals
    xs = [Fraction(sum(1 if s % 2 else 3 for s in range(1, t + 1)), t) for t in range(1, 200)]
    expect = next(t for t in range(10, 200)
                  if all(xs[t - 1] / Fraction(101, 100) <= x <= xs[t - 1] * Fraction(101, 100)
                         for x in xs[t - 10:t]))
    assert stop_at == expect and expect >= 50


def test_stop_after_jump_leaves_window():
    values = [1e6] + [1.0] * 200
    est = RunningEstimate(P)
    stop_at = None
    for t, v in enumerate(values, 1):
        est = accumulate(est, math.log(v))
        if should_stop(est).stopped:
            stop_at = t
            break
    # X_t ~ 1e6 / t; ratio X_{t-9}/X_t <= 1.01 needs t >~ 900, beyond this stream
    assert stop_at is None
    values = [1e2] + [1.0] * 5000
    est = RunningEstimate(P)
    for t, v in enumerate(values, 1):
        est = accumulate(est, math.log(v))
        if should_stop(est).stopped:
            stop_at = t
            break
    assert stop_at is not None and stop_at > 10
    w = est.window
    assert max(w) - min(w) <= 2 * math.log1p(0.01)


def _reference_trace(logw, params):
    est = RunningEstimate(params)
    logs, stop = [], None
    for t, lw in enumerate(logw, 1):
        est = accumulate(est, float(lw))
        logs.append(est.log_estimate)
        if stop is None and should_stop(est).stopped:
            stop = t
    return np.array(logs), stop, est


@pytest.mark.parametrize("margins, variant", [
    (make_regular(7, 3), "feasible"),
    (validate_margins([2, 2, 1, 1], [3, 1, 1, 1]), "restart"),
    (make_one_heavy(4, 3), "restart"),
])
def test_kernel_trace_matches_reference(margins, variant):
    cfg = SamplerConfig(variant=variant, seed=21)
    params = EstimatorParams.for_margins(margins)
    tr = run_fixed(margins, cfg, 3000, params=params)
    logw, _ = trial_log_weights(margins, cfg, 0, 3000)
    ref, stop, est = _reference_trace(logw, params)
    fin = np.isfinite(ref)
    assert np.array_equal(fin, np.isfinite(tr.log_estimates))
    assert np.allclose(tr.log_estimates[fin], ref[fin], rtol=0, atol=1e-9)
    assert tr.total_failures == est.failures
    assert tr.stop_trial == stop
    stopped = run_until_stop(margins, cfg, params=params, chunk=97)
    assert stopped.stop_trial == stop
    assert np.allclose(stopped.log_estimates, tr.log_estimates[: stopped.trials], atol=1e-12)
    back = tr.to_running_estimate(params)
    assert back.log10_estimate == pytest.approx(est.log10_estimate, abs=1e-9)


def test_run_fixed_independent_of_workers():
    m = make_regular(10, 3)
    cfg = SamplerConfig(seed=42)
    a = run_fixed(m, cfg, 5000, workers=1)
    b = run_fixed(m, cfg, 5000, workers=4)
    assert np.array_equal(a.log_estimates, b.log_estimates)
    assert a.stop_trial == b.stop_trial


def test_run_until_stop_extend_and_cap():
    m = make_regular(6, 2)
    cfg = SamplerConfig(seed=3)
    base = run_until_stop(m, cfg)
    ext = run_until_stop(m, cfg, extend=2.0)
    assert ext.stop_trial == base.stop_trial
    assert ext.trials == math.ceil(2 * base.stop_trial)
    capped = run_until_stop(m, cfg, max_trials=5)
    assert capped.trials == 5 and capped.stop_trial is None


def test_accumulate_chunk_boundaries_irrelevant():
    rng = np.random.default_rng(0)
    logw = rng.normal(size=500)
    logw[rng.random(500) < 0.2] = -np.inf
    out = []
    for sizes in ([500], [1, 499], [7] * 71 + [3], [250, 250]):
        trace = np.empty(500)
        fails = np.empty(500, dtype=np.int64)
        ref, scaled, nf, t, stop = -np.inf, 0.0, 0, 0, -1
        first = -1
        for s in sizes:
            ref, scaled, nf, t, st_ = kernels.accumulate_chunk(
                logw[t:t + s], t, ref, scaled, nf, trace, fails, 10, math.log1p(0.05), False)
            if first < 0 and st_ >= 0:
                first = st_
        out.append((trace.copy(), fails.copy(), first))
    for tr, fl, fs in out[1:]:
        assert np.allclose(tr, out[0][0], atol=1e-12) and np.array_equal(fl, out[0][1])
        assert fs == out[0][2]
