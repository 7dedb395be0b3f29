"""Experiment drivers behind the CLI: estimates with traces, exact counts, and
the three figure reproductions.

Every file written here is a pure function of the configuration (wall times
only go to the JSON summary). Charts are rendered from the CSV text that was
just written, never from in-memory state.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import exact_count as ec
from .errors import ConfigError, TooLarge
from .estimator import EstimatorParams, RunTrace, run_fixed, run_until_stop
from .margins import (
    Margins,
    make_one_heavy,
    make_regular,
    make_two_heavy,
    two_heavy_degrees,
    validate_margins,
)
from .sampler import Ordering, Orientation, SamplerConfig
from .svg import Chart, Series, render

log = logging.getLogger("sistables")

TRACE_HEADER = ("run", "trial", "log10_estimate", "failures", "stopped")
STRIDE_FROM = 100_000
STRIDE_ROWS = 10_000
DEFAULT_MAX_TRIALS = 10**7
CONFIG_VERSION = 1

FAMILIES = ("one-heavy", "two-heavy", "regular")


# --- instances ----------------------------------------------------------------

@dataclass(frozen=True)
class InstanceSpec:
    family: str = "explicit"  # explicit | one-heavy | two-heavy | regular
    rows: tuple[int, ...] | None = None
    cols: tuple[int, ...] | None = None
    m: int | None = None
    d: int | None = None
    beta: float | None = None
    gamma: float | None = None
    d_r: int | None = None
    d_c: int | None = None
    n: int | None = None
    r: int | None = None

    def _need(self, *names):
        missing = [k for k in names if getattr(self, k) is None]
        if missing:
            raise ConfigError(f"{self.family} needs --{' --'.join(missing)}".replace("_", "-"))

    def heavy_degrees(self) -> tuple[int, int]:
        self._need("m")
        d_r, d_c = self.d_r, self.d_c
        if d_r is None or d_c is None:
            self._need("beta", "gamma")
            fr, fc = two_heavy_degrees(self.m, self.beta, self.gamma)
            d_r = fr if d_r is None else d_r
            d_c = fc if d_c is None else d_c
        return d_r, d_c

    def build(self) -> Margins:
        if self.family == "explicit":
            if self.rows is None or self.cols is None:
                raise ConfigError("give --rows and --cols, or --family")
            return validate_margins(self.rows, self.cols)
        if self.family == "one-heavy":
            self._need("m", "d")
            return make_one_heavy(self.m, self.d)
        if self.family == "two-heavy":
            return make_two_heavy(self.m, *self.heavy_degrees())
        if self.family == "regular":
            self._need("n", "r")
            return make_regular(self.n, self.r)
        raise ConfigError(f"unknown family {self.family!r}")

    def label(self) -> str:
        if self.family == "one-heavy":
            return f"one-heavy(m={self.m}, d={self.d})"
        if self.family == "two-heavy":
            d_r, d_c = self.heavy_degrees()
            return f"two-heavy(m={self.m}, d_r={d_r}, d_c={d_c})"
        if self.family == "regular":
            return f"regular(n={self.n}, r={self.r})"
        return "explicit"


def recognize_family(margins: Margins):
    """('one-heavy', m, d) / ('two-heavy', m, d_r, d_c) when the margins have that
    exact shape, else None."""
    rows, cols = margins.row_sums, margins.col_sums
    if all(v == 1 for v in rows[:-1]) and all(v == 1 for v in cols):
        m, d = len(rows) - 1, rows[-1]
        if d >= 1 and len(cols) == m + d:
            return ("one-heavy", m, d)
    if all(v == 1 for v in rows[:-1]) and all(v == 1 for v in cols[:-1]) and len(cols) >= 2:
        m, d_r, d_c = len(rows) - 1, rows[-1], cols[-1]
        if m >= 1 and 1 <= d_c <= m and len(cols) - 1 == m + d_r - d_c >= d_r >= 1:
            return ("two-heavy", m, d_r, d_c)
    return None


def exact_count(margins: Margins, method: str = "auto") -> tuple[int, str]:
    """(count, method used). ``auto`` prefers a closed form, then the DP, then brute force."""
    fam = recognize_family(margins)
    if method == "closed_form" or (method == "auto" and fam):
        if fam is None:
            raise ConfigError("no closed form for these margins; use --method dp or brute")
        if fam[0] == "one-heavy":
            return ec.count_one_heavy(*fam[1:]), "closed_form"
        return ec.count_two_heavy(*fam[1:]), "closed_form"
    if method == "brute":
        return ec.brute_force_count(margins), "brute"
    if method == "dp":
        return ec.dp_count(margins), "dp"
    if method != "auto":
        raise ConfigError(f"unknown method {method!r}")
    try:
        return ec.dp_count(margins), "dp"
    except TooLarge:
        try:
            return ec.brute_force_count(margins), "brute"
        except TooLarge:
            raise TooLarge("instance exceeds both the dp state budget and the brute-force "
                           "limit; no exact count available") from None


# --- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    instance: InstanceSpec = field(default_factory=InstanceSpec)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    epsilon: float = 0.01
    k: int = 5
    max_trials: int = DEFAULT_MAX_TRIALS
    trials: int | None = None  # None: run until the stop rule fires
    runs: int = 1
    out: str = "."
    formats: tuple[str, ...] = ("csv", "json")
    workers: int = 1

    def params(self, margins: Margins) -> EstimatorParams:
        if not self.epsilon > 0 or self.k < 1:
            raise ConfigError("need epsilon > 0 and k >= 1")
        return EstimatorParams.for_margins(margins, self.epsilon, self.k)


_SECTIONS = {
    "instance": set(InstanceSpec.__dataclass_fields__),
    "sampler": {"variant", "orientation", "ordering"},
    "estimator": {"epsilon", "k", "max_trials"},
}
_TOP = {"version", "instance", "sampler", "estimator", "trials", "runs", "seed", "out",
        "formats", "workers"}


def config_from_dict(data: dict) -> RunConfig:
    """Versioned JSON schema; unknown fields anywhere are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if data.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}")
    extra = set(data) - _TOP
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    for name, allowed in _SECTIONS.items():
        sec = data.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"{name} must be an object")
        bad = set(sec) - allowed
        if bad:
            raise ConfigError(f"unknown {name} fields: {sorted(bad)}")
    inst = dict(data.get("instance", {}))
    for key in ("rows", "cols"):
        if inst.get(key) is not None:
            inst[key] = tuple(int(v) for v in inst[key])
    if "family" not in inst:
        inst["family"] = "explicit"
    try:
        sampler = SamplerConfig(seed=int(data.get("seed", 0)), **data.get("sampler", {}))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    est = data.get("estimator", {})
    return RunConfig(
        instance=InstanceSpec(**inst),
        sampler=sampler,
        epsilon=float(est.get("epsilon", 0.01)),
        k=int(est.get("k", 5)),
        max_trials=int(est.get("max_trials", DEFAULT_MAX_TRIALS)),
        trials=data.get("trials"),
        runs=int(data.get("runs", 1)),
        out=str(data.get("out", ".")),
        formats=tuple(data.get("formats", ("csv", "json"))),
        workers=int(data.get("workers", 1)),
    )


def config_to_dict(cfg: RunConfig) -> dict:
    inst = {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in asdict(cfg.instance).items() if v is not None}
    return {
        "version": CONFIG_VERSION,
        "instance": inst,
        "sampler": {"variant": cfg.sampler.variant.value,
                    "orientation": cfg.sampler.orientation.value,
                    "ordering": cfg.sampler.ordering.value},
        "estimator": {"epsilon": cfg.epsilon, "k": cfg.k, "max_trials": cfg.max_trials},
        "trials": cfg.trials,
        "runs": cfg.runs,
        "seed": int(cfg.sampler.seed),
        "out": cfg.out,
        "formats": list(cfg.formats),
        "workers": cfg.workers,
    }


# --- traces -------------------------------------------------------------------

def _f10(x: float) -> str:
    return "-inf" if x == -math.inf else f"{x:.10f}"


def trace_indices(trials: int, keep: Sequence[int] = ()) -> np.ndarray:
    """1-based trials written to a trace: all of them up to STRIDE_FROM, else
    every ceil(trials / STRIDE_ROWS)-th plus the last and any in ``keep``."""
    if trials <= STRIDE_FROM:
        return np.arange(1, trials + 1)
    step = math.ceil(trials / STRIDE_ROWS)
    idx = set(range(step, trials + 1, step)) | {trials}
    idx |= {t for t in keep if 1 <= t <= trials}
    return np.array(sorted(idx))


def trace_csv(traces: Sequence[tuple[int, RunTrace]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER) + "\n")
    for run, tr in traces:
        stop = tr.stop_trial
        idx = trace_indices(tr.trials, [stop] if stop else [])
        l10 = tr.log10_estimates
        for t in idx:
            stopped = int(stop is not None and t >= stop)
            buf.write(f"{run},{t},{_f10(float(l10[t - 1]))},{int(tr.failures[t - 1])},{stopped}\n")
    return buf.getvalue()


def read_trace_csv(text: str) -> dict[int, dict[str, list]]:
    """run -> {"trial": [...], "log10_estimate": [...], "failures": [...], "stopped": [...]}"""
    out: dict[int, dict[str, list]] = {}
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != TRACE_HEADER:
        raise ConfigError(f"not a trace CSV (header {reader.fieldnames})")
    for row in reader:
        d = out.setdefault(int(row["run"]), {k: [] for k in TRACE_HEADER[1:]})
        d["trial"].append(int(row["trial"]))
        d["log10_estimate"].append(float(row["log10_estimate"]))
        d["failures"].append(int(row["failures"]))
        d["stopped"].append(int(row["stopped"]))
    return out


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


# --- runs ---------------------------------------------------------------------

def _one_run(margins, sampler, params, run, trials, max_trials, extend, workers):
    if trials is not None:
        return run_fixed(margins, sampler, trials, run=run, params=params, workers=workers)
    return run_until_stop(margins, sampler, run=run, params=params, max_trials=max_trials,
                          extend=extend)


def execute_runs(margins: Margins, sampler: SamplerConfig, params: EstimatorParams,
                 run_ids: Sequence[int], trials: int | None, max_trials: int,
                 extend: float = 1.0, workers: int = 1) -> list[RunTrace]:
    """Independent runs; stop-rule runs go concurrently, fixed-trial runs split
    their trials over the workers instead."""
    if trials is not None or workers <= 1 or len(run_ids) <= 1:
        return [_one_run(margins, sampler, params, r, trials, max_trials, extend, workers)
                for r in run_ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(
            lambda r: _one_run(margins, sampler, params, r, None, max_trials, extend, 1),
            run_ids))


def _run_summary(run: int, tr: RunTrace) -> dict:
    stop = tr.stop_trial
    return {
        "run": run,
        "trials": tr.trials,
        "stop_trial": stop,
        "final_log10_estimate": tr.final_log10,
        "log10_estimate_at_stop": float(tr.log10_estimates[stop - 1]) if stop else None,
        "failures": tr.total_failures,
    }


def cmd_estimate(cfg: RunConfig) -> dict:
    margins = cfg.instance.build()
    params = cfg.params(margins)
    if cfg.trials is not None and cfg.trials < 1:
        raise ConfigError("--trials must be positive")
    t0 = time.perf_counter()
    traces = execute_runs(margins, cfg.sampler, params, range(cfg.runs), cfg.trials,
                          cfg.max_trials, workers=cfg.workers)
    wall = time.perf_counter() - t0
    summary = {
        "instance": cfg.instance.label(),
        "rows": margins.n_rows,
        "cols": margins.n_cols,
        "mode": "fixed" if cfg.trials is not None else "stop-heuristic",
        "config": config_to_dict(cfg),
        "runs": [_run_summary(r, tr) for r, tr in enumerate(traces)],
        "wall_time_s": wall,
    }
    out = Path(cfg.out)
    if "csv" in cfg.formats or "svg" in cfg.formats:
        text = trace_csv(list(enumerate(traces)))
        _write(out / "trace.csv", text)
        if "svg" in cfg.formats:
            _write(out / "trace.svg", trace_chart(text, title=cfg.instance.label()))
    if "json" in cfg.formats:
        _write(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    return summary


def trace_chart(text: str, title: str = "", exact_log10: float | None = None,
                labels: dict[int, str] | None = None) -> str:
    runs = read_trace_csv(text)
    series = [Series((labels or {}).get(r, f"run {r}"), d["trial"], d["log10_estimate"])
              for r, d in runs.items()]
    hl = [("exact", exact_log10)] if exact_log10 is not None else []
    return render(Chart(title, "trials", "log10 estimate", series, hl))


# --- figure 1: estimate vs trials ---------------------------------------------

FIG1B_SETTINGS = (
    ("column_wise", "descending_sum"),
    ("row_wise", "descending_sum"),
    ("column_wise", "ascending_sum"),
)
FIG1_EXTEND = 2.0
_FIG1B_COLORS = {"column_wise/descending_sum": "#d62728", "row_wise/descending_sum": "#1f77b4",
                 "column_wise/ascending_sum": "#2ca02c"}

FIG1_SUMMARY_HEADER = ("run", "setting", "stop_trial", "log10_at_stop", "final_log10",
                       "exact_log10")


def cmd_fig1(cfg: RunConfig, runs_per_setting: int | None = None) -> dict:
    """Panel a for regular instances (5 runs, linear y), panel b for two-heavy
    (3 runs for each of three fill orders, log y). Runs continue to twice the
    stop trial so the plateau is visible."""
    fam = cfg.instance.family
    if fam == "regular":
        panel = "a"
        settings = [(cfg.sampler.orientation.value, cfg.sampler.ordering.value)]
        per = runs_per_setting or 5
    elif fam == "two-heavy":
        panel = "b"
        if cfg.instance.beta is not None and cfg.instance.beta == cfg.instance.gamma:
            raise ConfigError("the divergence figure needs beta != gamma")
        settings = list(FIG1B_SETTINGS)
        per = runs_per_setting or 3
    else:
        raise ConfigError("fig1 takes --family regular (panel a) or two-heavy (panel b)")
    if per < 1:
        raise ConfigError("fig1 needs at least one run")
    margins = cfg.instance.build()
    params = cfg.params(margins)
    exact, method = exact_count(margins)
    exact_l10 = ec.log10_of(exact)
    out = Path(cfg.out)
    entries = []  # (global run id, setting, trace)
    for s, (ori, order) in enumerate(settings):
        sampler = replace(cfg.sampler, orientation=Orientation(ori), ordering=Ordering(order))
        ids = [s * per + r for r in range(per)]
        traces = execute_runs(margins, sampler, params, ids, None, cfg.max_trials,
                              extend=FIG1_EXTEND, workers=cfg.workers)
        entries += [(i, f"{ori}/{order}", tr) for i, tr in zip(ids, traces)]

    summ = io.StringIO()
    summ.write(",".join(FIG1_SUMMARY_HEADER) + "\n")
    files = []
    for run, setting, tr in entries:
        name = f"fig1{panel}_run{run}.csv"
        _write(out / name, trace_csv([(run, tr)]))
        files.append(name)
        at_stop = _f10(float(tr.log10_estimates[tr.stop_trial - 1])) if tr.stop_trial else ""
        summ.write(f"{run},{setting},{tr.stop_trial or ''},{at_stop},{_f10(tr.final_log10)},"
                   f"{exact_l10:.10f}\n")
    _write(out / f"fig1{panel}_summary.csv", summ.getvalue())
    if "svg" in cfg.formats:
        traces_text = [(out / f).read_text() for f in files]
        svg = fig1_chart(panel, traces_text, (out / f"fig1{panel}_summary.csv").read_text(),
                         title=cfg.instance.label())
        _write(out / f"fig1{panel}.svg", svg)
    return {"panel": panel, "exact": exact, "exact_method": method, "exact_log10": exact_l10,
            "runs": [dict(_run_summary(r, tr), setting=s) for r, s, tr in entries]}


def fig1_chart(panel: str, trace_texts: Sequence[str], summary_text: str, title: str = "") -> str:
    rows = list(csv.DictReader(io.StringIO(summary_text)))
    setting = {int(r["run"]): r["setting"] for r in rows}
    exact_l10 = float(rows[0]["exact_log10"])
    series = []
    scale = math.floor(exact_l10)
    for text in trace_texts:
        for run, d in read_trace_csv(text).items():
            s = setting[run]
            if panel == "a":
                ys = [10 ** (v - scale) if v != -math.inf else math.nan
                      for v in d["log10_estimate"]]
                series.append(Series(s, d["trial"], ys))
            else:
                series.append(Series(s, d["trial"], d["log10_estimate"], _FIG1B_COLORS.get(s)))
    if panel == "a":
        return render(Chart(title, "trials", f"estimate / 1e{scale}", series,
                            [("exact", 10 ** (exact_l10 - scale))]))
    return render(Chart(title, "trials", "log10 estimate", series, [("exact", exact_l10)]))


# --- figures 2 and 3: trials to stop ------------------------------------------

def _median_stop(margins, sampler, params, runs, max_trials, workers):
    traces = execute_runs(margins, sampler, params, range(runs), None, max_trials,
                          workers=workers)
    stops = [tr.stop_trial if tr.stop_trial is not None else tr.trials for tr in traces]
    unstopped = sum(tr.stop_trial is None for tr in traces)
    return float(np.median(stops)), unstopped


def regular_degree(family: str, n: int) -> int:
    """Degree for the named regular family at size n, clamped to n."""
    if family == "half":
        r = n // 2
    elif family == "5log":
        r = math.floor(5 * math.log(n))
    else:
        try:
            r = int(family)
        except ValueError:
            raise ConfigError(f"unknown regular family {family!r}") from None
    if r > n:
        log.warning("family %s at n=%d gives degree %d > n; clamped to %d", family, n, r, n)
        r = n
    return r


FIG2_FAMILIES = ("5", "10", "5log", "half")
FIG2_HEADER = ("family", "n", "r", "median_trials", "runs", "unstopped")


def cmd_fig2(cfg: RunConfig, ns: Sequence[int], families: Sequence[str] = FIG2_FAMILIES,
             runs: int = 20) -> str:
    params_for = lambda M: cfg.params(M)  # noqa: E731
    buf = io.StringIO()
    buf.write(",".join(FIG2_HEADER) + "\n")
    for fam in families:
        for n in ns:
            r = regular_degree(fam, n)
            margins = make_regular(n, r)
            med, un = _median_stop(margins, cfg.sampler, params_for(margins), runs,
                                   cfg.max_trials, cfg.workers)
            buf.write(f"{fam},{n},{r},{med:g},{runs},{un}\n")
    text = buf.getvalue()
    out = Path(cfg.out)
    _write(out / "fig2.csv", text)
    if "svg" in cfg.formats:
        _write(out / "fig2.svg", fig2_chart((out / "fig2.csv").read_text()))
    return text


def fig2_chart(text: str) -> str:
    by: dict[str, tuple[list, list]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        xs, ys = by.setdefault(row["family"], ([], []))
        xs.append(int(row["n"]))
        ys.append(float(row["median_trials"]))
    names = {"5": "5-regular", "10": "10-regular", "5log": "floor(5 ln n)-regular",
             "half": "floor(n/2)-regular"}
    series = [Series(names.get(f, f"{f}-regular"), xs, ys) for f, (xs, ys) in by.items()]
    return render(Chart("trials to stop, regular instances", "n", "median trials", series))


FIG3_PAIRS = ((0.1, 0.5), (0.5, 0.5), (0.2, 0.8), (0.6, 0.8))
FIG3_HEADER = ("beta", "gamma", "m", "d_r", "d_c", "size", "median_trials", "runs", "unstopped")


def two_heavy_for_size(size: int, beta: float, gamma: float) -> tuple[int, int, int]:
    """(m, d_r, d_c) whose m + n is closest to ``size`` (n = m + d_r - d_c)."""
    best = None
    for m in range(1, size + 1):
        d_r, d_c = two_heavy_degrees(m, beta, gamma)
        n = m + d_r - d_c
        if d_r < 1 or not 1 <= d_c <= m or n < d_r:
            continue
        key = (abs(m + n - size), m)
        if best is None or key < best[0]:
            best = (key, (m, d_r, d_c))
    if best is None:
        raise ConfigError(f"no valid two-heavy instance near size {size} for "
                          f"beta={beta}, gamma={gamma}")
    return best[1]


def cmd_fig3(cfg: RunConfig, sizes: Sequence[int],
             pairs: Sequence[tuple[float, float]] = FIG3_PAIRS, runs: int = 20) -> str:
    buf = io.StringIO()
    buf.write(",".join(FIG3_HEADER) + "\n")
    for beta, gamma in pairs:
        for size in sizes:
            m, d_r, d_c = two_heavy_for_size(size, beta, gamma)
            margins = make_two_heavy(m, d_r, d_c)
            med, un = _median_stop(margins, cfg.sampler, cfg.params(margins), runs,
                                   cfg.max_trials, cfg.workers)
            n = m + d_r - d_c
            buf.write(f"{beta:g},{gamma:g},{m},{d_r},{d_c},{m + n},{med:g},{runs},{un}\n")
    text = buf.getvalue()
    out = Path(cfg.out)
    _write(out / "fig3.csv", text)
    if "svg" in cfg.formats:
        saved = (out / "fig3.csv").read_text()
        _write(out / "fig3_linear.svg", fig3_chart(saved, log_y=False))
        _write(out / "fig3_log.svg", fig3_chart(saved, log_y=True))
    return text


def fig3_chart(text: str, log_y: bool) -> str:
    by: dict[str, tuple[list, list]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        xs, ys = by.setdefault(f"beta={row['beta']}, gamma={row['gamma']}", ([], []))
        xs.append(int(row["size"]))
        ys.append(float(row["median_trials"]))
    series = [Series(k, xs, ys) for k, (xs, ys) in by.items()]
    return render(Chart("trials to stop, two-heavy instances", "m + n", "median trials",
                        series, log_y=log_y))
