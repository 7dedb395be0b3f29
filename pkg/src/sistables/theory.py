"""Closed-form quantities behind the negative result for the heavy families.

Integer arguments give exact :class:`fractions.Fraction` results; real
arguments are evaluated in whatever numeric type is passed (float or mpmath).
Root finding runs in mpmath at 40 significant digits.

One-heavy family, rows ``(1,..,1,d)``, ``m + d`` unit columns:

* first-column marginals ``pi1 = d/(m+d)`` (uniform) and
  ``mu1 = d(m+d-1) / (d(m+d-1) + m^2)`` (proposal);
* bounds ``f(d,m,i)`` on the uniform and ``g(d,m,i)`` on the proposal
  probability of a one in column ``i`` of the heavy row, and their limits
  along ``d = beta m``, ``i = alpha m``.

Two-heavy family, rows ``(1,..,1,d_r)``, columns ``(1,..,1,d_c)``: the same
for the first unit column (``f2``/``g2``), later unit columns (``f3``/``g3``),
and the unit-column subtable left after the heavy column (``f4``/``g4``).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from numbers import Integral

import mpmath

from .errors import InfeasibleFamily, OutOfRange

_DPS = 40


def _q(x):
    return Fraction(x) if isinstance(x, Integral) else x


def _check_two_heavy(m, d_r, d_c):
    n = m + d_r - d_c
    if m < 1 or d_r < 1 or not 1 <= d_c <= m or n < d_r:
        raise InfeasibleFamily(f"bad two-heavy parameters m={m}, d_r={d_r}, d_c={d_c}")
    return n


# --- one heavy row ------------------------------------------------------------

def marginals_one_heavy(m: int, d: int):
    """(pi1, mu1): uniform and proposal probability of a one at (heavy row, column 1)."""
    if m < 1 or d < 1:
        raise OutOfRange("marginals_one_heavy needs m >= 1 and d >= 1")
    m, d = _q(m), _q(d)
    pi1 = d / (m + d)
    mu1 = d * (m + d - 1) / (d * (m + d - 1) + m * m)
    return pi1, mu1


def bounds_one_heavy(m: int, d: int, i: int):
    if not 0 <= i < d:
        raise OutOfRange(f"need 0 <= i < d (i={i}, d={d})")
    m, d, i = _q(m), _q(d), _q(i)
    f = d / (m + d - i)
    g = (d - i) * (m + d - i - 1) / (d * (m + d - 1) + m * m)
    return f, g


def gap_one_heavy(beta):
    beta = _q(beta)
    return beta * beta / ((1 + beta) * (beta * (1 + beta) + 1))


def asymptotics_one_heavy(alpha, beta):
    """(f_inf, g_inf, gap) at column fraction alpha of the heavy row with d ~ beta m."""
    if not 0 <= alpha < beta:
        raise OutOfRange(f"need 0 <= alpha < beta (alpha={alpha}, beta={beta})")
    alpha, beta = _q(alpha), _q(beta)
    f = beta / (1 + beta - alpha)
    g = (beta - alpha) * (1 + beta - alpha) / (beta * (1 + beta) + 1)
    return f, g, gap_one_heavy(beta)


def _bisect(func, lo, hi, tol=1e-12, max_iter=400):
    """Root of a decreasing function with func(lo) > 0 > func(hi)."""
    with mpmath.workdps(_DPS):
        lo, hi = mpmath.mpf(lo), mpmath.mpf(hi)
        for _ in range(max_iter):
            mid = (lo + hi) / 2
            val = func(mid)
            if abs(val) <= tol * 1e-6 or hi - lo < mpmath.mpf(10) ** (-_DPS + 5):
                return mid
            if val > 0:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2


def alpha_threshold_one_heavy(beta) -> float:
    """The alpha < beta where g_inf - f_inf has fallen to half the gap."""
    if beta <= 0:
        raise OutOfRange("beta must be positive")
    with mpmath.workdps(_DPS):
        b = mpmath.mpf(beta)
        half = gap_one_heavy(b) / 2

        def h(a):
            f, g, _ = asymptotics_one_heavy(a, b)
            return g - f - half

        return float(_bisect(h, 0, b))


# --- two heavy rows/columns ---------------------------------------------------

def marginals_two_heavy(m: int, d_r: int, d_c: int):
    """(f2, g2) for the first unit column of the two-heavy instance.

    f2 is the exact uniform probability of a one at (heavy row, unit column).
    g2 is the proposal probability written with n rather than n + 1 columns
    remaining; it is the exact proposal marginal of ``(m, d_r, d_c + 1)`` and
    has the same limit as the marginal of ``(m, d_r, d_c)``.
    """
    n = _check_two_heavy(m, d_r, d_c)
    m, d_r, d_c, n = _q(m), _q(d_r), _q(d_c), _q(n)
    try:
        f2 = (d_r * (n - d_r + 1) + d_c * d_r * (d_r - 1)) / (n * (n - d_r + 1) + n * d_c * d_r)
        g2 = d_r * (n - 1) / (d_r * (n - 1) + m * (n - d_r))
    except ZeroDivisionError:
        raise OutOfRange(f"marginals undefined at m={m}, d_r={d_r}, d_c={d_c}") from None
    return f2, g2


def bounds_two_heavy(m: int, d_r: int, d_c: int, i: int):
    n = _check_two_heavy(m, d_r, d_c)
    if not 1 <= i < min(n - d_r, d_r):
        raise OutOfRange(f"need 1 <= i < min(n - d_r, d_r) = {min(n - d_r, d_r)} (i={i})")
    m, d_r, d_c, n, i = _q(m), _q(d_r), _q(d_c), _q(n), _q(i)
    f3 = (d_r * (n - d_r + 1) + d_c * d_r * d_r) / (
        (n - i) * (n - i - d_r) + (n - i) * d_c * (d_r - i))
    g3 = (d_r - i) * (n - i) / (d_r * n + m * (n - d_r))
    return f3, g3


@dataclass(frozen=True)
class TwoHeavyLimits:
    f2: object
    g2: object
    f3: object
    g3: object
    gap: object


def asymptotics_two_heavy(alpha, beta, gamma) -> TwoHeavyLimits:
    if not (beta > 0 and 0 < gamma < 1 and 0 <= alpha < min(1 - gamma, beta)):
        raise OutOfRange(
            f"need beta > 0, 0 < gamma < 1, 0 <= alpha < min(1-gamma, beta) "
            f"(alpha={alpha}, beta={beta}, gamma={gamma})")
    a, b, c = _q(alpha), _q(beta), _q(gamma)
    f2 = b / (1 + b - c)
    g2 = b * (1 + b - c) / (b * (1 + b - c) + 1 - c)
    f3 = b * b / ((1 + b - c - a) * (b - a))
    g3 = (b - a) * (1 + b - c - a) / (b * (1 + b - c) + 1 - c)
    return TwoHeavyLimits(f2, g2, f3, g3, g2 - f2)


def subtable_asymptotics(alpha, beta, alpha2):
    """(f4_inf, g4_inf) for the unit-column subtable after the heavy column."""
    if not (0 <= alpha < min(1, beta) and 0 <= alpha2 < beta - alpha):
        raise OutOfRange(
            f"need 0 <= alpha < min(1, beta) and 0 <= alpha2 < beta - alpha "
            f"(alpha={alpha}, beta={beta}, alpha2={alpha2})")
    a, b, a2 = _q(alpha), _q(beta), _q(alpha2)
    s = b / (1 - a)
    f4 = s / (1 + b - a - a2)
    g4 = (b - a - a2) * (1 + b - a - a2) / (s * (1 / (1 - a) + s) + 1 / ((1 - a) * (1 - a)))
    return f4, g4


def alpha_threshold_two_heavy(beta, gamma) -> float:
    """alpha below min(1-gamma, beta) keeping g3_inf - f3_inf >= gap/2.

    Returns the crossing point if there is one, else half the upper limit.
    """
    with mpmath.workdps(_DPS):
        b, c = mpmath.mpf(beta), mpmath.mpf(gamma)
        top = min(1 - c, b)
        gap = asymptotics_two_heavy(0, b, c).gap
        if gap <= 0:
            raise OutOfRange("no positive gap: needs g2_inf > f2_inf")

        def h(a):
            lim = asymptotics_two_heavy(a, b, c)
            return lim.g3 - lim.f3 - gap / 2

        edge = top * (1 - mpmath.mpf(10) ** -12)
        if h(edge) >= 0:
            return float(top / 2)
        return float(_bisect(h, 0, edge))


def alpha_threshold_subtable(beta) -> float:
    """alpha = alpha' below min(1, beta/2) keeping g4_inf - f4_inf >= gap_beta/2."""
    with mpmath.workdps(_DPS):
        b = mpmath.mpf(beta)
        top = min(mpmath.mpf(1), b / 2)
        half = gap_one_heavy(b) / 2

        def h(a):
            f4, g4 = subtable_asymptotics(a, b, a)
            return g4 - f4 - half

        edge = top * (1 - mpmath.mpf(10) ** -12)
        if h(edge) >= 0:
            return float(top / 2)
        return float(_bisect(h, 0, edge))


# --- probability bounds -------------------------------------------------------

def underestimate_probability_bound(p: float, t: int, a: float) -> float:
    """Lower bound ``1 - 2pt - 1/a`` on P(X_t <= a * pi(complement of A) * |Omega|)
    when the proposal gives the set A mass at most p."""
    if not (0 <= p <= 0.5 and a > 1 and t >= 0):
        raise OutOfRange("need 0 <= p <= 1/2, a > 1, t >= 0")
    return 1 - 2 * p * t - 1 / a


def failure_bound(alpha: float, f: float, g: float, b2: float | None, m: int):
    """(b1, 3 (b1 b2)^m) with b1 = exp(-(g-f)^2 alpha / 16).

    ``b2`` defaults to the midpoint of (1, 1/b1).
    """
    if not (0 <= f < g <= 1 and 0 < alpha < 1):
        raise OutOfRange(f"need 0 <= f < g <= 1 and 0 < alpha < 1 (f={f}, g={g}, alpha={alpha})")
    b1 = math.exp(-((g - f) ** 2) * alpha / 16)
    if b2 is None:
        b2 = default_b2(b1)
    if not 1 < b2 < 1 / b1:
        raise OutOfRange(f"need 1 < b2 < 1/b1 = {1 / b1} (b2={b2})")
    return b1, 3 * (b1 * b2) ** m


def default_b2(b1: float) -> float:
    return (1 + 1 / b1) / 2


# --- reports ------------------------------------------------------------------

@dataclass
class SeparationCase:
    """Constants of one application of the separation lemma."""

    label: str
    alpha: float
    f_limit: float
    g_limit: float
    epsilon: float
    f: float
    g: float
    b1: float
    b2: float

    @property
    def s1(self) -> float:
        return self.b1 * self.b2


@dataclass
class TheoryReport:
    family: str
    params: dict
    values: dict = field(default_factory=dict)
    cases: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"family": self.family, "params": self.params, "values": self.values,
               "cases": [dict(asdict(c), s1=c.s1) for c in self.cases], "notes": self.notes}
        return _jsonable(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def to_text(self) -> str:
        rows = [("family", self.family)]
        rows += [(k, v) for k, v in self.params.items()]
        rows += [(k, v) for k, v in self.values.items()]
        for c in self.cases:
            for k, v in asdict(c).items():
                if k != "label":
                    rows.append((f"{c.label}.{k}", v))
            rows.append((f"{c.label}.s1", c.s1))
        width = max(len(k) for k, _ in rows)
        lines = [f"{k.ljust(width)}  {_fmt(v)}" for k, v in rows]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, Fraction):
        return f"{float(v):.12g} ({v})"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _case(label, alpha, f_lim, g_lim, gap, lemma_alpha=None) -> SeparationCase:
    eps = float(gap) / 8
    f = float(f_lim) + eps
    g = float(g_lim) - eps
    b1, _ = failure_bound(lemma_alpha if lemma_alpha is not None else alpha, f, g, None, 1)
    return SeparationCase(label, float(alpha), float(f_lim), float(g_lim), eps, f, g, b1,
                          default_b2(b1))


def _finish(report: TheoryReport, m: int | None):
    if not report.cases:
        return report
    s1 = max(c.s1 for c in report.cases)
    s2 = min(c.b2 for c in report.cases)
    report.values["s1"] = s1
    report.values["s2"] = s2
    if m is not None:
        report.values["failure_probability_bound"] = 3 * s1**m
        report.values["log10_underestimation_factor"] = m * math.log10(s2)
    return report


def one_heavy_report(beta: float, m: int | None = None) -> TheoryReport:
    rep = TheoryReport("one-heavy", {"beta": beta, "m": m})
    alpha = alpha_threshold_one_heavy(beta)
    f_lim, g_lim, gap = asymptotics_one_heavy(alpha, beta)
    rep.values.update(alpha=alpha, gap=float(gap), f_inf=float(f_lim), g_inf=float(g_lim))
    # the separation lemma wants alpha < 1; any smaller alpha keeps the gap
    lemma_alpha = min(alpha, 0.5)
    rep.cases.append(_case("columns", lemma_alpha, *asymptotics_one_heavy(lemma_alpha, beta)))
    if m is not None:
        d = math.floor(beta * m)
        rep.params["d"] = d
        pi1, mu1 = marginals_one_heavy(m, d)
        rep.values.update(pi1=float(pi1), mu1=float(mu1))
        i = math.floor(alpha * m)
        if 0 <= i < d:
            f, g = bounds_one_heavy(m, d, i)
            rep.values.update(i=i, f=float(f), g=float(g))
    return _finish(rep, m)


def two_heavy_report(beta: float, gamma: float, m: int | None = None,
                     d_r: int | None = None, d_c: int | None = None) -> TheoryReport:
    rep = TheoryReport("two-heavy", {"beta": beta, "gamma": gamma, "m": m})
    lim0 = asymptotics_two_heavy(0, beta, gamma)
    gap = float(lim0.gap)
    rep.values.update(f2_inf=float(lim0.f2), g2_inf=float(lim0.g2), gap=gap)
    if m is not None:
        d_r = math.floor(beta * m) if d_r is None else d_r
        d_c = math.floor(gamma * m) if d_c is None else d_c
        rep.params.update(d_r=d_r, d_c=d_c, n=m + d_r - d_c)
        f2, g2 = marginals_two_heavy(m, d_r, d_c)
        rep.values.update(f2=float(f2), g2=float(g2))
    if abs(gap) < 1e-12:
        rep.notes.append("no separation (gap=0): beta == gamma, the underestimation "
                         "result needs beta != gamma")
        return rep
    if gap < 0:
        rep.notes.append("gap < 0: uniform marginal exceeds the proposal marginal; the "
                         "mirrored case applies and its bounds are not evaluated here")
        return rep
    a_cols = alpha_threshold_two_heavy(beta, gamma)
    a_sub = alpha_threshold_subtable(beta)
    alpha = min(a_cols, a_sub, 0.5)
    rep.values.update(alpha_columns=a_cols, alpha_subtable=a_sub, alpha=alpha)
    lim = asymptotics_two_heavy(alpha, beta, gamma)
    rep.values.update(f3_inf=float(lim.f3), g3_inf=float(lim.g3))
    f4, g4 = subtable_asymptotics(alpha, beta, alpha)
    gap_b = gap_one_heavy(beta)
    rep.values.update(f4_inf=float(f4), g4_inf=float(g4), gap_beta=float(gap_b))
    rep.cases.append(_case("unit_first", alpha, lim.f3, lim.g3, gap))
    rep.cases.append(_case("heavy_early", alpha, f4, g4, gap_b,
                           lemma_alpha=alpha * (1 - alpha)))
    if m is not None:
        i = math.floor(alpha * m)
        n = m + d_r - d_c
        if 1 <= i < min(n - d_r, d_r):
            f3, g3 = bounds_two_heavy(m, d_r, d_c, i)
            rep.values.update(i=i, f3=float(f3), g3=float(g3))
    return _finish(rep, m)
