"""Exact table counts in arbitrary-precision integers.

Three independent routes: brute-force enumeration, a dynamic program over
histograms of residual row sums, and closed forms for the one-heavy and
two-heavy families.
"""
from __future__ import annotations

import math
from itertools import combinations
from typing import Iterator

import numpy as np

from .errors import TooLarge, ZeroCount
from .margins import Margins, make_two_heavy

BRUTE_FORCE_CELLS = 30
BRUTE_FORCE_BRANCHES = 10**8
DP_STATE_BUDGET = 5_000_000


def _brute_force_size(margins: Margins) -> int:
    size = 1
    for c in margins.col_sums:
        size *= math.comb(margins.n_rows, c)
    return size


def enumerate_tables(margins: Margins) -> Iterator[np.ndarray]:
    """Yield every table with the given margins, column by column."""
    m, n = margins.n_rows, margins.n_cols
    cols = margins.col_sums
    residual = list(margins.row_sums)
    table = np.zeros((m, n), dtype=np.int8)

    def fill(j: int):
        if j == n:
            if not any(residual):
                yield table.copy()
            return
        left = n - j - 1
        live = [i for i in range(m) if residual[i] > 0]
        if any(residual[i] > left + 1 for i in live):
            return
        forced = [i for i in live if residual[i] > left]
        if len(forced) > cols[j]:
            return
        optional = [i for i in live if residual[i] <= left]
        for extra in combinations(optional, cols[j] - len(forced)):
            chosen = forced + list(extra)
            for i in chosen:
                residual[i] -= 1
                table[i, j] = 1
            yield from fill(j + 1)
            for i in chosen:
                residual[i] += 1
                table[i, j] = 0

    yield from fill(0)


def brute_force_count(margins: Margins) -> int:
    if (
        margins.n_rows * margins.n_cols > BRUTE_FORCE_CELLS
        and _brute_force_size(margins) > BRUTE_FORCE_BRANCHES
    ):
        raise TooLarge(
            f"{margins.n_rows}x{margins.n_cols} is too large for brute force; "
            "use the dp or closed-form counters"
        )
    return sum(1 for _ in enumerate_tables(margins))


def count_one_heavy(m: int, d: int) -> int:
    """Z(m, d) = C(m+d, d) * m!"""
    if m < 0 or d < 1:
        raise ValueError(f"count_one_heavy needs m >= 0, d >= 1 (got {m}, {d})")
    return math.comb(m + d, d) * math.factorial(m)


def count_two_heavy(m: int, d_r: int, d_c: int) -> int:
    make_two_heavy(m, d_r, d_c)  # precondition check
    n = m + d_r - d_c
    return (
        math.comb(m, d_c) * math.comb(n, d_r) * math.factorial(m - d_c)
        + math.comb(m, d_c - 1) * math.comb(n, d_r - 1) * math.factorial(m - d_c + 1)
    )


def _picks(hist: tuple[int, ...], need: int, top: int):
    """Ways to take ``need`` ones from residual classes 1..top.

    Yields (pick vector indexed by class, multiplicity prod C(h_v, p_v)).
    """
    pick = [0] * len(hist)

    def rec(v: int, left: int, mult: int):
        if left == 0:
            yield pick, mult
            return
        if v == 0:
            return
        avail = sum(hist[1 : v + 1])
        if avail < left:
            return
        for p in range(min(hist[v], left), -1, -1):
            pick[v] = p
            yield from rec(v - 1, left - p, mult * math.comb(hist[v], p))
        pick[v] = 0

    yield from rec(top, need, 1)


def dp_count(margins: Margins, budget: int = DP_STATE_BUDGET) -> int:
    """Count tables by advancing a histogram of residual row sums column by column.

    Runs on whichever orientation has the smaller maximum margin.
    """
    if max(margins.col_sums) < max(margins.row_sums):
        margins = margins.transpose()
    if margins.total == 0:
        return 1
    top = max(margins.row_sums)
    hist = [0] * (top + 1)
    for r in margins.row_sums:
        hist[r] += 1
    cols = sorted(margins.col_sums, reverse=True)
    n = len(cols)
    states: dict[tuple[int, ...], int] = {tuple(hist): 1}
    for j, c in enumerate(cols):
        left = n - j - 1
        nxt: dict[tuple[int, ...], int] = {}
        for h, ways in states.items():
            # rows with residual > left must take a one in this column
            if sum(h[left + 1 :]) > c:
                continue
            for pick, mult in _picks(h, c, top):
                if any(pick[v] < h[v] for v in range(left + 1, top + 1)):
                    continue
                new = list(h)
                for v in range(1, top + 1):
                    if pick[v]:
                        new[v] -= pick[v]
                        new[v - 1] += pick[v]
                key = tuple(new)
                nxt[key] = nxt.get(key, 0) + ways * mult
        states = nxt
        if len(states) > budget:
            raise TooLarge(f"dp_count state budget {budget} exceeded")
        if not states:
            return 0
    final = [0] * (top + 1)
    final[0] = margins.n_rows
    return states.get(tuple(final), 0)


def log10_of(count: int) -> float:
    """log10 of a big integer via its bit length and leading 64 bits."""
    if count < 1:
        raise ZeroCount("log10 of a zero count is undefined")
    shift = max(count.bit_length() - 64, 0)
    return math.log10(count >> shift) + shift * math.log10(2)


def scientific(count: int, digits: int = 4) -> tuple[int, int]:
    """Exact rounding to ``digits`` significant figures: (mantissa, exponent).

    For 9.684e205 with digits=4 returns (9684, 205).
    """
    if count < 1:
        raise ZeroCount("no scientific form for zero")
    exp = len(str(count)) - 1
    drop = exp - (digits - 1)
    if drop <= 0:
        mant = count * 10 ** (-drop)
    else:
        unit = 10**drop
        mant = (count + unit // 2) // unit
    if mant >= 10**digits:
        mant //= 10
        exp += 1
    return mant, exp


def format_count(count: int, digits: int = 4) -> str:
    if count == 0:
        return "0"
    mant, exp = scientific(count, digits)
    text = str(mant)
    return f"{text[0]}.{text[1:]} × 10^{exp}"
