import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sistables.errors import TooLarge
from sistables.exact_count import (
    brute_force_count,
    count_one_heavy,
    count_two_heavy,
    dp_count,
    enumerate_tables,
    format_count,
    log10_of,
    scientific,
)
from sistables.margins import (
    Margins,
    make_one_heavy,
    make_regular,
    make_two_heavy,
    margins_of_table,
    validate_margins,
)

from oracles import naive_count, naive_tables


def test_small_known_counts():
    assert brute_force_count(validate_margins([1, 1, 2], [1, 1, 2])) == 5
    assert brute_force_count(make_one_heavy(3, 2)) == 60
    assert dp_count(make_one_heavy(3, 2)) == 60
    assert count_one_heavy(3, 2) == 60
    assert count_one_heavy(2, 1) == 6
    assert dp_count(make_regular(4, 2)) == 90
    assert dp_count(validate_margins([1] * 6, [1] * 6)) == math.factorial(6)
    assert dp_count(validate_margins([0, 0], [0])) == 1


def test_enumerate_tables_yields_distinct_valid_tables():
    m = validate_margins([2, 1, 1], [1, 2, 1])
    tables = [t.copy() for t in enumerate_tables(m)]
    assert len({t.tobytes() for t in tables}) == len(tables) == naive_count(m.row_sums, m.col_sums)
    assert all(margins_of_table(t) == m for t in tables)


def test_infeasible_counts_zero():
    m = Margins((2, 2, 0), (3, 1, 0))
    assert brute_force_count(m) == 0 and dp_count(m) == 0


@pytest.mark.parametrize("m, d", [(1, 1), (2, 3), (4, 2), (3, 4)])
def test_one_heavy_closed_form(m, d):
    margins = make_one_heavy(m, d)
    assert count_one_heavy(m, d) == naive_count(margins.row_sums, margins.col_sums)
    assert count_one_heavy(m, d) == dp_count(margins)


@pytest.mark.parametrize("m, d_r, d_c", [(2, 2, 1), (3, 2, 2), (4, 3, 3), (4, 2, 4), (5, 3, 2)])
def test_two_heavy_closed_form(m, d_r, d_c):
    margins = make_two_heavy(m, d_r, d_c)
    assert count_two_heavy(m, d_r, d_c) == naive_count(margins.row_sums, margins.col_sums)
    assert count_two_heavy(m, d_r, d_c) == dp_count(margins)
    assert count_two_heavy(2, 2, 1) == 12


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.lists(
    st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=1, max_size=5)))
def test_dp_matches_naive_on_random_feasible(table):
    m = margins_of_table(table)
    expected = naive_count(m.row_sums, m.col_sums)
    assert dp_count(m) == expected
    assert brute_force_count(m) == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.lists(
    st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=1, max_size=6)),
    st.randoms(use_true_random=False))
def test_count_invariances(table, rnd):
    m = margins_of_table(table)
    c = dp_count(m)
    assert dp_count(m.transpose()) == c
    rows, cols = list(m.row_sums), list(m.col_sums)
    rnd.shuffle(rows)
    rnd.shuffle(cols)
    assert dp_count(Margins(tuple(rows), tuple(cols))) == c


def test_brute_force_refuses_large():
    with pytest.raises(TooLarge):
        brute_force_count(make_regular(12, 6))


def test_dp_budget():
    with pytest.raises(TooLarge):
        dp_count(make_regular(30, 10), budget=50)


def test_dp_mid_size_against_known_value():
    # 3-regular 6x6 0/1 matrices (OEIS A001501: 1, 2, 6, 90, 2040, 67950, ...: n=6 -> 297200)
    assert dp_count(make_regular(6, 3)) == 297200
    assert dp_count(make_regular(5, 2)) == 2040


def test_log10_and_formatting():
    assert log10_of(10**300) == pytest.approx(300, abs=1e-12)
    big = 12345 * 10**500
    assert log10_of(big) == pytest.approx(500 + math.log10(12345), abs=1e-12)
    assert scientific(60) == (6000, 1)
    assert format_count(60) == "6.000 × 10^1"
    assert format_count(99996) == "1.000 × 10^5"
    assert format_count(1) == "1.000 × 10^0"
    assert format_count(10381 * 10**277) == "1.038 × 10^281"
    with pytest.raises(ValueError):
        log10_of(0)


def test_random_margins_triangle_small():
    rnd = random.Random(5)
    for _ in range(40):
        r, c = rnd.randint(1, 4), rnd.randint(1, 4)
        table = np.array([[rnd.randint(0, 1) for _ in range(c)] for _ in range(r)])
        m = margins_of_table(table)
        tables = naive_tables(m.row_sums, m.col_sums)
        assert brute_force_count(m) == dp_count(m) == len(tables)
