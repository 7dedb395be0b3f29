import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sistables.errors import (
    EmptyMargins,
    EntryTooLarge,
    InfeasibleFamily,
    MarginsError,
    TotalMismatch,
)
from sistables.margins import (
    Margins,
    ResidualState,
    gale_ryser_feasible,
    make_one_heavy,
    make_regular,
    make_two_heavy,
    margins_of_table,
    two_heavy_degrees,
    validate_margins,
)

from oracles import naive_count


def test_validate_accepts_and_reports_dims():
    m = validate_margins([1, 2], [2, 1])
    assert (m.n_rows, m.n_cols, m.total) == (2, 2, 3)


@pytest.mark.parametrize(
    "rows, cols, err",
    [
        ([], [1], EmptyMargins),
        ([1], [], EmptyMargins),
        ([1, 1], [1], TotalMismatch),
        ([3], [1, 1, 1, 0], None),
        ([3], [2, 1], EntryTooLarge),
        ([1, 1, 1], [3], None),
        ([1, 1], [2, 0, 0], None),
        ([-1, 2], [1], MarginsError),
    ],
)
def test_validate_errors(rows, cols, err):
    if err is None:
        validate_margins(rows, cols)
    else:
        with pytest.raises(err):
            validate_margins(rows, cols)


def test_text_round_trip():
    m = make_two_heavy(5, 3, 4)
    assert Margins.from_text(m.to_text()) == m
    assert m.to_text().startswith("rows: 1 1 1 1 1 3\ncols: ")


@pytest.mark.parametrize("text", ["rows: 1 1\n", "rows: 1\nrows: 1\n", "rows: a\ncols: 1\n",
                                  "rows: 2\ncols: 1\n"])
def test_text_rejects_malformed(text):
    with pytest.raises(MarginsError):
        Margins.from_text(text)


def test_families():
    assert make_one_heavy(3, 2) == Margins((1, 1, 1, 2), (1,) * 5)
    m = make_two_heavy(300, 179, 240)
    assert (m.n_rows, m.n_cols) == (301, 240)
    assert m.row_sums[-1] == 179 and m.col_sums[-1] == 240
    assert make_regular(4, 2) == Margins((2,) * 4, (2,) * 4)
    assert two_heavy_degrees(300, 0.6, 0.8) == (180, 240)
    with pytest.raises(InfeasibleFamily):
        make_two_heavy(3, 1, 4)
    with pytest.raises(MarginsError):
        make_regular(3, 4)


def test_two_heavy_precondition_n_ge_dr():
    # n = m + d_r - d_c must be at least d_r
    make_two_heavy(4, 2, 4)  # n = 2
    with pytest.raises(InfeasibleFamily):
        make_two_heavy(4, 3, 5)


def test_residual_state_bounds():
    ResidualState((0, 2), 2)
    with pytest.raises(ValueError):
        ResidualState((3,), 2)
    with pytest.raises(ValueError):
        ResidualState((1,), 0)


@pytest.mark.parametrize(
    "rows, cols, expected",
    [
        ((2, 2), (2, 2), True),
        ((2, 0), (1, 1), True),
        ((3, 1), (2, 2), False),  # row of 3 in 2 columns
        ((2, 2, 0), (2, 1, 1), True),
        ((3, 3, 0), (2, 2, 2), True),
        ((3, 3, 1), (3, 2, 2), True),
        ((2, 2, 0), (3, 1, 0), False),  # column of 3 but only two non-empty rows
        ((3, 1, 0), (2, 2, 0), False),
    ],
)
def test_gale_ryser_examples(rows, cols, expected):
    assert gale_ryser_feasible(rows, cols) == (naive_count(rows, cols) > 0)
    assert gale_ryser_feasible(rows, cols) == expected


def test_gale_ryser_exhaustive_small():
    for m, n in itertools.product(range(1, 4), range(1, 4)):
        for rows in itertools.product(range(n + 1), repeat=m):
            for cols in itertools.product(range(m + 1), repeat=n):
                if sum(rows) != sum(cols):
                    continue
                assert gale_ryser_feasible(rows, cols) == (naive_count(rows, cols) > 0), (rows, cols)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 4).flatmap(lambda m: st.tuples(
    st.lists(st.integers(0, 4), min_size=m, max_size=m),
    st.lists(st.integers(0, m), min_size=1, max_size=4))))
def test_gale_ryser_matches_enumeration(pair):
    rows, cols = pair
    expect = sum(rows) == sum(cols) and max(rows) <= len(cols) and naive_count(rows, cols) > 0
    assert gale_ryser_feasible(rows, cols) == expect


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(0, 1), min_size=3, max_size=3), min_size=1, max_size=5))
def test_margins_of_random_table_are_feasible(table):
    m = margins_of_table(table)
    assert m.is_feasible()
    assert m.transpose().is_feasible()
