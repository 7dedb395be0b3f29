"""Instance representation: row/column sums, the two heavy families, and
Gale-Ryser feasibility.

A note on rounding: the two-heavy family takes ``d_r = floor(beta * m)``
everywhere in this package; one-heavy instances are built from explicit
integers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptyMargins,
    EntryTooLarge,
    InfeasibleFamily,
    MarginsError,
    TotalMismatch,
)


@dataclass(frozen=True)
class Margins:
    row_sums: tuple[int, ...]
    col_sums: tuple[int, ...]

    @property
    def n_rows(self) -> int:
        return len(self.row_sums)

    @property
    def n_cols(self) -> int:
        return len(self.col_sums)

    @property
    def total(self) -> int:
        return sum(self.row_sums)

    def transpose(self) -> "Margins":
        return Margins(self.col_sums, self.row_sums)

    def is_feasible(self) -> bool:
        return gale_ryser_feasible(self.row_sums, self.col_sums)

    def rows_array(self) -> np.ndarray:
        return np.asarray(self.row_sums, dtype=np.int64)

    def cols_array(self) -> np.ndarray:
        return np.asarray(self.col_sums, dtype=np.int64)

    def to_text(self) -> str:
        return (
            "rows: " + " ".join(map(str, self.row_sums)) + "\n"
            "cols: " + " ".join(map(str, self.col_sums)) + "\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "Margins":
        found: dict[str, list[int]] = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, rest = line.partition(":")
            key = key.strip().lower()
            if not sep or key not in ("rows", "cols") or key in found:
                raise MarginsError(f"malformed margins line: {raw!r}")
            try:
                found[key] = [int(tok) for tok in rest.split()]
            except ValueError as exc:
                raise MarginsError(f"non-integer entry in {raw!r}") from exc
        if set(found) != {"rows", "cols"}:
            raise MarginsError("margins text needs a 'rows:' and a 'cols:' line")
        return validate_margins(found["rows"], found["cols"])


@dataclass(frozen=True)
class ResidualState:
    """Residual row sums ``r'`` with ``n'`` columns still to be assigned."""

    residual_rows: tuple[int, ...]
    columns_remaining: int

    def __post_init__(self):
        if self.columns_remaining < 1:
            raise MarginsError("columns_remaining must be positive")
        if any(r < 0 or r > self.columns_remaining for r in self.residual_rows):
            raise MarginsError("residual row sums must lie in [0, columns_remaining]")


def validate_margins(row_sums: Sequence[int], col_sums: Sequence[int]) -> Margins:
    rows = tuple(int(r) for r in row_sums)
    cols = tuple(int(c) for c in col_sums)
    if not rows or not cols:
        raise EmptyMargins("row and column sums must be non-empty")
    if min(rows) < 0 or min(cols) < 0:
        raise MarginsError("margins must be non-negative")
    if sum(rows) != sum(cols):
        raise TotalMismatch(f"row total {sum(rows)} != column total {sum(cols)}")
    if max(rows) > len(cols):
        raise EntryTooLarge(f"row sum {max(rows)} exceeds {len(cols)} columns")
    if max(cols) > len(rows):
        raise EntryTooLarge(f"column sum {max(cols)} exceeds {len(rows)} rows")
    return Margins(rows, cols)


def make_one_heavy(m: int, d: int) -> Margins:
    """Rows ``(1, ..., 1, d)`` (m ones), ``m + d`` unit columns."""
    if m < 0 or d < 1:
        raise InfeasibleFamily(f"one-heavy needs m >= 0 and d >= 1, got m={m}, d={d}")
    return validate_margins([1] * m + [d], [1] * (m + d))


def make_two_heavy(m: int, d_r: int, d_c: int) -> Margins:
    """Rows ``(1, ..., 1, d_r)`` and columns ``(1, ..., 1, d_c)``, m+1 rows."""
    n = m + d_r - d_c
    if m < 1 or d_r < 1 or not 1 <= d_c <= m or n < d_r:
        raise InfeasibleFamily(
            f"two-heavy needs m >= 1, d_r >= 1, 1 <= d_c <= m, n >= d_r "
            f"(got m={m}, d_r={d_r}, d_c={d_c}, n={n})"
        )
    return validate_margins([1] * m + [d_r], [1] * n + [d_c])


def two_heavy_degrees(m: int, beta: float, gamma: float) -> tuple[int, int]:
    return int(np.floor(beta * m)), int(np.floor(gamma * m))


def make_regular(n: int, r: int) -> Margins:
    if n < 1 or not 0 <= r <= n:
        raise MarginsError(f"regular(n={n}, r={r}) needs n >= 1 and 0 <= r <= n")
    return validate_margins([r] * n, [r] * n)


def gale_ryser_feasible(row_sums: Sequence[int], col_sums: Sequence[int]) -> bool:
    """True iff some 0/1 matrix has these row and column sums.

    Rows are counting-sorted (values are bounded by the column count) and
    compared against the conjugate of the column sums.
    """
    rows = np.asarray(row_sums, dtype=np.int64)
    cols = np.asarray(col_sums, dtype=np.int64)
    if rows.size == 0 or cols.size == 0:
        return rows.sum() == 0 and cols.sum() == 0
    if rows.min() < 0 or cols.min() < 0 or rows.sum() != cols.sum():
        return False
    m, n = rows.size, cols.size
    if rows.max() > n or cols.max() > m:
        return False
    # counting sort, descending
    row_hist = np.bincount(rows, minlength=n + 1)
    sorted_rows = np.repeat(np.arange(n, -1, -1), row_hist[::-1])
    col_hist = np.bincount(cols, minlength=m + 1)
    at_least = np.cumsum(col_hist[::-1])[::-1]  # at_least[s] = #{j : c_j >= s}
    conjugate = np.cumsum(at_least[1 : m + 1])
    return bool(np.all(np.cumsum(sorted_rows) <= conjugate))


def margins_of_table(table) -> Margins:
    arr = np.asarray(table, dtype=np.int64)
    if arr.ndim != 2 or arr.size == 0:
        raise EmptyMargins("table must be a non-empty 2-d array")
    return Margins(tuple(int(v) for v in arr.sum(axis=1)), tuple(int(v) for v in arr.sum(axis=0)))
