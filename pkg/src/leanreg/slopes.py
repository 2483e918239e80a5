"""Regression slopes as distance-weighted averages of pairwise slopes.

The slope through a pair of observations is (y_i - y_j)/(x_i - x_j);
weighting each pair by its squared horizontal distance (x_i - x_j)^2
and averaging reproduces the least-squares coefficient exactly.  For
multiple regression the same holds after the regressor is linearly
adjusted for all other columns (intercept included), which also centers
it.  The O(n^2) pair enumeration is kept deliberately naive: it is an
independent oracle for the normal-equation solver, not a fast path.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .core import DesignMatrix
from .exceptions import (
    CoefficientIndexError,
    DomainError,
    SingularSystemError,
    ZeroWeightError,
)

__all__ = [
    "PairwiseSlopeSummary",
    "pairwise_slope_simple",
    "adjust_regressor",
    "pairwise_slope_multiple",
    "pair_table_csv",
]


@dataclass(frozen=True)
class PairwiseSlopeSummary:
    """Weighted-average-of-pairwise-slopes form of one coefficient.

    ``total_weight`` sums (x_i - x_j)^2 over ordered pairs; pairs with
    x_i == x_j carry zero weight, so their undefined slope never enters.
    """

    beta: float
    total_weight: float
    pair_count: int


def pairwise_slope_simple(x, y) -> PairwiseSlopeSummary:
    """sum_{i != j} (x_i - x_j)(y_i - y_j) / sum_{i != j} (x_i - x_j)^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y must be one-dimensional and equally long")
    if x.shape[0] < 2:
        raise DomainError("pairwise slopes need at least two observations")
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    weights = dx * dx
    total = float(np.sum(weights))
    if total == 0.0:
        raise ZeroWeightError("all regressor values coincide: total pair weight is 0")
    return PairwiseSlopeSummary(
        beta=float(np.sum(dx * dy)) / total,
        total_weight=total,
        pair_count=int(np.count_nonzero(weights)),
    )


def adjust_regressor(dm: DesignMatrix, y, j: int) -> dict:
    """Residualize design column j on all other columns (intercept kept).

    Returns {"x_adj": adjusted column, "y_input": y unchanged}.  With a
    single regressor this reduces to centering.
    """
    if j == 0:
        raise CoefficientIndexError("column 0 is the intercept; adjust a regressor (j >= 1)")
    if not 1 <= j < dm.ncol:
        raise CoefficientIndexError(f"regressor index {j} out of range 1..{dm.ncol - 1}")
    x = dm.matrix
    others = np.delete(x, j, axis=1)
    target = x[:, j]
    gram = others.T @ others
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 1e-10 * max(eigs[-1], 1.0):
        raise SingularSystemError(
            "adjustment design is rank deficient after removing column "
            f"{j} (smallest eigenvalue {eigs[0]:.3e})",
            min_eigenvalue=float(eigs[0]),
        )
    coef = np.linalg.solve(gram, others.T @ target)
    x_adj = target - others @ coef
    if float(np.max(np.abs(x_adj))) <= 1e-10 * max(1.0, float(np.max(np.abs(target)))):
        raise SingularSystemError(
            f"column {j} is collinear with the remaining columns",
            min_eigenvalue=0.0,
        )
    return {"x_adj": x_adj, "y_input": np.asarray(y, dtype=float)}


def pairwise_slope_multiple(dm: DesignMatrix, y, j: int) -> PairwiseSlopeSummary:
    """Pairwise-slope form of the multiple-regression coefficient beta_j.

    Adjustment centers the column, so the weighted pair average equals
    the coefficient from the full least-squares fit.
    """
    adj = adjust_regressor(dm, y, j)
    return pairwise_slope_simple(adj["x_adj"], adj["y_input"])


def pair_table_csv(x, y) -> str:
    """CSV of every contributing ordered pair: i, j, weight, slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["i", "j", "weight", "slope"])
    n = x.shape[0]
    for i in range(n):
        for jj in range(n):
            if i == jj:
                continue
            dx = x[i] - x[jj]
            if dx == 0.0:
                continue
            writer.writerow(
                [i, jj, repr(float(dx * dx)), repr(float((y[i] - y[jj]) / dx))]
            )
    return buf.getvalue()
