"""Pairs (x-y) and residual bootstrap for regression coefficients.

The x-y bootstrap resamples whole observation tuples and is the primary
misspecification-robust inference tool; the residual bootstrap fixes
the design and resamples centered residuals, which bakes in first-order
correctness and homoskedasticity - it is provided as a foil.

Replicate b draws its resampling indices from the dedicated substream
``(seed, b)``, so draws are bit-reproducible regardless of how the
replicates are scheduled across workers.
"""

from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import Dataset, DesignMatrix, build_design
from .exceptions import (
    CoefficientIndexError,
    DomainError,
    ExcessiveFailureError,
    FamilyError,
    InsufficientDrawsError,
    LeanRegError,
)
from .fitting import GAUSSIAN, Family, fit_glm, fit_ols
from .rng import substream

__all__ = [
    "BootstrapDraws",
    "NormalityReport",
    "xy_bootstrap",
    "residual_bootstrap",
    "bootstrap_se",
    "normality_diagnostic",
]

FAILURE_THRESHOLD = 0.1
MIN_DIAGNOSTIC_DRAWS = 10


@dataclass(frozen=True)
class BootstrapDraws:
    """Replicate coefficient vectors from one bootstrap run.

    ``draws`` has one row per successful replicate (B - failures rows);
    rerunning with the same seed reproduces it bit-identically.
    """

    draws: np.ndarray
    scheme: str  # "xy" | "residual"
    seed: int
    failures: int
    failure_reasons: dict | None = None
    labels: tuple[str, ...] = ()

    @property
    def b_retained(self) -> int:
        return self.draws.shape[0]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["replicate", *self.labels])
        for i, row in enumerate(self.draws):
            writer.writerow([i] + [repr(float(v)) for v in row])
        return buf.getvalue()


def _run_replicates(n_reps, worker, workers):
    """Evaluate worker(b) for b = 0..n_reps-1, assembled by index."""
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, range(n_reps)))
    return [worker(b) for b in range(n_reps)]


def _collect(results, scheme, seed, ncol, labels) -> BootstrapDraws:
    rows = [r for r in results if not isinstance(r, Exception)]
    errors = [r for r in results if isinstance(r, Exception)]
    reasons: dict[str, int] = {}
    for e in errors:
        key = type(e).__name__
        reasons[key] = reasons.get(key, 0) + 1
    b_total = len(results)
    if len(errors) > FAILURE_THRESHOLD * b_total:
        raise ExcessiveFailureError(
            f"{len(errors)} of {b_total} bootstrap replicates failed "
            f"(threshold {FAILURE_THRESHOLD:.0%})",
            reasons=reasons,
        )
    draws = np.asarray(rows, dtype=float).reshape(len(rows), ncol)
    return BootstrapDraws(
        draws=draws,
        scheme=scheme,
        seed=seed,
        failures=len(errors),
        failure_reasons=reasons,
        labels=labels,
    )


def xy_bootstrap(
    ds: Dataset,
    family: Family,
    B: int,
    seed: int,
    workers: int | None = None,
) -> BootstrapDraws:
    """Resample observation tuples with replacement and refit, B times.

    Replicates whose resampled design is singular or whose fit fails to
    converge are excluded and counted; more than 10% of them is an
    error carrying the failure reasons.  An infeasible base problem
    (e.g. a singular design that every resample inherits) therefore
    surfaces as an excessive-failure error with the cause attached.
    """
    if B < 1:
        raise DomainError("B must be at least 1")
    dm = build_design(ds)
    y = ds.response
    x = dm.matrix
    n = ds.n

    def worker(b):
        rng = substream(seed, b)
        idx = rng.integers(0, n, size=n)
        try:
            dm_b = DesignMatrix(matrix=x[idx], column_labels=dm.column_labels)
            if family.tag == "gaussian-identity":
                fit_b = fit_ols(dm_b, y[idx])
            else:
                fit_b = fit_glm(dm_b, y[idx], family)
            return fit_b.beta_hat
        except LeanRegError as exc:
            return exc

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # tiny resamples warn about dof
        results = _run_replicates(B, worker, workers)
    return _collect(results, "xy", seed, dm.ncol, dm.column_labels)


def residual_bootstrap(
    ds: Dataset,
    B: int,
    seed: int,
    workers: int | None = None,
    family: Family = GAUSSIAN,
) -> BootstrapDraws:
    """Fix the design, resample centered OLS residuals, refit, B times.

    Defined for the gaussian-identity working model only; the scheme
    presupposes a correct homoskedastic linear mean, which is exactly
    what makes it a foil rather than a robust tool.
    """
    if family.tag != "gaussian-identity":
        raise FamilyError(
            "the residual bootstrap applies only to the gaussian-identity "
            f"(OLS) working model, not {family.tag!r}"
        )
    if B < 1:
        raise DomainError("B must be at least 1")
    dm = build_design(ds)
    base = fit_ols(dm, ds.response)
    # Residuals already sum to zero with an intercept; recentering is a
    # guard for the general case.
    centered = base.residuals - np.mean(base.residuals)
    x = dm.matrix
    n = ds.n

    def worker(b):
        rng = substream(seed, b)
        idx = rng.integers(0, n, size=n)
        y_b = base.fitted + centered[idx]
        try:
            return fit_ols(dm, y_b).beta_hat
        except LeanRegError as exc:
            return exc

    results = _run_replicates(B, worker, workers)
    return _collect(results, "residual", seed, dm.ncol, dm.column_labels)


def bootstrap_se(draws: BootstrapDraws) -> np.ndarray:
    """Coordinatewise sample standard deviation of the retained draws."""
    if draws.b_retained < 2:
        raise InsufficientDrawsError(
            f"bootstrap SE needs at least 2 retained draws, have {draws.b_retained}"
        )
    return np.std(draws.draws, axis=0, ddof=1)


@dataclass(frozen=True)
class NormalityReport:
    """Bootstrap-draw quantiles paired with normal quantiles for one
    coefficient; qq_correlation near 1 says asymptotic normality is a
    reasonable working assumption."""

    coefficient: int
    sorted_draws: np.ndarray
    theoretical_quantiles: np.ndarray
    qq_correlation: float

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["theoretical_quantile", "draw"])
        for q, d in zip(self.theoretical_quantiles, self.sorted_draws):
            writer.writerow([repr(float(q)), repr(float(d))])
        return buf.getvalue()


def normality_diagnostic(draws: BootstrapDraws, j: int) -> NormalityReport:
    """Normal-quantile pairing of coefficient j's bootstrap draws.

    Plotting positions are (k - 0.5)/B over the retained draws.
    """
    if not 0 <= j < draws.draws.shape[1]:
        raise CoefficientIndexError(f"coefficient index {j} out of range")
    m = draws.b_retained
    if m < MIN_DIAGNOSTIC_DRAWS:
        raise InsufficientDrawsError(
            f"normality diagnostic needs at least {MIN_DIAGNOSTIC_DRAWS} draws, have {m}"
        )
    values = np.sort(draws.draws[:, j])
    quantiles = ndtri((np.arange(1, m + 1) - 0.5) / m)
    corr = float(np.corrcoef(values, quantiles)[0, 1])
    return NormalityReport(
        coefficient=j,
        sorted_draws=values,
        theoretical_quantiles=quantiles,
        qq_correlation=corr,
    )
