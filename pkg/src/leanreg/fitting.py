"""Plug-in estimation of the best-approximation regression functional.

OLS solves the sample normal equations exactly; bernoulli-logit and
poisson-log working models are fitted by Newton iterations (IRLS) on the
sample analog of the population cost function.  The fitted model is a
best approximation of the true response surface; nothing here assumes
the working model is correctly specified.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg as sla
from scipy.special import expit

from .core import Dataset, DesignMatrix, build_design, check_rank
from .exceptions import (
    CoefficientIndexError,
    ConvergenceError,
    DimensionError,
    FamilyError,
    SeparationError,
    SingularSystemError,
)

__all__ = [
    "Family",
    "GAUSSIAN",
    "BERNOULLI",
    "POISSON",
    "family_by_name",
    "FitResult",
    "FitOptions",
    "fit_ols",
    "fit_glm",
    "fit_dataset",
    "predict_mean",
    "exp_coef",
]

# IRLS defaults.
MAX_ITER = 50
COEF_TOL = 1e-9          # relative coefficient change
SCORE_TOL = 1e-7         # scaled mean-score norm
MAX_HALVINGS = 10
SEPARATION_BOUND = 30.0  # |beta|_inf beyond which the logit has saturated
WEIGHT_FLOOR = 1e-10


@dataclass(frozen=True)
class Family:
    """Working-model family: tag, mean map, and variance function.

    ``inverse_link`` maps the linear predictor to the mean scale;
    ``variance_fn`` maps the mean to the curvature weight used by the
    Newton step (and by the conventional covariance).
    """

    tag: str
    inverse_link: Callable[[np.ndarray], np.ndarray]
    variance_fn: Callable[[np.ndarray], np.ndarray]

    def __repr__(self):
        return f"Family({self.tag!r})"


GAUSSIAN = Family("gaussian-identity", lambda t: t, lambda mu: np.ones_like(mu))
BERNOULLI = Family("bernoulli-logit", expit, lambda mu: mu * (1.0 - mu))
POISSON = Family("poisson-log", np.exp, lambda mu: mu)

_FAMILIES = {
    "gaussian-identity": GAUSSIAN,
    "gaussian": GAUSSIAN,
    "ols": GAUSSIAN,
    "bernoulli-logit": BERNOULLI,
    "bernoulli": BERNOULLI,
    "logit": BERNOULLI,
    "poisson-log": POISSON,
    "poisson": POISSON,
}


def family_by_name(name: str) -> Family:
    try:
        return _FAMILIES[name.lower()]
    except KeyError:
        raise FamilyError(
            f"unknown family {name!r}; expected one of ols|logit|poisson"
        ) from None


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = MAX_ITER
    tol: float = COEF_TOL
    score_tol: float = SCORE_TOL


@dataclass(frozen=True)
class FitResult:
    """A fitted working model, with the data it was fitted to.

    ``design`` and ``y`` are retained (immutably) because every
    downstream covariance estimator needs them.
    """

    family: Family
    beta_hat: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    linear_predictor: np.ndarray
    converged: bool
    iterations: int
    deviance_or_sse: float
    design: DesignMatrix
    y: np.ndarray
    score_norm: float = field(default=0.0)

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def p(self) -> int:
        return self.design.ncol - 1

    def to_json_dict(self) -> dict:
        return {
            "family": self.family.tag,
            "coefficients": {
                label: float(b)
                for label, b in zip(self.design.column_labels, self.beta_hat)
            },
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "deviance_or_sse": float(self.deviance_or_sse),
            "n": self.n,
        }


def _require_full_rank(dm: DesignMatrix):
    report = check_rank(dm)
    if not report.full_rank:
        raise SingularSystemError(
            "design matrix is rank deficient: smallest second-moment "
            f"eigenvalue {report.min_eigenvalue:.3e}",
            min_eigenvalue=report.min_eigenvalue,
        )
    return report


def _chol_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        c = sla.cho_factor(a, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise SingularSystemError(f"normal-equation matrix not positive definite: {exc}") from None
    return sla.cho_solve(c, b, check_finite=False)


def fit_ols(dm: DesignMatrix, y: np.ndarray) -> FitResult:
    """Solve the sample normal equations (sum x x') beta = sum x y.

    Uses the exact symmetric positive-definite (Cholesky) system; the
    residuals of the result are orthogonal to every design column.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[0] != dm.n:
        raise DimensionError(f"response length {y.shape[0]} != design rows {dm.n}")
    _require_full_rank(dm)
    if dm.n <= dm.ncol:
        warnings.warn(
            f"n={dm.n} observations for {dm.ncol} coefficients: "
            "variance estimates will be unreliable",
            stacklevel=2,
        )
    x = dm.matrix
    beta = _chol_solve(x.T @ x, x.T @ y)
    fitted = x @ beta
    resid = y - fitted
    return FitResult(
        family=GAUSSIAN,
        beta_hat=beta,
        fitted=fitted,
        residuals=resid,
        linear_predictor=fitted,
        converged=True,
        iterations=1,
        deviance_or_sse=float(resid @ resid),
        design=dm,
        y=y,
    )


def _validate_support(family: Family, y: np.ndarray):
    if family.tag == "bernoulli-logit":
        if not np.all((y == 0.0) | (y == 1.0)):
            raise FamilyError("bernoulli-logit requires a response coded exactly 0/1")
    elif family.tag == "poisson-log":
        if np.any(y < 0) or not np.all(y == np.floor(y)):
            raise FamilyError("poisson-log requires nonnegative integer counts")


def _objective(family: Family, t: np.ndarray, y: np.ndarray) -> float:
    # Sample mean of the family's per-observation loss.
    if family.tag == "bernoulli-logit":
        return float(np.mean(np.logaddexp(0.0, t) - t * y))
    if family.tag == "poisson-log":
        with np.errstate(over="ignore"):
            return float(np.mean(np.exp(t) - t * y))
    return float(np.mean(0.5 * (y - t) ** 2))


def _deviance(family: Family, mu: np.ndarray, y: np.ndarray) -> float:
    if family.tag == "bernoulli-logit":
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(y == 1.0, -np.log(mu), -np.log1p(-mu))
        return float(2.0 * np.sum(terms))
    if family.tag == "poisson-log":
        with np.errstate(divide="ignore", invalid="ignore"):
            ylogy = np.where(y > 0, y * np.log(y / mu), 0.0)
        return float(2.0 * np.sum(ylogy - (y - mu)))
    return float(np.sum((y - mu) ** 2))


def _initial_beta(family: Family, ncol: int, y: np.ndarray) -> np.ndarray:
    beta = np.zeros(ncol)
    if family.tag == "poisson-log":
        beta[0] = np.log(np.mean(y) + 0.5)
    return beta


def fit_glm(
    dm: DesignMatrix,
    y: np.ndarray,
    family: Family,
    opts: FitOptions = FitOptions(),
) -> FitResult:
    """Minimize the sample working-model cost by Newton/IRLS.

    Convergence requires both a relative coefficient change below
    ``opts.tol`` and a mean-score norm ``max_j |sum_i (mu_i - y_i)
    x_ij| / n`` at or below ``opts.score_tol * max(1, mean|y|)``.
    Steps that fail to decrease the objective are halved up to
    ``MAX_HALVINGS`` times.

    Raises
    ------
    SeparationError
        bernoulli coefficients diverge past the logit saturation bound.
    ConvergenceError
        no convergence within ``opts.max_iter``; carries the last
        iterate and its score norm.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[0] != dm.n:
        raise DimensionError(f"response length {y.shape[0]} != design rows {dm.n}")
    _require_full_rank(dm)
    _validate_support(family, y)

    x = dm.matrix
    n = dm.n
    score_scale = max(1.0, float(np.mean(np.abs(y))))
    beta = _initial_beta(family, dm.ncol, y)
    t = x @ beta
    mu = family.inverse_link(t)
    obj = _objective(family, t, y)
    score_norm = float(np.max(np.abs(x.T @ (mu - y)))) / n

    iterations = 0
    for iterations in range(1, opts.max_iter + 1):
        w = family.variance_fn(mu)
        hessian = (x.T * w) @ x / n
        grad = x.T @ (mu - y) / n
        try:
            direction = -_chol_solve(hessian, grad)
        except SingularSystemError:
            if family.tag != "bernoulli-logit":
                raise
            # mu saturated to exactly 0/1 on enough points to break the
            # solve; floor those weights just enough to keep the system
            # solvable.  Flooring is deliberately a last resort: an
            # unconditional floor damps divergence so much that the
            # separation bound below would never be reached.
            w = np.where(w <= 0.0, WEIGHT_FLOOR, w)
            hessian = (x.T * w) @ x / n
            direction = -_chol_solve(hessian, grad)

        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = beta + step * direction
            cand_obj = _objective(family, x @ candidate, y)
            if cand_obj <= obj or not np.isfinite(obj):
                break
            step *= 0.5

        rel_change = float(
            np.max(np.abs(step * direction)) / max(1.0, np.max(np.abs(candidate)))
        )
        beta = candidate
        t = x @ beta
        mu = family.inverse_link(t)
        obj = cand_obj
        score_norm = float(np.max(np.abs(x.T @ (mu - y)))) / n

        if family.tag == "bernoulli-logit" and np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise SeparationError(
                "quasi-separation detected: |beta|_inf exceeded "
                f"{SEPARATION_BOUND} on the logit scale",
                last_beta=beta,
                score_norm=score_norm,
                iterations=iterations,
            )
        if rel_change < opts.tol and score_norm <= opts.score_tol * score_scale:
            break
    else:
        raise ConvergenceError(
            f"IRLS did not converge in {opts.max_iter} iterations "
            f"(score norm {score_norm:.3e})",
            last_beta=beta,
            score_norm=score_norm,
            iterations=opts.max_iter,
        )

    return FitResult(
        family=family,
        beta_hat=beta,
        fitted=mu,
        residuals=y - mu,
        linear_predictor=t,
        converged=True,
        iterations=iterations,
        deviance_or_sse=_deviance(family, mu, y),
        design=dm,
        y=y,
        score_norm=score_norm,
    )


def fit_dataset(ds: Dataset, family: Family = GAUSSIAN, opts: FitOptions = FitOptions()) -> FitResult:
    """Convenience front end: build the design and dispatch by family."""
    dm = build_design(ds)
    if family.tag == "gaussian-identity":
        return fit_ols(dm, ds.response)
    return fit_glm(dm, ds.response, family, opts)


def predict_mean(fit: FitResult, x) -> float:
    """Mean-scale prediction ``inverse_link(beta' x)`` at one point.

    ``x`` must be a (p+1)-vector with the leading 1 included.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != fit.beta_hat.shape:
        raise DimensionError(
            f"point has shape {x.shape}, expected {fit.beta_hat.shape}"
        )
    return float(fit.family.inverse_link(x @ fit.beta_hat))


def exp_coef(fit: FitResult, j: int, delta: float = 1.0) -> float:
    """Multiplicative effect exp(beta_j * delta) of a ``delta`` increment.

    Only meaningful for the log link, where coefficients act as
    multipliers of the mean count.
    """
    if fit.family.tag != "poisson-log":
        raise FamilyError(
            f"exponentiated-coefficient multipliers require the poisson-log "
            f"family, not {fit.family.tag!r}"
        )
    if not 0 <= j < fit.beta_hat.shape[0]:
        raise CoefficientIndexError(f"coefficient index {j} out of range")
    return float(np.exp(fit.beta_hat[j] * delta))
