"""Shared least-squares plumbing: result container, covariance, multistart.

Every fit in the package reports through :class:`FitResult` so the CLI and
serialization layers only need one schema. Uncertainties come from the
standard local quadratic model: cov = s^2 (J^T W J)^{-1} with
s^2 = chi^2 / (n - p) when n > p (otherwise s^2 = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import ConvergenceError, DegeneracyError

JACOBIAN_CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class FitResult:
    """Outcome of a weighted least-squares fit.

    Parameters
    ----------
    params : dict
        Fitted parameter values keyed by name.
    uncertainties : dict
        One-sigma uncertainties, same keys.
    chi_square : float
        Weighted sum of squared residuals at the optimum.
    dof : int
        Degrees of freedom (observations minus parameters), >= 0.
    residuals : np.ndarray
        Weighted residuals at the optimum.
    covariance : np.ndarray
        Parameter covariance matrix, ordered like ``param_names``.
    param_names : tuple of str
        Ordering of the covariance rows/columns.
    model : str
        Name of the forward model that was fitted (e.g. "axial", "full").
    """

    params: dict[str, float]
    uncertainties: dict[str, float]
    chi_square: float
    dof: int
    residuals: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)
    param_names: tuple[str, ...]
    model: str = ""

    @property
    def reduced_chi_square(self) -> float:
        return self.chi_square / self.dof if self.dof > 0 else float("nan")


def covariance_from_jacobian(
    jac: np.ndarray, chi_square: float, dof: int
) -> np.ndarray:
    """Local-quadratic covariance cov = s^2 (J^T J)^{-1} for weighted J.

    The Jacobian must already include the weight factors (rows of
    d(weighted residual)/d(param)). The rank check runs on the
    column-equilibrated Jacobian so mixed parameter units (MHz vs degrees)
    do not masquerade as rank deficiency; truly collinear or vanishing
    columns raise DegeneracyError.
    """
    norms = np.linalg.norm(jac, axis=0)
    if np.any(norms == 0):
        raise DegeneracyError(
            "a parameter has zero effect on every observation; it cannot "
            "be determined from this observation set"
        )
    jn = jac / norms
    sv = np.linalg.svd(jn, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if not np.isfinite(cond) or cond > JACOBIAN_CONDITION_LIMIT:
        raise DegeneracyError(
            f"Jacobian condition number {cond:.2e} exceeds "
            f"{JACOBIAN_CONDITION_LIMIT:.0e}; parameters are degenerate "
            "for this observation set"
        )
    s2 = chi_square / dof if dof > 0 else 1.0
    inv_n = np.linalg.inv(jn.T @ jn)
    return s2 * (inv_n / np.outer(norms, norms))


def weighted_least_squares(
    residual_fn,
    x0: np.ndarray,
    param_names: tuple[str, ...],
    jac=None,
    bounds=(-np.inf, np.inf),
    n_obs: int | None = None,
    x_scale: np.ndarray | float = 1.0,
    model: str = "",
) -> FitResult:
    """Run scipy least_squares and package the outcome as a FitResult.

    ``residual_fn`` must return weighted residuals; ``jac``, when given,
    their exact derivative matrix. Non-convergence raises ConvergenceError,
    a degenerate Jacobian at the optimum raises DegeneracyError.
    """
    res = least_squares(
        residual_fn,
        x0,
        jac=jac if jac is not None else "2-point",
        bounds=bounds,
        x_scale=x_scale,
        method="trf",
    )
    if not res.success:
        raise ConvergenceError(
            f"least-squares did not converge: {res.message}"
        )
    n = n_obs if n_obs is not None else res.fun.size
    dof = max(n - x0.size, 0)
    chi2 = float(res.fun @ res.fun)
    jac_final = jac(res.x) if jac is not None else np.asarray(res.jac)
    cov = covariance_from_jacobian(np.asarray(jac_final), chi2, dof)
    sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FitResult(
        params=dict(zip(param_names, (float(v) for v in res.x))),
        uncertainties=dict(zip(param_names, (float(s) for s in sigmas))),
        chi_square=chi2,
        dof=dof,
        residuals=res.fun.copy(),
        covariance=cov,
        param_names=tuple(param_names),
        model=model,
    )


def best_of(results: list[FitResult]) -> FitResult:
    """Pick the lowest-chi-square fit, breaking ties lexicographically.

    Ties (within 1e-9 relative) are resolved by comparing the parameter
    vectors in name order so reruns over reordered starting points return
    the identical result.
    """
    if not results:
        raise ConvergenceError("no fit attempt converged")

    def key(r: FitResult):
        vec = tuple(r.params[k] for k in r.param_names)
        return (r.chi_square, vec)

    best = min(results, key=key)
    return best
