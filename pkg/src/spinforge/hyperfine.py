"""Secular hyperfine couplings and tensor estimation from angle sweeps.

The observable throughout is the doublet splitting C_z in MHz, equal to the
norm of the crystal-frame hyperfine tensor applied to the field direction,
C_z = ||A_crystal . n||. Closed forms for axial and arbitrary tensors are
provided alongside the matrix-trace evaluation; all three agree to 1e-9
relative and are cross-checked in the tests.

Fitting uses the row-norm form C_z(p) = sqrt(sum_i A_i^2 u_i^2) with
u = R(alpha, beta, gamma) n, which is linear in the squared principal
values at fixed angles. That linearity seeds a deterministic multi-start
over a 15-degree (alpha, beta) grid; the best starts are refined with an
exact analytic Jacobian.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .constants import GAMMA_E_MHZ_PER_G
from .errors import DegeneracyError
from .fitting import FitResult, best_of, weighted_least_squares
from .model import (
    EulerAngles,
    FieldVector,
    HyperfineTensor,
    spin_operators,
    tensor_in_crystal_frame,
)

SECULAR_RATIO_WARN = 10.0


@dataclass(frozen=True)
class HyperfineObservation:
    """One measured splitting: field configuration, value, uncertainty."""

    field: FieldVector
    splitting: float
    sigma: float

    def __post_init__(self):
        if not self.splitting >= 0:
            raise ValueError(f"splitting must be >= 0, got {self.splitting}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


def secular_strength_numeric(
    t: HyperfineTensor,
    field: FieldVector,
    gyro: float = GAMMA_E_MHZ_PER_G,
) -> float:
    """Secular coupling C_z from explicit matrix traces (MHz).

    Projects the 4x4 hyperfine Hamiltonian onto the electron Zeeman axis:
    C_z = 4 sqrt(sum_k tr[(H_e (x) I_k) H_hf]^2) / omega_e with
    omega_e = gyro * b0. Valid in the high-field regime; warns when
    omega_e / max|principal value| < 10 and rejects zero field.
    """
    omega_e = gyro * field.b0
    if omega_e == 0:
        raise ValueError(
            "secular projection undefined at zero field (omega_e = 0)"
        )
    a = tensor_in_crystal_frame(t)
    a_scale = max(abs(t.ax), abs(t.ay), abs(t.az))
    if a_scale > 0 and abs(omega_e) / a_scale < SECULAR_RATIO_WARN:
        warnings.warn(
            f"omega_e/|A| = {abs(omega_e) / a_scale:.2f} < "
            f"{SECULAR_RATIO_WARN}; secular approximation is inaccurate",
            stacklevel=2,
        )
    sx, sy, sz = spin_operators(0.5)
    ops = (sx, sy, sz)
    n = field.unit_vector()
    h_e = omega_e * (n[0] * sx + n[1] * sy + n[2] * sz)
    h_hf = np.zeros((4, 4), dtype=complex)
    for j in range(3):
        for k in range(3):
            h_hf += a[j, k] * np.kron(ops[j], ops[k])
    total = 0.0
    for k in range(3):
        total += np.real(np.trace(np.kron(h_e, ops[k]) @ h_hf)) ** 2
    return 4.0 * math.sqrt(total) / abs(omega_e)


def hyperfine_axial(
    a_perp: float,
    a_par: float,
    alpha: float,
    beta: float,
    field: FieldVector,
) -> float:
    """Closed-form C_z for an axially symmetric tensor (MHz).

    (alpha, beta) orient the symmetry axis in the crystal frame (degrees);
    the result depends on alpha and the field azimuth only through their
    difference. Always >= 0.
    """
    b = math.radians(beta)
    th = math.radians(field.theta)
    d = math.radians(alpha - field.phi)
    bracket = 5 * a_perp**2 + 3 * a_par**2 - (a_perp**2 - a_par**2) * (
        4 * math.cos(2 * d) * math.sin(b) ** 2 * math.sin(th) ** 2
        + 4 * math.cos(d) * math.sin(2 * b) * math.sin(2 * th)
        + math.cos(2 * b) * (3 * math.cos(2 * th) + 1)
        + math.cos(2 * th)
    )
    return math.sqrt(max(bracket, 0.0)) / (2.0 * math.sqrt(2.0))


def hyperfine_full(t: HyperfineTensor, field: FieldVector) -> float:
    """Closed-form C_z for an arbitrary tensor (MHz).

    Reduces to :func:`hyperfine_axial` when ax == ay and to |az| in the
    isotropic limit.
    """
    ax2, ay2, az2 = t.ax**2, t.ay**2, t.az**2
    b = math.radians(t.orientation.beta)
    g = math.radians(t.orientation.gamma)
    th = math.radians(field.theta)
    d = math.radians(t.orientation.alpha - field.phi)
    s2t, c2t = math.sin(2 * th), math.cos(2 * th)
    t1 = 5 * (ax2 + ay2) + 6 * az2
    t2 = -8 * (ax2 - ay2) * math.sin(2 * g) * (
        math.cos(b) * math.sin(2 * d) * math.sin(th) ** 2
        - math.sin(b) * math.sin(d) * s2t
    )
    t3 = (ax2 - ay2) * math.cos(2 * g) * (
        2 * (math.cos(2 * b) + 3) * math.cos(2 * d) * math.sin(th) ** 2
        - 4 * math.sin(2 * b) * math.cos(d) * s2t
        + 2 * math.sin(b) ** 2 * (3 * c2t + 1)
    )
    t4 = (2 * az2 - ax2 - ay2) * (
        4 * math.sin(b) ** 2 * math.cos(2 * d) * math.sin(th) ** 2
        + 4 * math.sin(2 * b) * math.cos(d) * s2t
        + math.cos(2 * b) * (3 * c2t + 1)
        + c2t
    )
    return math.sqrt(max(t1 + t2 + t3 + t4, 0.0)) / 4.0


def _rotation_and_derivatives(alpha: float, beta: float, gamma: float):
    """R(alpha, beta, gamma) and its three angle derivatives (radians)."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    r = np.array(
        [
            [cg * cb * ca - sg * sa, cg * cb * sa + sg * ca, -cg * sb],
            [-sg * cb * ca - cg * sa, -sg * cb * sa + cg * ca, sg * sb],
            [sb * ca, sb * sa, cb],
        ]
    )
    dr_da = np.array(
        [
            [-cg * cb * sa - sg * ca, cg * cb * ca - sg * sa, 0.0],
            [sg * cb * sa - cg * ca, -sg * cb * ca - cg * sa, 0.0],
            [-sb * sa, sb * ca, 0.0],
        ]
    )
    dr_db = np.array(
        [
            [-cg * sb * ca, -cg * sb * sa, -cg * cb],
            [sg * sb * ca, sg * sb * sa, sg * cb],
            [cb * ca, cb * sa, -sb],
        ]
    )
    dr_dg = np.array(
        [
            [-sg * cb * ca - cg * sa, -sg * cb * sa + cg * ca, sg * sb],
            [-cg * cb * ca + sg * sa, -cg * cb * sa - sg * ca, cg * sb],
            [0.0, 0.0, 0.0],
        ]
    )
    return r, dr_da, dr_db, dr_dg


def _unpack(params: np.ndarray, model: str):
    """(principal values per axis, angles in radians) from a param vector."""
    if model == "axial":
        a_perp, a_par, alpha, beta = params
        avals = np.array([a_perp, a_perp, a_par])
        angles = (math.radians(alpha), math.radians(beta), 0.0)
    else:
        ax, ay, az, alpha, beta, gamma = params
        avals = np.array([ax, ay, az])
        angles = (
            math.radians(alpha),
            math.radians(beta),
            math.radians(gamma),
        )
    return avals, angles


def _model_splittings(params: np.ndarray, ndirs: np.ndarray, model: str):
    """Row-norm C_z for each field direction (rows of ndirs)."""
    avals, angles = _unpack(params, model)
    r, *_ = _rotation_and_derivatives(*angles)
    u = ndirs @ r.T
    return np.sqrt(np.maximum(u**2 @ avals**2, 0.0))


def _model_jacobian(params: np.ndarray, ndirs: np.ndarray, model: str):
    """d C_z / d params, analytic, one row per observation.

    Angle columns are in 1/degree to match the public parameterization.
    """
    avals, angles = _unpack(params, model)
    r, dr_da, dr_db, dr_dg = _rotation_and_derivatives(*angles)
    u = ndirs @ r.T
    c = np.sqrt(np.maximum(u**2 @ avals**2, 0.0))
    safe = np.where(c > 0, c, 1.0)
    deg = math.pi / 180.0

    def angle_col(dr):
        du = ndirs @ dr.T
        return ((u * du) @ avals**2) / safe * deg

    if model == "axial":
        cols = [
            params[0] * (u[:, 0] ** 2 + u[:, 1] ** 2) / safe,
            params[1] * u[:, 2] ** 2 / safe,
            angle_col(dr_da),
            angle_col(dr_db),
        ]
    else:
        cols = [
            params[0] * u[:, 0] ** 2 / safe,
            params[1] * u[:, 1] ** 2 / safe,
            params[2] * u[:, 2] ** 2 / safe,
            angle_col(dr_da),
            angle_col(dr_db),
            angle_col(dr_dg),
        ]
    jac = np.stack(cols, axis=1)
    jac[c == 0] = 0.0
    return jac


_PARAM_NAMES = {
    "axial": ("a_perp", "a_par", "alpha", "beta"),
    "full": ("ax", "ay", "az", "alpha", "beta", "gamma"),
}
_MIN_OBS = {"axial": 5, "full": 7}


def _grid_starts(ndirs: np.ndarray, y: np.ndarray, w: np.ndarray, model: str):
    """Linear-in-squares seeds on a 15-degree (alpha, beta) angle grid.

    At fixed angles C_z^2 = M s with s the squared principal values, so a
    nonnegative linear solve of M s ~ y^2 scores every grid node cheaply.
    Returns candidate parameter vectors sorted by that score.
    """
    alphas = np.arange(0.0, 360.0, 15.0)
    betas = np.arange(0.0, 90.1, 15.0)
    gammas = np.arange(0.0, 90.0, 15.0) if model == "full" else [0.0]
    y2 = y**2
    w2 = w**2
    out = []
    for beta in betas:
        for alpha in alphas:
            for gamma in gammas:
                r, *_ = _rotation_and_derivatives(
                    math.radians(alpha), math.radians(beta),
                    math.radians(gamma),
                )
                u2 = (ndirs @ r.T) ** 2
                if model == "axial":
                    m = np.stack([u2[:, 0] + u2[:, 1], u2[:, 2]], axis=1)
                else:
                    m = u2
                s, _ = nnls(m * w2[:, None], y2 * w2)
                avals = np.sqrt(s)
                if model == "axial":
                    p = np.array([avals[0], avals[1], alpha, beta])
                else:
                    p = np.array([*avals, alpha, beta, gamma])
                resid = (_model_splittings(p, ndirs, model) - y) * w
                out.append((float(resid @ resid), p))
    out.sort(key=lambda t: (t[0], tuple(t[1])))
    return [p for _, p in out]


def _canonical_params(params: dict[str, float], model: str) -> dict[str, float]:
    """Fold exact model degeneracies to a unique representative.

    Axis inversion maps (alpha, beta, gamma) to (alpha+180, 180-beta,
    180-gamma) with identical predictions, so beta is kept in [0, 90].
    For the full model gamma has period 180 and a gamma+90 shift swaps the
    transverse principal values, so gamma lands in [0, 180) with ax <= ay.
    """
    p = dict(params)
    alpha = p["alpha"] % 360.0
    beta = p["beta"]
    gamma = p.get("gamma", 0.0)
    ea = EulerAngles(alpha, beta, gamma)
    alpha, beta, gamma = ea.alpha, ea.beta, ea.gamma
    if beta > 90.0:
        alpha = (alpha + 180.0) % 360.0
        beta = 180.0 - beta
        gamma = (180.0 - gamma) % 360.0
    gamma = gamma % 180.0
    if model == "full" and p["ax"] > p["ay"]:
        p["ax"], p["ay"] = p["ay"], p["ax"]
        gamma = (gamma + 90.0) % 180.0
    p["alpha"], p["beta"] = alpha, beta
    if model == "full":
        p["gamma"] = gamma
    return p


def fit_hyperfine(
    data: list[HyperfineObservation],
    model: str = "axial",
    init: dict[str, float] | None = None,
) -> FitResult:
    """Weighted least-squares tensor estimate from splitting-vs-angle data.

    Parameters
    ----------
    data : list of HyperfineObservation
        At least 5 points over >= 2 distinct field orientations for the
        axial model (4 parameters), at least 7 for the full model (6).
    model : {"axial", "full"}
        Forward model. Axial fits (a_perp, a_par, alpha, beta); full fits
        (ax, ay, az, alpha, beta, gamma). Angles in degrees.
    init : dict, optional
        Starting values by parameter name. When omitted, a deterministic
        multi-start over a 15-degree angle grid seeds the optimizer.

    Returns
    -------
    FitResult
        Principal values in MHz (nonnegative; the splitting fixes only
        their magnitudes), angles folded to a canonical branch, 1-sigma
        uncertainties from the local quadratic model.

    Raises
    ------
    DegeneracyError
        Fewer than two distinct field orientations, or a Jacobian at the
        optimum with condition number above 1e8.
    ConvergenceError
        No start converged.
    """
    if model not in _PARAM_NAMES:
        raise ValueError(f"model must be 'axial' or 'full', got {model!r}")
    names = _PARAM_NAMES[model]
    if len(data) < _MIN_OBS[model]:
        raise ValueError(
            f"{model} fit needs >= {_MIN_OBS[model]} observations, "
            f"got {len(data)}"
        )
    orientations = {
        (round(o.field.theta, 9), round(o.field.phi, 9)) for o in data
    }
    if len(orientations) < 2:
        raise DegeneracyError(
            "observations span a single field orientation; tensor "
            "parameters are not identifiable"
        )
    ndirs = np.array([o.field.unit_vector() for o in data])
    y = np.array([o.splitting for o in data])
    w = 1.0 / np.array([o.sigma for o in data])

    def residual(p):
        return (_model_splittings(p, ndirs, model) - y) * w

    def jacobian(p):
        return _model_jacobian(p, ndirs, model) * w[:, None]

    n_pv = 2 if model == "axial" else 3
    lower = np.array([0.0] * n_pv + [-np.inf] * (len(names) - n_pv))
    upper = np.full(len(names), np.inf)
    scale = np.array([1.0] * n_pv + [57.29577951308232] * (len(names) - n_pv))

    if init is not None:
        starts = [np.array([float(init[k]) for k in names])]
    else:
        starts = _grid_starts(ndirs, y, w, model)[:6]

    fits = []
    for x0 in starts:
        x0 = np.clip(x0, lower + 1e-12, None)
        try:
            fits.append(
                weighted_least_squares(
                    residual,
                    x0,
                    names,
                    jac=jacobian,
                    bounds=(lower, upper),
                    x_scale=scale,
                    model=model,
                )
            )
        except DegeneracyError:
            if len(starts) == 1:
                raise
    if not fits:
        raise DegeneracyError(
            "every start produced a degenerate Jacobian; orientations do "
            "not constrain the tensor"
        )
    best = best_of(fits)
    return FitResult(
        params=_canonical_params(best.params, model),
        uncertainties=best.uncertainties,
        chi_square=best.chi_square,
        dof=best.dof,
        residuals=best.residuals,
        covariance=best.covariance,
        param_names=best.param_names,
        model=model,
    )


@dataclass(frozen=True)
class ModelComparison:
    """Ranking of candidate tensor models by reduced chi-square."""

    preferred: str
    ranking: tuple[str, ...]
    chi_square: dict[str, float]
    reduced_chi_square: dict[str, float]


def compare_models(
    data: list[HyperfineObservation], fits: list[FitResult]
) -> ModelComparison:
    """Rank fits of the same data by reduced chi-square.

    Requires at least two fits; each must have one residual per
    observation. Ties in reduced chi-square rank the smaller model first.
    """
    if len(fits) < 2:
        raise ValueError("need at least two fits to compare")
    for f in fits:
        if f.residuals.size != len(data):
            raise ValueError(
                f"fit {f.model!r} has {f.residuals.size} residuals for "
                f"{len(data)} observations"
            )
    order = sorted(fits, key=lambda f: (f.reduced_chi_square, len(f.param_names)))
    return ModelComparison(
        preferred=order[0].model,
        ranking=tuple(f.model for f in order),
        chi_square={f.model: f.chi_square for f in fits},
        reduced_chi_square={f.model: f.reduced_chi_square for f in fits},
    )
