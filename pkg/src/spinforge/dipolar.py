"""NV-X dipolar couplings, coupling extraction, and defect localization.

Two independent routes to the secular coupling d (kHz):

- :func:`secular_dipolar_numeric` diagonalizes the NV (projected to the
  m_s = {0, -1} doublet) and X Zeeman Hamiltonians separately and reads the
  energy-conserving ZZ coefficient of the dipolar term in that doubly
  tilted eigenbasis.
- :func:`dipolar_analytic` evaluates the closed form obtained from the
  same construction; both agree to better than 1e-3 relative whenever the
  zero-field splitting dominates the Zeeman energy.

Geometry (r, zeta, xi) is expressed in the NV molecular frame with the
field azimuth defining xi = 0 when the field lies in the frame's xz plane.

Localization inverts measured |d| values either by least squares over
(r, zeta, xi) or by an exhaustive probability map over a Cartesian box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .constants import DIPOLAR_CONSTANT_KHZ_NM3, GAMMA_E_MHZ_PER_G
from .errors import AmbiguityError, ConvergenceError, DegeneracyError
from .fitting import (
    FitResult,
    best_of,
    covariance_from_jacobian,
    weighted_least_squares,
)
from .model import (
    DipolarGeometry,
    FieldVector,
    HermitianOperator,
    NvSpec,
    XDefectSpec,
    adiabatic_labels,
    nv_frame_angles,
    spin_operators,
)


@dataclass(frozen=True)
class DipolarObservation:
    """One measured coupling magnitude |d| (kHz) at a field configuration."""

    field: FieldVector
    coupling: float
    sigma: float

    def __post_init__(self):
        if not self.coupling >= 0:
            raise ValueError(f"coupling must be >= 0, got {self.coupling}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class TimeSeries:
    """A real-valued signal sampled at explicit times (µs)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be equal-length 1-D")
        if t.size >= 2 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ProbabilityMap:
    """Normalized location weights on a cubic lattice centered on the NV.

    ``axis`` holds the shared 1-D cell-center coordinates (nm) for x, y
    and z; ``values[i, j, k]`` is the weight of cell (axis[i], axis[j],
    axis[k]). Weights are nonnegative and sum to 1 within 1e-9.
    """

    axis: np.ndarray
    values: np.ndarray
    resolution: float

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (ax.size,) * 3:
            raise ValueError("values must be a cube over the axis")
        if not np.all(np.diff(ax) > 0):
            raise ValueError("axis must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(v.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1 within 1e-9")
        ax.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "axis", ax)
        object.__setattr__(self, "values", v)

    def argmax_position(self) -> tuple[float, float, float]:
        """Coordinates (nm) of the highest-weight cell.

        The coupling model is exactly invariant under the antipode map,
        so the map always carries two equal maxima; ties within 1e-12 of
        the peak resolve to the upper hemisphere (z, then y, then x),
        matching the canonical branch of the geometry fit.
        """
        peak = float(np.max(self.values))
        cand = np.argwhere(self.values >= peak * (1.0 - 1e-12))
        pts = np.stack(
            [self.axis[cand[:, 0]], self.axis[cand[:, 1]], self.axis[cand[:, 2]]],
            axis=1,
        )
        order = np.lexsort((pts[:, 0], pts[:, 1], pts[:, 2]))
        x, y, z = pts[order[-1]]
        return float(x), float(y), float(z)


def dipolar_hamiltonian(
    g: DipolarGeometry,
    nv_gyro: float = GAMMA_E_MHZ_PER_G,
    x_gyro: float = GAMMA_E_MHZ_PER_G,
) -> HermitianOperator:
    """Point-dipole coupling on the NV (spin 1) (x) X (spin 1/2) space.

    Returns -J [3 (S_nv . r̂)(S_x . r̂) - S_nv . S_x] in MHz with
    J = d_c (nv_gyro * x_gyro / gamma_e^2) / r^3; two electron gyros at
    r = 1 nm give |J| = 52.041 kHz.
    """
    j = (
        1e-3
        * DIPOLAR_CONSTANT_KHZ_NM3
        * (nv_gyro * x_gyro / GAMMA_E_MHZ_PER_G**2)
        / g.r**3
    )
    rhat = g.unit_vector()
    s1 = spin_operators(1.0)
    s2 = spin_operators(0.5)
    sr1 = sum(rhat[i] * s1[i] for i in range(3))
    sr2 = sum(rhat[i] * s2[i] for i in range(3))
    dot = sum(np.kron(s1[i], s2[i]) for i in range(3))
    h = -j * (3.0 * np.kron(sr1, sr2) - dot)
    return HermitianOperator(h, (("nv-electron", 3), ("x-electron", 2)))


def secular_dipolar_numeric(
    nv: NvSpec, x: XDefectSpec, field: FieldVector
) -> float:
    """Secular coupling d (kHz, signed) from the doubly tilted frame.

    Diagonalizes the NV electron Hamiltonian restricted to the
    m_s = {0, -1} doublet and the X electron Zeeman term, rotates the
    dipolar Hamiltonian into the product eigenbasis, and returns the
    coefficient of the energy-conserving ZZ part read off the diagonal:
    d = (E(-1,up) - E(0,up) - E(-1,down) + E(0,down)) / 2.

    Raises DegeneracyError when the NV doublet states mix too strongly to
    be labeled adiabatically (level crossing).
    """
    theta_p, phi_p = nv_frame_angles(nv, field)
    tp, pp = math.radians(theta_p), math.radians(phi_p)
    n = np.array(
        [math.sin(tp) * math.cos(pp), math.sin(tp) * math.sin(pp), math.cos(tp)]
    )
    sx1, sy1, sz1 = spin_operators(1.0)
    sx, sy, sz = spin_operators(0.5)

    omega_nv = nv.electron.gyro * field.b0
    h3 = nv.zfs * (sz1 @ sz1) + omega_nv * (n[0] * sx1 + n[1] * sy1 + n[2] * sz1)
    h2 = h3[1:, 1:]  # m_s = {0, -1} doublet
    evals2, evecs2 = np.linalg.eigh(h2)
    picks = adiabatic_labels(evecs2, np.eye(2, dtype=complex))
    u_nv = evecs2[:, picks]

    omega_x = x.electron.gyro * field.b0
    hx = omega_x * (n[0] * sx + n[1] * sy + n[2] * sz)
    evx, uvx = np.linalg.eigh(hx)
    proj = np.real(np.diag(uvx.conj().T @ (n[0] * sx + n[1] * sy + n[2] * sz) @ uvx))
    order = np.argsort(-proj)  # "up" = spin along the field first
    u_x = uvx[:, order]

    hdd6 = dipolar_hamiltonian(
        x.geometry, nv.electron.gyro, x.electron.gyro
    ).entries
    idx = [2, 3, 4, 5]  # (m_s=0, m_s=-1) (x) (up, down) rows of 3x2
    hdd4 = hdd6[np.ix_(idx, idx)]

    # the one-spin terms are diagonal in the tilted product basis and
    # cancel exactly in the double difference, so only the dipolar term is
    # rotated (avoids cancellation against MHz-scale level energies)
    u = np.kron(u_nv, u_x)
    e = np.real(np.diag(u.conj().T @ hdd4 @ u))
    d_mhz = 0.5 * (e[2] - e[0] - e[3] + e[1])
    return 1e3 * d_mhz


def _analytic_d_khz(r, zeta, xi, theta_p, b0, zfs, gyro):
    """Vectorized closed form for d (kHz); angles in radians, r in nm."""
    wb = gyro * b0
    num = (
        3.0 * np.sin(2.0 * zeta) * np.cos(xi) * np.sin(theta_p)
        * (zfs - 3.0 * wb * np.cos(theta_p))
        - 6.0 * wb * np.sin(zeta) ** 2 * np.cos(2.0 * xi) * np.sin(theta_p) ** 2
        + (3.0 * np.cos(2.0 * zeta) + 1.0)
        * (zfs * np.cos(theta_p) - wb * np.cos(2.0 * theta_p))
    )
    den = 4.0 * r**3 * np.sqrt(
        2.0 * (wb * np.sin(theta_p)) ** 2 + (zfs - wb * np.cos(theta_p)) ** 2
    )
    return DIPOLAR_CONSTANT_KHZ_NM3 * num / den


def dipolar_analytic(
    g: DipolarGeometry,
    theta_prime: float,
    b0: float,
    nv: NvSpec,
) -> float:
    """Closed-form secular coupling d (kHz, signed) for an electron pair.

    ``theta_prime`` is the field polar angle in the NV frame (degrees); the
    field is taken in that frame's xz plane, which defines the origin of
    xi. At theta_prime = 0 the expression reduces to
    d_c (3 cos^2 zeta - 1) / (2 r^3).
    """
    return float(
        _analytic_d_khz(
            g.r,
            math.radians(g.zeta),
            math.radians(g.xi),
            math.radians(theta_prime),
            b0,
            nv.zfs,
            nv.electron.gyro,
        )
    )


def _two_tone(params, t):
    """S(t) = A cos(2 pi d t + ph_s) (1 - m + m cos(2 pi f t + ph_f)) + c."""
    a, d, ph_s, m, f, ph_f, c = params
    slow = np.cos(2e-3 * np.pi * d * t + ph_s)  # d in kHz, t in µs
    fast = 1.0 - m + m * np.cos(2.0 * np.pi * f * t + ph_f)
    return a * slow * fast + c


_TONE_NAMES = ("amplitude", "d_khz", "phase_slow", "depth", "fast_mhz",
               "phase_fast", "offset")


def extract_coupling(
    signal: TimeSeries, model: str = "two-tone"
) -> tuple[float, float, FitResult]:
    """Slow/fast tone decomposition of a recoupled-echo trace.

    Fits S(t) = A cos(2 pi d t + ph_s) (1 - m + m cos(2 pi f t + ph_f)) + c
    and returns (d in kHz, f in MHz, fit). Initial frequencies come from
    the two strongest non-DC bins of the discrete spectrum. The record
    must cover at least 3 periods of the slow tone.

    Raises
    ------
    ConvergenceError
        Constant signal, or the optimizer failed.
    AmbiguityError
        Slow and fast tones within a factor 3 of each other; the model
        cannot assign them to dipolar vs hyperfine roles.
    """
    if model != "two-tone":
        raise ValueError(f"unknown model {model!r}")
    t, y = signal.times, signal.values
    if t.size < 8:
        raise ValueError("need at least 8 samples")
    if float(np.ptp(y)) < 1e-12 * max(1.0, abs(float(np.mean(y)))):
        raise ConvergenceError("signal is constant; no tones to extract")

    dt = float(np.mean(np.diff(t)))
    amp = np.abs(np.fft.rfft(y - np.mean(y)))
    freqs = np.fft.rfftfreq(t.size, dt)  # MHz
    k1 = int(np.argmax(amp[1:])) + 1
    # spectral leakage spreads each tone over neighboring bins; look for
    # the second tone outside a guard window around the first
    masked = amp.copy()
    masked[0] = 0.0
    masked[max(k1 - 3, 0) : k1 + 4] = 0.0
    k2 = int(np.argmax(masked)) if np.any(masked > 0) else k1
    f_slow = float(freqs[min(k1, k2)])
    f_fast = float(freqs[max(k1, k2)])
    if k2 == k1:
        f_fast = 3.0 * f_slow
    if f_slow <= 0:
        raise ConvergenceError("could not locate a slow tone")
    span = t[-1] - t[0]

    # the fast tone shows up as sidebands at f +- d, so try the picked bin
    # and both unshifted interpretations, keeping the best fit
    if k2 != k1:
        fast_inits = [f_fast, abs(f_fast - f_slow), f_fast + f_slow]
    else:
        fast_inits = [3.0 * f_slow]
    mid = (np.max(y) + np.min(y)) / 2.0
    a0 = float(np.ptp(y)) / 2.0
    lower = np.array([0.0, 0.0, -2 * np.pi, 0.0, 0.0, -2 * np.pi, -np.inf])
    upper = np.array([np.inf, np.inf, 2 * np.pi, 1.0, np.inf, 2 * np.pi, np.inf])
    res = None
    for f_init in fast_inits:
        if f_init <= 0:
            continue
        x0 = np.array([a0, 1e3 * f_slow, 0.0, 0.5, f_init, 0.0, mid])
        trial = least_squares(
            lambda p: _two_tone(p, t) - y, x0, bounds=(lower, upper),
            method="trf",
        )
        if trial.success and (res is None or trial.cost < res.cost):
            res = trial
    if res is None:
        raise ConvergenceError("two-tone fit failed from every initial guess")
    a, d, ph_s, m, f, ph_f, c = res.x
    if 1e-3 * d * span < 3.0:
        raise ValueError(
            f"record covers {1e-3 * d * span:.2f} slow periods; need >= 3"
        )
    if m > 1e-3 and f < 3e-3 * d:
        raise AmbiguityError(
            f"fast tone {f:.4f} MHz within a factor 3 of the slow tone "
            f"{1e-3 * d:.4f} MHz; assignment is ambiguous"
        )
    chi2 = float(res.fun @ res.fun)
    dof = max(t.size - 7, 0)
    jac = np.asarray(res.jac)
    try:
        cov = covariance_from_jacobian(jac, chi2, dof)
        sig = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except DegeneracyError:
        # a vanishing modulation depth leaves the fast tone unconstrained
        cov = np.full((7, 7), np.nan)
        sig = np.full(7, np.nan)
        keep = [i for i in range(7) if i not in (4, 5)]
        sub = covariance_from_jacobian(jac[:, keep], chi2, dof)
        for a_i, i in enumerate(keep):
            sig[i] = math.sqrt(max(sub[a_i, a_i], 0.0))
            for b_i, j in enumerate(keep):
                cov[i, j] = sub[a_i, b_i]
    fit = FitResult(
        params=dict(zip(_TONE_NAMES, (float(v) for v in res.x))),
        uncertainties=dict(zip(_TONE_NAMES, (float(s) for s in sig))),
        chi_square=chi2,
        dof=dof,
        residuals=res.fun.copy(),
        covariance=cov,
        param_names=_TONE_NAMES,
        model="two-tone",
    )
    return float(d), float(f), fit


def _geometry_model(r, zeta, xi, obs_angles, nv):
    """|d| (kHz) for field rows (theta' deg, phi' deg, b0); angles in deg."""
    return np.abs(
        _analytic_d_khz(
            r,
            math.radians(zeta),
            np.radians(xi - obs_angles[:, 1]),
            np.radians(obs_angles[:, 0]),
            obs_angles[:, 2],
            nv.zfs,
            nv.electron.gyro,
        )
    )


def _geometry_residuals(params, obs_angles, y, w, nv):
    return (_geometry_model(*params, obs_angles, nv) - y) * w


def _canonical_geometry(params: dict[str, float]) -> dict[str, float]:
    """Fold (zeta, xi) into zeta in [0, 90], xi in [0, 360).

    The coupling is exactly invariant under the antipode map
    (zeta, xi) -> (180 - zeta, xi + 180), so the upper hemisphere is the
    canonical representative.
    """
    zeta = params["zeta"] % 360.0
    xi = params["xi"]
    if zeta > 180.0:
        zeta = 360.0 - zeta
        xi = xi + 180.0
    if zeta > 90.0:
        zeta = 180.0 - zeta
        xi = xi + 180.0
    return {"r": params["r"], "zeta": zeta, "xi": xi % 360.0}


def fit_geometry(
    data: list[DipolarObservation], nv: NvSpec | None = None
) -> FitResult:
    """Least-squares (r, zeta, xi) from coupling magnitudes vs field angle.

    Needs at least 4 observations at distinct field polar angles. Starts
    on a coarse (zeta, xi) grid with r solved per start from the 1/r^3
    scaling, then refines; the reported geometry is folded onto the upper
    hemisphere (the antipodal site is exactly equivalent).

    Raises DegeneracyError when the sampled angles cannot separate the
    parameters (ill-conditioned Jacobian at the optimum).
    """
    nv = nv if nv is not None else NvSpec()
    if len(data) < 4:
        raise ValueError(f"need >= 4 observations, got {len(data)}")
    thetas = {round(o.field.theta, 9) for o in data}
    if len(thetas) < 4:
        raise ValueError(
            f"need >= 4 distinct field polar angles, got {len(thetas)}"
        )
    angles = np.array(
        [[*nv_frame_angles(nv, o.field), o.field.b0] for o in data]
    )
    y = np.array([o.coupling for o in data])
    w = 1.0 / np.array([o.sigma for o in data])

    starts = []
    for zeta in np.arange(10.0, 91.0, 20.0):
        # antipodal starts are exactly equivalent; scan one hemisphere
        for xi in np.arange(0.0, 331.0, 30.0):
            model1 = _geometry_model(1.0, zeta, xi, angles, nv)
            ratio = np.median(model1 / np.maximum(y, 1e-9))
            if ratio <= 0:
                continue
            r0 = float(np.cbrt(ratio))
            p0 = np.array([r0, zeta, xi])
            resid = _geometry_residuals(p0, angles, y, w, nv)
            starts.append((float(resid @ resid), p0))
    starts.sort(key=lambda s: (s[0], tuple(s[1])))

    names = ("r", "zeta", "xi")
    fits = []
    last_degeneracy: DegeneracyError | None = None
    for _, x0 in starts[:16]:
        try:
            fits.append(
                weighted_least_squares(
                    lambda p: _geometry_residuals(p, angles, y, w, nv),
                    x0,
                    names,
                    bounds=(np.array([1e-2, -np.inf, -np.inf]), np.inf),
                    x_scale=np.array([1.0, 57.3, 57.3]),
                    model="dipolar-geometry",
                )
            )
        except (DegeneracyError, ConvergenceError) as err:
            if isinstance(err, DegeneracyError):
                last_degeneracy = err
    if not fits:
        if last_degeneracy is not None:
            raise last_degeneracy
        raise ConvergenceError("no geometry start converged")
    best = best_of(fits)
    return FitResult(
        params=_canonical_geometry(best.params),
        uncertainties=best.uncertainties,
        chi_square=best.chi_square,
        dof=best.dof,
        residuals=best.residuals,
        covariance=best.covariance,
        param_names=best.param_names,
        model="dipolar-geometry",
    )


def probability_map(
    data: list[DipolarObservation],
    box: float = 12.0,
    resolution: float = 0.1,
    nv: NvSpec | None = None,
) -> ProbabilityMap:
    """Gaussian-likelihood location map over a cubic box around the NV.

    Each lattice cell (x, y, z) in the NV molecular frame is scored by
    chi^2 against the measured couplings through the closed-form model;
    weights exp(-(chi^2 - chi^2_min)/2) are normalized to total 1. The
    cell at the origin (r = 0) gets weight 0. Evaluation is chunked over
    z slabs to bound memory.
    """
    nv = nv if nv is not None else NvSpec()
    if not data:
        raise ValueError("need at least one observation")
    if not resolution > 0:
        raise ValueError(f"resolution must be > 0, got {resolution}")
    if not box >= resolution:
        raise ValueError("box must be at least one resolution step")
    half_cells = int(round(box / resolution))
    axis = np.arange(-half_cells, half_cells + 1) * resolution
    n = axis.size
    obs = [
        (*nv_frame_angles(nv, o.field), o.field.b0, o.coupling, o.sigma)
        for o in data
    ]

    chi2 = np.empty((n, n, n))
    xg = axis[:, None]
    yg = axis[None, :]
    for k in range(n):
        z = axis[k]
        r = np.sqrt(xg**2 + yg**2 + z**2)
        safe_r = np.where(r > 0, r, 1.0)
        zeta = np.arccos(np.clip(z / safe_r, -1.0, 1.0))
        xi = np.arctan2(yg, xg)
        acc = np.zeros((n, n))
        for theta_p, phi_p, b0, coupling, sigma in obs:
            model = np.abs(
                _analytic_d_khz(
                    safe_r,
                    zeta,
                    xi - math.radians(phi_p),
                    math.radians(theta_p),
                    b0,
                    nv.zfs,
                    nv.electron.gyro,
                )
            )
            acc += ((model - coupling) / sigma) ** 2
        acc[r == 0] = np.inf
        chi2[:, :, k] = acc

    chi2 -= chi2.min()
    weights = np.exp(-0.5 * chi2)
    weights /= weights.sum()
    return ProbabilityMap(axis=axis, values=weights, resolution=resolution)
