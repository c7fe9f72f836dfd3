"""Magnetic-field determination from an NV resonance plus ESEEM data.

A single resonance frequency pins only a curve of admissible (B0, theta)
pairs; the echo-modulation spectrum breaks that degeneracy because the
nuclear frequencies depend on the full field vector. The solver scans the
admissible curve, simulates the modulation spectrum at each candidate and
scores it against the measurement by normalized cross-correlation.

The envelope model: diagonalize the 6x6 NV Hamiltonian, split the
eigenvectors into m_s = 0 and m_s = -1 nuclear sub-blocks (column
normalized), and evaluate the two-pulse echo envelope from the sub-block
overlap matrix M = U_0^dagger U_1 and the nuclear energies:

    V(tau) = Re sum_{abcd} M_ab M*_cb M_cd M*_ad
             exp(-2 pi i [(E1_b - E1_d) + (E0_c - E0_a)] tau) / 2.

V(0) = 1, and an aligned field gives a diagonal M and a flat envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import brentq

from .errors import AmbiguityError, DegeneracyError
from .model import (
    FieldVector,
    NvSpec,
    eigensystem,
    nv_frame_angles,
    nv_hamiltonian,
    spin_operators,
)

RESONANCE_TOL_MHZ = 1e-3
DEPTH_OBSERVABLE_FLOOR = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """One-sided amplitude spectrum on a strictly increasing grid (MHz)."""

    frequencies: np.ndarray
    amplitudes: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        a = np.asarray(self.amplitudes, dtype=float)
        if f.ndim != 1 or f.shape != a.shape:
            raise ValueError("frequencies and amplitudes must match 1-D")
        if f.size >= 2 and not np.all(np.diff(f) > 0):
            raise ValueError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite")
        f.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "amplitudes", a)


@dataclass(frozen=True)
class FieldCandidate:
    """A locally optimal field hypothesis with its mismatch score."""

    field: FieldVector
    residual: float


@dataclass(frozen=True)
class FieldSolution:
    """Best field hypothesis plus every other local optimum found."""

    field: FieldVector
    residual: float
    alternates: tuple[FieldCandidate, ...] = ()

    def __post_init__(self):
        if not self.residual >= 0:
            raise ValueError("residual must be >= 0")
        object.__setattr__(
            self,
            "alternates",
            tuple(sorted(self.alternates, key=lambda c: c.residual)),
        )


@dataclass(frozen=True)
class EseemFrequencies:
    """Nuclear frequencies of the two NV manifolds and their combinations.

    ``observable`` is False when the modulation depth vanishes (aligned
    field): the frequencies still exist but produce no echo modulation.
    """

    nu0: float
    nu1: float
    difference: float
    total: float
    depth: float
    observable: bool


MANIFOLDS = ("0->-1", "0->+1")


def _electron_hamiltonian(nv: NvSpec, b0: float, theta_p: float) -> np.ndarray:
    """3x3 NV electron Hamiltonian in the NV frame, field in xz plane."""
    sx1, _, sz1 = spin_operators(1.0)
    tp = math.radians(theta_p)
    return nv.zfs * (sz1 @ sz1) + nv.electron.gyro * b0 * (
        math.cos(tp) * sz1 + math.sin(tp) * sx1
    )


def nv_resonance_frequency(
    nv: NvSpec, field: FieldVector, manifold: str = "0->-1"
) -> float:
    """Transition frequency (MHz) between the m_s=0 and target manifolds.

    Eigenvalues are labeled by maximal overlap with the bare m_s states;
    near a level crossing (overlap < 0.5) labeling is impossible and
    DegeneracyError is raised. At B0 = 0 both manifolds sit at the
    zero-field splitting.
    """
    if manifold not in MANIFOLDS:
        raise ValueError(f"manifold must be one of {MANIFOLDS}")
    theta_p, _ = nv_frame_angles(nv, field)
    h = _electron_hamiltonian(nv, field.b0, theta_p)
    evals, evecs = np.linalg.eigh(h)
    adiabatic = np.abs(evecs) ** 2  # rows: (+1, 0, -1)
    i_plus, i_zero, i_minus = (int(np.argmax(adiabatic[r])) for r in range(3))
    if len({i_plus, i_zero, i_minus}) != 3 or min(
        adiabatic[0, i_plus], adiabatic[1, i_zero], adiabatic[2, i_minus]
    ) < 0.5:
        raise DegeneracyError(
            "electron eigenstates mix too strongly to label by m_s "
            "(level crossing); resonance is undefined"
        )
    target = i_minus if manifold == "0->-1" else i_plus
    return float(evals[target] - evals[i_zero])


def admissible_field_curve(
    nv: NvSpec,
    resonance: float,
    theta_grid,
    manifold: str = "0->-1",
) -> list[tuple[float, float]]:
    """(theta, B0) pairs on which the NV resonance equals ``resonance``.

    For each lab polar angle in ``theta_grid`` (degrees, field in the
    phi = 0 plane), brackets and root-finds B0 in (0, 0.95 Delta/gamma_e];
    angles admitting no root are skipped, so the result may be empty.
    Every returned pair satisfies |resonance mismatch| <= 1 kHz.
    """
    b_max = 0.95 * nv.zfs / abs(nv.electron.gyro)
    out: list[tuple[float, float]] = []
    for theta in theta_grid:
        theta = float(theta)

        def mismatch(b0: float) -> float:
            return (
                nv_resonance_frequency(
                    nv, FieldVector(b0, theta, 0.0), manifold
                )
                - resonance
            )

        try:
            lo, hi = 0.0, b_max
            f_lo, f_hi = mismatch(lo), mismatch(hi)
            if f_lo == 0.0:
                b_root = 0.0
            elif f_lo * f_hi > 0:
                continue
            else:
                b_root = brentq(mismatch, lo, hi, xtol=1e-7, rtol=1e-14)
        except DegeneracyError:
            continue
        if abs(mismatch(b_root)) <= RESONANCE_TOL_MHZ:
            out.append((theta, float(b_root)))
    return out


def _nuclear_subblocks(nv: NvSpec, field: FieldVector):
    """Energies and normalized nuclear sub-blocks of the m_s=0/-1 pairs."""
    h = nv_hamiltonian(nv, field, include_nuclear_zeeman=True)
    evals, evecs = eigensystem(h)
    weights = np.array(
        [
            [np.sum(np.abs(evecs[2 * b : 2 * b + 2, i]) ** 2) for b in range(3)]
            for i in range(6)
        ]
    )
    blocks = np.argmax(weights, axis=1)
    out = {}
    for b in (1, 2):  # m_s = 0 block, m_s = -1 block
        idx = np.where(blocks == b)[0]
        if idx.size != 2:
            raise DegeneracyError(
                "nuclear doublets cannot be assigned to electron manifolds; "
                "states are too strongly mixed"
            )
        sub = evecs[2 * b : 2 * b + 2][:, idx]
        sub = sub / np.linalg.norm(sub, axis=0)
        out[b] = (evals[idx], sub)
    return out[1], out[2]


def eseem_frequencies(nv: NvSpec, field: FieldVector) -> EseemFrequencies:
    """Nuclear transition frequencies nu0 (m_s=0) and nu1 (m_s=-1) in MHz.

    Combination lines appear at nu1 -+ nu0. The modulation depth
    k = 4 |M_00 M_01|^2 from the inter-manifold overlap matrix M decides
    ``observable``; it vanishes for an aligned field.
    """
    (e0, u0), (e1, u1) = _nuclear_subblocks(nv, field)
    nu0 = float(abs(e0[1] - e0[0]))
    nu1 = float(abs(e1[1] - e1[0]))
    m = u0.conj().T @ u1
    depth = float(4.0 * (abs(m[0, 0]) * abs(m[0, 1])) ** 2)
    return EseemFrequencies(
        nu0=nu0,
        nu1=nu1,
        difference=abs(nu1 - nu0),
        total=nu1 + nu0,
        depth=depth,
        observable=depth > DEPTH_OBSERVABLE_FLOOR,
    )


def _envelope_terms(nv: NvSpec, field: FieldVector):
    """Coefficients and frequencies of the 16-term echo envelope."""
    (e0, u0), (e1, u1) = _nuclear_subblocks(nv, field)
    m = u0.conj().T @ u1
    coeffs = np.empty(16, dtype=complex)
    freqs = np.empty(16)
    n = 0
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    coeffs[n] = m[a, b] * np.conj(m[c, b]) * m[c, d] * np.conj(m[a, d])
                    freqs[n] = (e1[b] - e1[d]) + (e0[c] - e0[a])
                    n += 1
    return coeffs, freqs


def eseem_envelope(nv: NvSpec, field: FieldVector, taus: np.ndarray) -> np.ndarray:
    """Two-pulse echo envelope V(tau); tau in µs, V(0) = 1."""
    coeffs, freqs = _envelope_terms(nv, field)
    taus = np.asarray(taus, dtype=float)
    phases = np.exp(-2j * np.pi * np.outer(taus, freqs))
    return 0.5 * np.real(phases @ coeffs)


def amplitude_spectrum(values: np.ndarray, dwell: float, meta: dict | None = None) -> Spectrum:
    """One-sided amplitude spectrum of a uniformly sampled real signal.

    amp[0] = |mean|; interior bins carry 2|X_k|/n so a unit-amplitude
    cosine at a bin center reads 1; the Nyquist bin (even n) carries
    |X|/n.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    x = np.fft.rfft(values)
    amp = np.abs(x) / n
    amp[1:] *= 2.0
    if n % 2 == 0:
        amp[-1] /= 2.0
    freqs = np.fft.rfftfreq(n, dwell)
    base = {"dwell_us": float(dwell), "npoints": int(n)}
    if meta:
        base.update(meta)
    return Spectrum(frequencies=freqs, amplitudes=amp, meta=base)


def simulate_eseem(
    nv: NvSpec,
    field: FieldVector,
    dwell: float = 0.2,
    npoints: int = 512,
) -> Spectrum:
    """Amplitude spectrum of the simulated two-pulse echo envelope.

    The envelope is sampled at tau = dwell * (0 .. npoints-1), so any
    modulation line above the Nyquist frequency 1/(2 dwell) appears
    reflected (aliased) exactly as the sampling dictates.
    """
    if npoints < 16:
        raise ValueError(f"npoints must be >= 16, got {npoints}")
    if not dwell > 0:
        raise ValueError(f"dwell must be > 0, got {dwell}")
    taus = dwell * np.arange(npoints)
    env = eseem_envelope(nv, field, taus)
    return amplitude_spectrum(
        env, dwell, {"b0_gauss": field.b0, "theta_deg": field.theta}
    )


def _correlation_residual(sim: np.ndarray, measured: np.ndarray) -> float:
    """1 - Pearson correlation of the non-DC amplitude bins."""
    a = sim[1:] - np.mean(sim[1:])
    b = measured[1:] - np.mean(measured[1:])
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0
    # rounding can push a perfect match to rho = 1 + eps; clamp at 0
    return max(0.0, float(1.0 - (a @ b) / (na * nb)))


def solve_field(
    nv: NvSpec,
    resonance: float,
    measured: Spectrum,
    theta_span: float = 45.0,
    theta_step: float = 0.1,
    manifold: str = "0->-1",
) -> FieldSolution:
    """Pick the (B0, theta) on the admissible curve matching a spectrum.

    Scans lab angles theta_NV .. theta_NV + theta_span (the curve is
    mirror-symmetric about the NV axis for the axial host nucleus, so one
    side suffices), solves B0 from the resonance at each angle, simulates
    the echo spectrum there and scores 1 - correlation against
    ``measured``. Local minima become candidates; all are returned.

    Raises AmbiguityError (carrying the partial solution in ``result``)
    when the measurement cannot discriminate: a flat/featureless spectrum,
    no correlated candidate, or two local optima within 1% of each other.
    """
    if measured.frequencies.size < 2:
        raise ValueError("measured spectrum must have at least 2 bins")
    dwell = measured.meta.get(
        "dwell_us", 1.0 / (2.0 * float(measured.frequencies[-1]))
    )
    npoints = measured.meta.get(
        "npoints", 2 * (measured.frequencies.size - 1)
    )

    thetas = nv.axis_theta + np.arange(0.0, theta_span + 1e-9, theta_step)
    curve = admissible_field_curve(nv, resonance, thetas, manifold)
    if not curve:
        raise ValueError(
            f"no field on the {manifold} manifold reproduces "
            f"{resonance} MHz in the scanned angle range"
        )

    if float(np.ptp(measured.amplitudes[1:])) <= 1e-12 * max(
        1.0, float(np.max(np.abs(measured.amplitudes)))
    ):
        alternates = tuple(
            FieldCandidate(FieldVector(b0, th, 0.0), 1.0) for th, b0 in curve
        )
        solution = FieldSolution(
            field=alternates[0].field, residual=1.0, alternates=alternates
        )
        raise AmbiguityError(
            "measured spectrum is featureless; every admissible "
            "(B0, theta) matches the resonance equally well",
            result=solution,
        )

    residuals = np.empty(len(curve))
    for i, (theta, b0) in enumerate(curve):
        taus = dwell * np.arange(npoints)
        env = eseem_envelope(nv, FieldVector(b0, theta, 0.0), taus)
        sim = amplitude_spectrum(env, dwell)
        residuals[i] = _correlation_residual(
            sim.amplitudes, measured.amplitudes
        )

    is_min = np.ones(len(curve), dtype=bool)
    if len(curve) > 1:
        is_min[:-1] &= residuals[:-1] <= residuals[1:]
        is_min[1:] &= residuals[1:] < residuals[:-1]
    local = sorted(
        (float(residuals[i]), i) for i in np.where(is_min)[0]
    )
    candidates = tuple(
        FieldCandidate(
            FieldVector(curve[i][1], curve[i][0], 0.0), res
        )
        for res, i in local
    )
    best = candidates[0]
    solution = FieldSolution(
        field=best.field, residual=best.residual, alternates=candidates
    )
    if best.residual > 0.8:
        raise AmbiguityError(
            "no admissible field correlates with the measured spectrum",
            result=solution,
        )
    if len(candidates) > 1:
        runner = candidates[1]
        if runner.residual <= best.residual * 1.01 + 1e-12:
            raise AmbiguityError(
                f"two field hypotheses score within 1%: "
                f"(B0={best.field.b0:.2f} G, theta={best.field.theta:.2f}) "
                f"vs (B0={runner.field.b0:.2f} G, "
                f"theta={runner.field.theta:.2f})",
                result=solution,
            )
    return solution
