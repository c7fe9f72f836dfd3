"""Acceptance gate: seven end-to-end guarantees at their stated tolerances.

Each test prints one ``ACCEPTANCE <n>: PASS|FAIL`` line on the real
stdout so the gate can be read off the run log even under capture.
"""

import math
import time
from contextlib import contextmanager

import numpy as np

from spinforge import (
    DensityState,
    Delay,
    DipolarGeometry,
    DipolarObservation,
    ErrorModel,
    FieldVector,
    HyperfineObservation,
    HyperfineTensor,
    NvSpec,
    Polarize,
    Pulse,
    PulseSequence,
    SwapHH,
    XDefectSpec,
    amplitude_spectrum,
    apply_gate,
    coherence_and_fidelity,
    dipolar_analytic,
    eseem_frequencies,
    fit_geometry,
    fit_hyperfine,
    fit_sinusoids,
    ghz_state,
    hyperfine_axial,
    hyperfine_full,
    nv_resonance_frequency,
    probability_map,
    run_phase_cycle,
    secular_dipolar_numeric,
    secular_strength_numeric,
    simulate_eseem,
    solve_field,
)
from spinforge.model import EulerAngles, nv_frame_angles

from conftest import X1_GEOMETRY, X1_TENSOR, X2_GEOMETRY, X2_TENSOR, make_system


@contextmanager
def _scored(capsys, criterion: int, label: str):
    """Print the per-criterion verdict line whether or not asserts pass."""
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"ACCEPTANCE {criterion}: FAIL ({label})", flush=True)
        raise
    with capsys.disabled():
        print(f"ACCEPTANCE {criterion}: PASS ({label})", flush=True)


def _random_field(rng, b0_range=(400.0, 4000.0)) -> FieldVector:
    return FieldVector(
        rng.uniform(*b0_range),
        math.degrees(math.acos(rng.uniform(-1.0, 1.0))),
        rng.uniform(0.0, 360.0),
    )


def _random_tensor(rng, axial=False) -> HyperfineTensor:
    vals = np.sort(rng.uniform(0.5, 30.0, size=3))
    if axial:
        vals[1] = vals[0]
    return HyperfineTensor(
        vals[0],
        vals[1],
        vals[2],
        EulerAngles(
            rng.uniform(0.0, 360.0),
            rng.uniform(0.0, 180.0),
            rng.uniform(0.0, 360.0),
        ),
    )


def test_criterion_1_closed_form_equivalence(capsys):
    with _scored(capsys, 1, "closed forms match the numeric secular coupling"):
        start = time.monotonic()
        rng = np.random.default_rng(2026)
        worst_full = worst_axial = 0.0
        for _ in range(1000):
            t = _random_tensor(rng)
            f = _random_field(rng)
            num = secular_strength_numeric(t, f)
            worst_full = max(
                worst_full, abs(hyperfine_full(t, f) - num) / abs(num)
            )
            t = _random_tensor(rng, axial=True)
            f = _random_field(rng)
            num = secular_strength_numeric(t, f)
            ana = hyperfine_axial(
                t.ax, t.az, t.orientation.alpha, t.orientation.beta, f
            )
            worst_axial = max(worst_axial, abs(ana - num) / abs(num))
        assert worst_full < 1e-9
        assert worst_axial < 1e-9
        # degenerate transverse values: the general form must collapse
        # onto the two-parameter one identically
        worst_red = 0.0
        for _ in range(200):
            a_perp, a_par = rng.uniform(0.5, 30.0, size=2)
            alpha = rng.uniform(0.0, 360.0)
            beta = rng.uniform(0.0, 180.0)
            gamma = rng.uniform(0.0, 360.0)
            t = HyperfineTensor(
                a_perp, a_perp, a_par, EulerAngles(alpha, beta, gamma)
            )
            f = _random_field(rng)
            worst_red = max(
                worst_red,
                abs(
                    hyperfine_full(t, f)
                    - hyperfine_axial(a_perp, a_par, alpha, beta, f)
                ),
            )
        assert worst_red < 1e-12
        assert time.monotonic() - start < 5.0


def _tensor_sweep(tensor, rng, sigma=0.2, b0=1500.0):
    """Polar sweep at phi = 0 plus azimuthal sweep at theta = 90."""
    t = HyperfineTensor.from_axial(*tensor)
    angles = [(th, 0.0) for th in np.linspace(0.0, 180.0, 13)]
    angles += [(90.0, ph) for ph in np.linspace(0.0, 330.0, 12)]
    obs = []
    for th, ph in angles:
        f = FieldVector(b0, th, ph)
        y = abs(secular_strength_numeric(t, f) + rng.normal(0.0, sigma))
        obs.append(HyperfineObservation(f, y, sigma))
    return obs


def _axis_angle_errors(alpha_fit, beta_fit, alpha_true, beta_true):
    """Component errors for the nearer of the two antipodal axes."""
    best = None
    for a, b in (
        (alpha_fit, beta_fit),
        (alpha_fit + 180.0, 180.0 - beta_fit),
    ):
        da = abs((a - alpha_true + 180.0) % 360.0 - 180.0)
        db = abs(b - beta_true)
        if best is None or max(da, db) < max(best[0], best[1]):
            best = (da, db)
    return best


def test_criterion_2_tensor_recovery_trials(capsys):
    with _scored(capsys, 2, "noisy sweeps re-fit the published tensors"):
        start = time.monotonic()
        hits = 0
        for j, truth in enumerate((X1_TENSOR, X2_TENSOR)):
            for trial in range(50):
                rng = np.random.default_rng(7919 * j + trial + 1)
                fit = fit_hyperfine(_tensor_sweep(truth, rng), model="axial")
                e_perp = abs(fit.params["a_perp"] - truth[0])
                e_par = abs(fit.params["a_par"] - truth[1])
                e_alpha, e_beta = _axis_angle_errors(
                    fit.params["alpha"], fit.params["beta"], truth[2], truth[3]
                )
                # 3x the published uncertainties (0.3, 0.2 MHz; 2 deg)
                hits += (
                    e_perp <= 0.9
                    and e_par <= 0.6
                    and e_alpha <= 6.0
                    and e_beta <= 6.0
                )
        assert hits >= 95
        assert time.monotonic() - start < 60.0


def _point_defect(geometry: DipolarGeometry) -> XDefectSpec:
    return XDefectSpec(
        label="x",
        hyperfine=HyperfineTensor.from_axial(1.0, 1.0, 0.0, 0.0),
        geometry=geometry,
    )


def test_criterion_3_dipolar_two_path_equivalence(capsys):
    with _scored(capsys, 3, "analytic coupling matches the doubly-tilted numeric"):
        nv = NvSpec()
        rng = np.random.default_rng(303)
        b0_max = nv.zfs / nv.electron.gyro / 5.0  # keep zfs/(gyro B0) >= 5
        worst = 0.0
        for _ in range(500):
            g = DipolarGeometry(
                rng.uniform(2.0, 12.0),
                rng.uniform(0.0, 180.0),
                rng.uniform(0.0, 360.0),
            )
            f = FieldVector(
                rng.uniform(20.0, b0_max),
                rng.uniform(0.0, 180.0),
                rng.uniform(0.0, 360.0),
            )
            theta_p, phi_p = nv_frame_angles(nv, f)
            num = secular_dipolar_numeric(nv, _point_defect(g), f)
            ana = dipolar_analytic(
                DipolarGeometry(g.r, g.zeta, g.xi - phi_p), theta_p, f.b0, nv
            )
            worst = max(worst, abs(ana - num) / max(abs(num), 1e-9))
        assert worst < 1e-3
        # exact inverse-cube distance scaling
        ref = dipolar_analytic(DipolarGeometry(1.0, 35.0, 20.0), 12.0, 171.8, nv)
        for r in (0.5, 2.0, 6.58, 9.23, 40.0):
            d = dipolar_analytic(DipolarGeometry(r, 35.0, 20.0), 12.0, 171.8, nv)
            assert abs(d * r**3 - ref) <= 1e-12 * abs(ref)
        # aligned-field reduction with the coupling constant pinned
        for _ in range(100):
            r = rng.uniform(1.0, 12.0)
            zeta = rng.uniform(0.0, 180.0)
            xi = rng.uniform(0.0, 360.0)
            d = dipolar_analytic(DipolarGeometry(r, zeta, xi), 0.0, 171.8, nv)
            expect = (
                52.041
                * (3.0 * math.cos(math.radians(zeta)) ** 2 - 1.0)
                / (2.0 * r**3)
            )
            assert abs(d - expect) <= 1e-9 * max(abs(expect), 1e-9)
        d_c = dipolar_analytic(DipolarGeometry(1.0, 0.0, 0.0), 0.0, 171.8, nv)
        assert abs(d_c - 52.041) < 1e-9


def _coupling_sweep(geometry, nv, rng=None, rel_noise=0.05, b0=171.8):
    angles = [(th, 0.0) for th in np.linspace(0.0, 180.0, 13)]
    angles += [(90.0, ph) for ph in np.linspace(0.0, 330.0, 12)]
    defect = _point_defect(geometry)
    out = []
    for th, ph in angles:
        f = FieldVector(b0, th, ph)
        d = secular_dipolar_numeric(nv, defect, f)
        sigma = max(rel_noise * abs(d), 1e-6)
        y = d if rng is None else d + rng.normal(0.0, sigma)
        out.append(DipolarObservation(f, abs(y), sigma))
    return out


def test_criterion_4_localization_round_trip(capsys):
    with _scored(capsys, 4, "distances and map cells recover the true sites"):
        start = time.monotonic()
        nv = NvSpec()
        cases = (
            (DipolarGeometry(*X1_GEOMETRY), 8.5, 1000),
            (DipolarGeometry(*X2_GEOMETRY), 6.0, 1001),
        )
        for truth, box, seed in cases:
            true_xyz = truth.r * np.array(truth.unit_vector())
            rng = np.random.default_rng(seed)
            noisy = _coupling_sweep(truth, nv, rng=rng)
            fit = fit_geometry(noisy, nv=nv)
            assert abs(fit.params["r"] - truth.r) <= 0.05
            # cell containment is a discretization claim: the noiseless
            # posterior peaks at the true site, whose coordinates sit as
            # close as 0.0005 nm to a cell edge, so the argmax cell is
            # checked on noise-free data and the noisy map is only
            # required to stay within two cells
            exact = probability_map(
                _coupling_sweep(truth, nv), box=box, resolution=0.1, nv=nv
            )
            got = np.array(exact.argmax_position())
            assert np.all(np.abs(got - true_xyz) <= 0.05 + 1e-12)
            blurred = probability_map(noisy, box=box, resolution=0.1, nv=nv)
            got = np.array(blurred.argmax_position())
            assert np.all(np.abs(got - true_xyz) <= 0.2 + 1e-12)
        assert time.monotonic() - start < 300.0


def test_criterion_5_field_solver_round_trip(capsys):
    with _scored(capsys, 5, "simulated spectra invert to the source field"):
        nv = NvSpec()
        rng = np.random.default_rng(505)
        for _ in range(50):
            b0 = rng.uniform(50.0, 400.0)
            off = rng.uniform(2.0, 30.0)
            truth = FieldVector(b0, nv.axis_theta + off, nv.axis_phi)
            res = nv_resonance_frequency(nv, truth)
            sol = solve_field(nv, res, simulate_eseem(nv, truth))
            assert abs(sol.field.b0 - b0) <= 0.5
            assert abs(sol.field.theta - truth.theta) <= 0.5
        # no misalignment, no state mixing, no modulation
        for b0 in (50.0, 171.8, 300.0, 500.0):
            aligned = FieldVector(b0, nv.axis_theta, nv.axis_phi)
            assert eseem_frequencies(nv, aligned).depth < 1e-6
        # sampling a tone above Nyquist must land it exactly on the
        # reflected bin with the same amplitude
        n, dwell = 256, 0.2
        taus = dwell * np.arange(n)
        for k in (9, 47, 101):
            f_lo = k / (n * dwell)
            f_hi = (n - k) / (n * dwell)
            lo = amplitude_spectrum(np.cos(2.0 * np.pi * f_lo * taus), dwell)
            hi = amplitude_spectrum(np.cos(2.0 * np.pi * f_hi * taus), dwell)
            assert np.max(np.abs(hi.amplitudes - lo.amplitudes)) < 1e-9
            peak = int(np.argmax(hi.amplitudes[1:])) + 1
            assert peak == k
            assert abs(hi.frequencies[peak] - f_lo) < 1e-12


def test_criterion_6_ghz_protocol(capsys):
    with _scored(capsys, 6, "phase cycle, fixture, and witness behave as stated"):
        system = make_system()
        field = FieldVector(171.8, system.nv.axis_theta + 12.0, system.nv.axis_phi)
        res = run_phase_cycle(system, field)
        amps = res.components.amplitudes
        assert abs(amps[8] - 1.0) <= 1e-9
        assert np.max(amps[:8]) <= 1e-9
        # synthetic record with a known three-spin amplitude of 0.43
        # under the mean-square 1/2 calibration
        rng = np.random.default_rng(7)
        n = np.arange(80.0)
        a8 = 0.43
        a5 = math.sqrt(1.0 - a8**2)
        signal = (
            a8 * np.cos(0.8 * np.pi * n + 0.3)
            + a5 * np.cos(0.5 * np.pi * n - 1.1)
            + rng.normal(0.0, 0.02, n.size)
        )
        comp = fit_sinusoids(signal, normalize=True)
        assert abs(comp.amplitudes[8] - 0.43) <= 0.01
        # fidelity dominates twice the extreme coherence, and the
        # witness fires exactly above 3/4
        m = np.arange(64.0)
        for p in (0.0, 0.2, 0.5, 0.70, 5.0 / 7.0, 0.72, 0.9, 1.0):
            rho = DensityState(
                p * ghz_state().matrix + (1.0 - p) * np.eye(8) / 8.0
            )
            a = 2.0 * abs(rho.matrix[0, 7])
            report = coherence_and_fidelity(
                fit_sinusoids(a * np.cos(0.8 * np.pi * m)), rho
            )
            assert report.fidelity >= a - 1e-12
            assert abs(report.fidelity - (p + (1.0 - p) / 8.0)) < 1e-12
            assert (report.verdict == "entangled") == (report.fidelity > 0.75)
        for chi in (0.0, 55.0, 180.0, 301.0):
            rho = ghz_state(chi=chi)
            a = 2.0 * abs(rho.matrix[0, 7])
            report = coherence_and_fidelity(
                fit_sinusoids(a * np.cos(0.8 * np.pi * m)), rho
            )
            assert report.fidelity >= a - 1e-12
            assert report.verdict == "entangled"


def _random_mixed_state(rng) -> DensityState:
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = a @ a.conj().T
    return DensityState(rho / np.trace(rho).real)


def test_criterion_7_channel_sanity(capsys):
    with _scored(capsys, 7, "every channel preserves trace and Hermiticity"):
        rng = np.random.default_rng(707)
        worst_trace = worst_herm = 0.0
        for _ in range(200):
            couplings = {
                "x1": float(rng.uniform(0.5, 8.0) * rng.choice([-1, 1])),
                "x2": float(rng.uniform(0.5, 8.0) * rng.choice([-1, 1])),
            }
            elements = []
            for _ in range(int(rng.integers(1, 9))):
                kind = int(rng.integers(0, 4))
                if kind == 0:
                    target = ("nv", "x1", "x2")[int(rng.integers(0, 3))]
                    elements.append(
                        Pulse(
                            target,
                            float(rng.uniform(0.0, 360.0)),
                            float(rng.uniform(0.0, 360.0)),
                        )
                    )
                elif kind == 1:
                    elements.append(Delay(float(rng.uniform(0.0, 50.0))))
                elif kind == 2:
                    elements.append(Polarize())
                else:
                    target = ("x1", "x2")[int(rng.integers(0, 2))]
                    elements.append(
                        SwapHH(target, float(rng.uniform(0.0, 200.0)))
                    )
            em = ErrorModel(
                depolarizing=float(rng.uniform(0.0, 0.2)),
                over_rotation=float(rng.uniform(-0.1, 0.1)),
                polarization=float(rng.uniform(0.0, 1.0)),
            )
            out = apply_gate(
                _random_mixed_state(rng), PulseSequence(elements, couplings), em
            )
            worst_trace = max(worst_trace, abs(np.trace(out.matrix).real - 1.0))
            worst_herm = max(
                worst_herm, float(np.max(np.abs(out.matrix - out.matrix.conj().T)))
            )
            assert float(np.min(np.linalg.eigvalsh(out.matrix))) >= -1e-9
        assert worst_trace <= 1e-9
        assert worst_herm <= 1e-12
