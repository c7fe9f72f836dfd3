"""Closed forms vs numeric secular coupling; tensor fitting and comparison."""

import math
import warnings

import numpy as np
import pytest

from spinforge import (
    FieldVector,
    HyperfineObservation,
    HyperfineTensor,
    compare_models,
    fit_hyperfine,
    hyperfine_axial,
    hyperfine_full,
    secular_strength_numeric,
)
from spinforge.errors import DegeneracyError
from spinforge.hyperfine import _model_jacobian, _model_splittings
from spinforge.model import EulerAngles

from conftest import X1_TENSOR, X2_TENSOR


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


class TestClosedForms:
    def test_full_matches_numeric(self):
        rng = np.random.default_rng(101)
        worst = 0.0
        for _ in range(300):
            t = _random_tensor(rng)
            f = _random_field(rng)
            analytic = hyperfine_full(t, f)
            numeric = secular_strength_numeric(t, f)
            worst = max(worst, abs(analytic - numeric) / numeric)
        assert worst < 1e-9

    def test_axial_matches_numeric(self):
        rng = np.random.default_rng(102)
        for _ in range(300):
            t = _random_tensor(rng, axial=True)
            f = _random_field(rng)
            analytic = hyperfine_axial(
                t.ax, t.az, t.orientation.alpha, t.orientation.beta, f
            )
            numeric = secular_strength_numeric(t, f)
            assert abs(analytic - numeric) <= 1e-9 * numeric

    def test_full_reduces_to_axial(self):
        rng = np.random.default_rng(103)
        for _ in range(200):
            a_perp, a_par = rng.uniform(0.5, 30.0, size=2)
            alpha = rng.uniform(0.0, 360.0)
            beta = rng.uniform(0.0, 180.0)
            gamma = rng.uniform(0.0, 360.0)
            t = HyperfineTensor(
                a_perp, a_perp, a_par, EulerAngles(alpha, beta, gamma)
            )
            f = _random_field(rng)
            assert (
                abs(
                    hyperfine_full(t, f)
                    - hyperfine_axial(a_perp, a_par, alpha, beta, f)
                )
                < 1e-12
            )

    def test_isotropic_limit(self):
        t = HyperfineTensor(4.2, 4.2, 4.2, EulerAngles(31.0, 68.0, 12.0))
        f = FieldVector(2000.0, 77.0, 130.0)
        assert abs(hyperfine_full(t, f) - 4.2) < 1e-12

    def test_alpha_phi_covariance(self):
        # only alpha - phi enters: shifting both leaves C_z unchanged
        t = HyperfineTensor(3.0, 8.0, 15.0, EulerAngles(40.0, 65.0, 20.0))
        f = FieldVector(1500.0, 80.0, 33.0)
        shifted = HyperfineTensor(
            3.0, 8.0, 15.0, EulerAngles(40.0 + 25.0, 65.0, 20.0)
        )
        g = FieldVector(1500.0, 80.0, 33.0 + 25.0)
        assert abs(hyperfine_full(t, f) - hyperfine_full(shifted, g)) < 1e-12

    def test_zero_field_rejected(self):
        t = HyperfineTensor.from_axial(3.0, 5.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            secular_strength_numeric(t, FieldVector(0.0, 30.0, 0.0))

    def test_low_field_warns(self):
        t = HyperfineTensor.from_axial(17.2, 29.4, 0.0, 87.0)
        with pytest.warns(UserWarning, match="secular approximation"):
            secular_strength_numeric(t, FieldVector(20.0, 30.0, 0.0))


class TestJacobian:
    @pytest.mark.parametrize("model", ["axial", "full"])
    def test_matches_finite_differences(self, model):
        rng = np.random.default_rng(7)
        ndirs = np.array(
            [
                FieldVector(1.0, th, ph).unit_vector()
                for th, ph in rng.uniform(10.0, 170.0, size=(8, 2))
            ]
        )
        n_par = 4 if model == "axial" else 6
        for _ in range(5):
            p = np.concatenate(
                [
                    rng.uniform(1.0, 20.0, size=n_par - 2 if model == "axial" else 3),
                    rng.uniform(10.0, 170.0, size=2 if model == "axial" else 3),
                ]
            )
            jac = _model_jacobian(p, ndirs, model)
            for j in range(p.size):
                h = 1e-6 * max(1.0, abs(p[j]))
                pp, pm = p.copy(), p.copy()
                pp[j] += h
                pm[j] -= h
                fd = (
                    _model_splittings(pp, ndirs, model)
                    - _model_splittings(pm, ndirs, model)
                ) / (2 * h)
                denom = np.maximum(
                    np.maximum(np.abs(fd), np.abs(jac[:, j])), 1e-3
                )
                assert np.max(np.abs(fd - jac[:, j]) / denom) < 1e-5


def _sweep_observations(tensor, rng=None, sigma=0.2, b0=1500.0):
    """Polar sweep at phi = 0 plus azimuthal sweep at theta = 90."""
    t = HyperfineTensor.from_axial(*tensor)
    obs = []
    angles = [(th, 0.0) for th in np.linspace(0.0, 180.0, 13)]
    angles += [(90.0, ph) for ph in np.linspace(0.0, 330.0, 12)]
    for th, ph in angles:
        f = FieldVector(b0, th, ph)
        y = secular_strength_numeric(t, f)
        if rng is not None:
            y = abs(y + rng.normal(0.0, sigma))
        obs.append(HyperfineObservation(f, y, sigma))
    return obs


class TestFit:
    def test_noiseless_round_trip_axial(self):
        data = _sweep_observations(X1_TENSOR)
        fit = fit_hyperfine(data, model="axial")
        a_perp, a_par, alpha, beta = X1_TENSOR
        assert abs(fit.params["a_perp"] - a_perp) < 1e-6
        assert abs(fit.params["a_par"] - a_par) < 1e-6
        assert abs(fit.params["beta"] - beta) < 1e-4
        assert abs((fit.params["alpha"] - alpha + 180.0) % 360.0 - 180.0) < 1e-3
        assert fit.chi_square < 1e-10

    def test_noisy_round_trip_with_uncertainties(self):
        rng = np.random.default_rng(11)
        data = _sweep_observations(X2_TENSOR, rng=rng)
        fit = fit_hyperfine(data, model="axial")
        a_perp, a_par, alpha, beta = X2_TENSOR
        # recovered within 5 reported sigma, and sigma itself is sane
        assert abs(fit.params["a_perp"] - a_perp) < 5 * fit.uncertainties["a_perp"]
        assert abs(fit.params["a_par"] - a_par) < 5 * fit.uncertainties["a_par"]
        assert abs(fit.params["beta"] - beta) < 5 * fit.uncertainties["beta"]
        assert 0.0 < fit.uncertainties["a_perp"] < 1.0

    def test_full_model_round_trip(self):
        truth = HyperfineTensor(5.0, 9.0, 14.0, EulerAngles(30.0, 60.0, 40.0))
        obs = []
        angles = [(th, 0.0) for th in np.linspace(5.0, 175.0, 12)]
        angles += [(90.0, ph) for ph in np.linspace(0.0, 330.0, 12)]
        angles += [(45.0, ph) for ph in np.linspace(15.0, 345.0, 12)]
        for th, ph in angles:
            f = FieldVector(1500.0, th, ph)
            obs.append(
                HyperfineObservation(
                    f, secular_strength_numeric(truth, f), 0.05
                )
            )
        fit = fit_hyperfine(obs, model="full")
        assert fit.chi_square < 1e-8
        got = np.sort([fit.params["ax"], fit.params["ay"], fit.params["az"]])
        assert np.allclose(got, [5.0, 9.0, 14.0], atol=1e-4)

    def test_single_orientation_degenerate(self):
        t = HyperfineTensor.from_axial(*X1_TENSOR)
        f = FieldVector(1500.0, 40.0, 0.0)
        y = secular_strength_numeric(t, f)
        data = [HyperfineObservation(f, y + 0.01 * k, 0.2) for k in range(6)]
        with pytest.raises(DegeneracyError):
            fit_hyperfine(data, model="axial")

    def test_too_few_observations(self):
        data = _sweep_observations(X1_TENSOR)[:3]
        with pytest.raises(ValueError):
            fit_hyperfine(data, model="axial")

    def test_canonical_angle_branch(self):
        # beta > 90 folds onto the equivalent beta < 90 representative
        data = _sweep_observations((4.0, 12.0, 200.0, 130.0))
        fit = fit_hyperfine(data, model="axial")
        assert 0.0 <= fit.params["beta"] <= 90.0
        assert 0.0 <= fit.params["alpha"] < 360.0
        # the folded representative reproduces the data
        assert fit.chi_square < 1e-8


class TestComparison:
    def test_prefers_smaller_model_on_axial_data(self):
        rng = np.random.default_rng(23)
        truth = HyperfineTensor(6.0, 11.0, 17.0, EulerAngles(50.0, 70.0, 110.0))
        obs = []
        angles = [(th, 0.0) for th in np.linspace(5.0, 175.0, 12)]
        angles += [(90.0, ph) for ph in np.linspace(0.0, 330.0, 12)]
        angles += [(45.0, ph) for ph in np.linspace(15.0, 345.0, 12)]
        for th, ph in angles:
            f = FieldVector(1500.0, th, ph)
            y = abs(secular_strength_numeric(truth, f) + rng.normal(0.0, 0.05))
            obs.append(HyperfineObservation(f, y, 0.05))
        fits = [
            fit_hyperfine(obs, model="axial"),
            fit_hyperfine(obs, model="full"),
        ]
        cmp = compare_models(obs, fits)
        # rhombic truth: the full model must win on reduced chi-square
        assert cmp.preferred == "full"
        assert cmp.reduced_chi_square["full"] < cmp.reduced_chi_square["axial"]

    def test_requires_two_fits(self):
        data = _sweep_observations(X1_TENSOR)
        fit = fit_hyperfine(data, model="axial")
        with pytest.raises(ValueError):
            compare_models(data, [fit])
