"""Command-line front end: ingestion, workflows, artifact emission.

Subcommands: field-solve, hyperfine-fit, locate, sedor-sim, ghz-sim and
synth (fixture generator). Exit codes: 0 success, 1 input error,
2 ambiguous or degenerate result, 3 non-convergence. Every command is
deterministic given its inputs and seed; JSON artifacts are canonical
and reruns reproduce them byte for byte.

Heavy imports happen after --threads is applied, since BLAS pools size
themselves at import time.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinforge",
        description=(
            "Spin-Hamiltonian toolkit: field determination, hyperfine and "
            "dipolar estimation, and control-protocol simulation for an NV "
            "center coupled to unknown electron-nuclear defects."
        ),
    )
    parser.add_argument("--config", help="JSON file with default options")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, help="seed for synthetic noise")
    parser.add_argument("--threads", type=int, help="BLAS/OpenMP thread cap")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field-solve", help="determine B0 and theta from a resonance plus echo spectrum")
    p.add_argument("--resonance", type=float, help="NV resonance frequency (MHz)")
    p.add_argument("--spectrum", help="measured echo-modulation spectrum CSV")
    p.add_argument("--system", help="spin-system JSON (defaults to a bare NV)")
    p.add_argument("--theta-span", type=float, help="scan span above the NV axis (deg)")
    p.add_argument("--theta-step", type=float, help="scan step (deg)")
    p.add_argument("--manifold", choices=["0->-1", "0->+1"], help="resonance manifold")

    p = sub.add_parser("hyperfine-fit", help="fit hyperfine parameters to splitting-vs-orientation data")
    p.add_argument("--data", help="observations CSV")
    p.add_argument("--model", choices=["axial", "full", "both"], help="tensor model; 'both' adds a comparison report")
    p.add_argument("--b0", type=float, help="field magnitude override for the model curve (G)")

    p = sub.add_parser("locate", help="fit defect geometry and map its location probability")
    p.add_argument("--data", help="coupling observations CSV")
    p.add_argument("--system", help="spin-system JSON (defaults to a bare NV)")
    p.add_argument("--box", type=float, help="map half-width (nm)")
    p.add_argument("--resolution", type=float, help="map cell size (nm)")
    p.add_argument("--skip-map", action="store_true", help="fit only, no probability map")

    p = sub.add_parser("sedor-sim", help="simulate the recoupled-resonance spectrum of the X defects")
    p.add_argument("--system", help="spin-system JSON with defects")
    p.add_argument("--b0", type=float, help="field magnitude (G)")
    p.add_argument("--theta", type=float, help="field polar angle (deg)")
    p.add_argument("--phi", type=float, help="field azimuth (deg)")
    p.add_argument("--span", type=float, help="probe span around the electron Zeeman line (MHz)")
    p.add_argument("--points", type=int, help="probe grid size")
    p.add_argument("--linewidth", type=float, help="line FWHM (kHz)")
    p.add_argument("--lines", type=int, help="number of Lorentzian lines to fit")

    p = sub.add_parser("ghz-sim", help="simulate the three-spin coherence phase cycle")
    p.add_argument("--system", help="spin-system JSON with defects")
    p.add_argument("--b0", type=float, help="field magnitude (G)")
    p.add_argument("--theta", type=float, help="field polar angle (deg)")
    p.add_argument("--phi", type=float, help="field azimuth (deg)")
    p.add_argument("--depolarizing", type=float, help="per-pulse depolarizing probability")
    p.add_argument("--over-rotation", type=float, help="fractional pulse-angle error")
    p.add_argument("--polarization", type=float, help="optical NV reset efficiency")
    p.add_argument("--increments", type=float, nargs=3, metavar=("NV", "X2", "X1"), help="phase steps in degrees, multiples of 18")
    p.add_argument("--reps", type=int, help="number of phase-cycle repetitions")

    p = sub.add_parser("synth", help="generate synthetic fixture data")
    p.add_argument("--kind", choices=["hyperfine", "couplings", "eseem"], help="fixture family")
    p.add_argument("--system", help="spin-system JSON providing ground truth")
    p.add_argument("--defect", help="defect label to synthesize for")
    p.add_argument("--b0", type=float, help="field magnitude (G)")
    p.add_argument("--theta", type=float, help="field polar angle for eseem (deg)")
    p.add_argument("--phi", type=float, help="field azimuth for eseem (deg)")
    p.add_argument("--noise", type=float, help="noise level (sigma MHz, relative for couplings)")
    p.add_argument("--dwell", type=float, help="eseem dwell time (µs)")
    p.add_argument("--npoints", type=int, help="eseem record length")
    return parser


class _Options:
    """Precedence: command line > config file > built-in default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = args
        self._config = config

    def get(self, name: str, default=None):
        value = getattr(self._args, name.replace("-", "_"), None)
        if value is not None:
            return value
        section = self._config.get(self._args.command, {})
        if name in section:
            return section[name]
        if name in self._config:
            return self._config[name]
        return default

    def require(self, name: str):
        value = self.get(name)
        if value is None:
            raise ValueError(
                f"missing required option --{name} "
                f"(or config key {self._args.command}.{name})"
            )
        return value


def _load_system(opts: _Options, io, model):
    path = opts.get("system")
    if path is None:
        return model.SpinSystemSpec(nv=model.NvSpec())
    return io.read_system(path)


def _field_from_opts(opts: _Options, model, default_theta_off=12.0):
    from .constants import NV_AXIS_THETA_DEG

    return model.FieldVector(
        b0=float(opts.get("b0", 171.8)),
        theta=float(opts.get("theta", NV_AXIS_THETA_DEG + default_theta_off)),
        phi=float(opts.get("phi", 0.0)),
    )


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def cmd_field_solve(args, opts: _Options) -> int:
    from . import fields, io, plots
    from .errors import AmbiguityError
    from . import model

    system = _load_system(opts, io, model)
    resonance = float(opts.require("resonance"))
    measured = io.read_spectrum_csv(opts.require("spectrum"))
    kwargs = {}
    if opts.get("theta-span") is not None:
        kwargs["theta_span"] = float(opts.get("theta-span"))
    if opts.get("theta-step") is not None:
        kwargs["theta_step"] = float(opts.get("theta-step"))
    if opts.get("manifold") is not None:
        kwargs["manifold"] = opts.get("manifold")

    ambiguous = None
    try:
        solution = fields.solve_field(system.nv, resonance, measured, **kwargs)
    except AmbiguityError as err:
        if err.result is None:
            raise
        solution = err.result
        ambiguous = str(err)

    doc = io.field_solution_to_dict(solution)
    doc["resonance_mhz"] = resonance
    doc["seed"] = args.seed
    if ambiguous is not None:
        doc["ambiguous"] = ambiguous
    io.write_json(_out_path(args, "field_solution.json"), doc)

    best = fields.simulate_eseem(
        system.nv,
        solution.field,
        dwell=float(measured.meta.get("dwell_us", 0.2)),
        npoints=int(measured.meta.get("npoints", 2 * (measured.frequencies.size - 1))),
    )
    plots.plot_spectrum(
        measured,
        _out_path(args, "field_solve.svg"),
        overlay=best,
        title=f"best: B0={solution.field.b0:.2f} G, theta={solution.field.theta:.2f} deg",
    )
    if ambiguous is not None:
        print(f"ambiguous: {ambiguous}", file=sys.stderr)
        return 2
    print(
        f"B0 = {solution.field.b0:.3f} G, theta = {solution.field.theta:.3f} deg"
        f" (residual {solution.residual:.3g})"
    )
    return 0


def cmd_hyperfine_fit(args, opts: _Options) -> int:
    import numpy as np

    from . import hyperfine, io, plots

    from .errors import DegeneracyError

    data = io.read_hyperfine_csv(opts.require("data"))
    if not data:
        raise ValueError("no observations in data file")
    model_choice = opts.get("model", "axial")
    requested = {
        "axial": ["axial"],
        "full": ["full"],
        "both": ["axial", "full"],
    }[model_choice]

    fits = []
    degenerate: dict[str, str] = {}
    for m in requested:
        try:
            fits.append(hyperfine.fit_hyperfine(data, model=m))
        except DegeneracyError as err:
            degenerate[m] = str(err)
    if not fits and "axial" not in requested:
        # the requested model is unidentifiable on this data; fit the
        # smaller model so the report can say which one the data support
        try:
            fits.append(hyperfine.fit_hyperfine(data, model="axial"))
        except DegeneracyError as err:
            degenerate["axial"] = str(err)
    if not fits:
        raise DegeneracyError(
            "; ".join(f"{m}: {msg}" for m, msg in degenerate.items())
        )

    if len(fits) > 1:
        comparison = hyperfine.compare_models(data, fits)
        best = next(f for f in fits if f.model == comparison.preferred)
        report = {
            "preferred": comparison.preferred,
            "ranking": list(comparison.ranking),
            "reduced_chi_square": comparison.reduced_chi_square,
        }
    else:
        best = fits[0]
        report = {
            "preferred": best.model,
            "ranking": [best.model],
            "reduced_chi_square": {best.model: best.reduced_chi_square},
        }
    doc = io.fit_result_to_dict(best)
    if degenerate:
        report["degenerate"] = degenerate
    if len(fits) > 1 or degenerate:
        doc["comparison"] = report
    doc["seed"] = args.seed
    io.write_json(_out_path(args, "hyperfine_fit.json"), doc)

    thetas = np.array([o.field.theta for o in data])
    measured = np.array([o.splitting for o in data])
    sigmas = np.array([o.sigma for o in data])
    modeled = measured - best.residuals * sigmas
    plots.plot_fit_overlay(
        thetas,
        measured,
        sigmas,
        modeled,
        _out_path(args, "hyperfine_fit.svg"),
        xlabel="field polar angle (deg)",
        ylabel="splitting (MHz)",
    )
    params = ", ".join(
        f"{k}={v:.4g}" for k, v in best.params.items()
    )
    print(f"{best.model}: {params}")
    return 0


def cmd_locate(args, opts: _Options) -> int:
    from . import dipolar, io, plots
    from . import model

    system = _load_system(opts, io, model)
    data = io.read_coupling_csv(opts.require("data"))
    if not data:
        raise ValueError("no observations in data file")

    doc: dict = {"kind": "fit_result", "seed": args.seed}
    warning = None
    fit = None
    if len(data) >= 4:
        fit = dipolar.fit_geometry(data, nv=system.nv)
        doc.update(io.fit_result_to_dict(fit))
    else:
        warning = (
            f"only {len(data)} observation(s): geometry is underdetermined, "
            "probability map will be degenerate"
        )
        doc.update(
            {
                "params": {},
                "uncertainties": {},
                "chi_square": 0.0,
                "dof": 0,
                "warning": warning,
            }
        )

    if not opts.get("skip-map", False):
        pmap = dipolar.probability_map(
            data,
            box=float(opts.get("box", 12.0)),
            resolution=float(opts.get("resolution", 0.1)),
            nv=system.nv,
        )
        io.write_map_csv(_out_path(args, "map.csv"), pmap)
        plots.plot_map_slices(pmap, _out_path(args, "locate_slices.svg"))
        doc["argmax_nm"] = list(pmap.argmax_position())
    io.write_json(_out_path(args, "locate.json"), doc)

    if warning is not None:
        print(f"warning: {warning}", file=sys.stderr)
    if fit is not None:
        print(
            f"r = {fit.params['r']:.3f} nm, zeta = {fit.params['zeta']:.2f} deg, "
            f"xi = {fit.params['xi']:.2f} deg"
        )
    return 0


def cmd_sedor_sim(args, opts: _Options) -> int:
    import numpy as np

    from . import io, model, plots, pulses
    from .constants import GAMMA_E_MHZ_PER_G

    system = _load_system(opts, io, model)
    if not system.defects:
        raise ValueError("sedor-sim needs a system with at least one defect")
    field = _field_from_opts(opts, model)
    center = abs(GAMMA_E_MHZ_PER_G) * field.b0
    span = float(opts.get("span", 36.0))
    points = int(opts.get("points", 6001))
    linewidth = float(opts.get("linewidth", 200.0))
    n_lines = int(opts.get("lines", 2 * len(system.defects)))

    grid = np.linspace(center - span / 2, center + span / 2, points)
    spectrum = pulses.sedor_spectrum(system, field, grid, linewidth)
    lines, fit = pulses.fit_lorentzians(spectrum, n_lines)

    io.write_spectrum_csv(_out_path(args, "sedor.csv"), spectrum)
    doc = {
        "kind": "sedor_report",
        "b0_gauss": field.b0,
        "center_mhz": center,
        "linewidth_khz": linewidth,
        "lines": [
            {
                "center_mhz": ln.center,
                "fwhm_mhz": ln.fwhm,
                "amplitude": ln.amplitude,
            }
            for ln in lines
        ],
        "chi_square": fit.chi_square,
        "seed": args.seed,
    }
    io.write_json(_out_path(args, "sedor.json"), doc)
    # unit weights in the fit, so modeled = measured + residuals
    fitted = pulses.Spectrum(
        grid, spectrum.amplitudes + fit.residuals, dict(spectrum.meta)
    )
    plots.plot_spectrum(
        spectrum,
        _out_path(args, "sedor.svg"),
        overlay=fitted,
        title=f"doublets around {center:.1f} MHz",
    )
    centers = ", ".join(f"{ln.center:.3f}" for ln in lines)
    print(f"lines at {centers} MHz (center {center:.3f} MHz)")
    return 0


def cmd_ghz_sim(args, opts: _Options) -> int:
    from . import io, model, plots, pulses

    system = _load_system(opts, io, model)
    field = _field_from_opts(opts, model)
    error_model = pulses.ErrorModel(
        depolarizing=float(opts.get("depolarizing", 0.0)),
        over_rotation=float(opts.get("over-rotation", 0.0)),
        polarization=float(opts.get("polarization", 1.0)),
    )
    increments = tuple(
        float(v) for v in opts.get("increments", (90.0, 36.0, 18.0))
    )
    n_reps = int(opts.get("reps", 64))

    result = pulses.run_phase_cycle(
        system, field, error_model, increments, n_reps
    )
    report = pulses.coherence_and_fidelity(result.components)

    io.write_phase_cycle_csv(
        _out_path(args, "phase_cycle.csv"), result.signal
    )
    doc = {
        "kind": "ghz_report",
        "couplings_khz": pulses.qubit_couplings(system, field),
        "increments_deg": list(increments),
        "n_reps": n_reps,
        "amplitudes": list(result.components.amplitudes),
        "phases_rad": list(result.components.phases),
        "rate_indices": list(range(9)),
        "residual_rms": result.components.residual_rms,
        "coherence_prepared": result.coherence_prepared,
        "coherence": report.coherence,
        "fidelity_bound": report.fidelity_bound,
        "fidelity": report.fidelity,
        "witness_value": report.witness_value,
        "verdict": report.verdict,
        "error_model": {
            "depolarizing": error_model.depolarizing,
            "over_rotation": error_model.over_rotation,
            "polarization": error_model.polarization,
        },
        "seed": args.seed,
    }
    io.write_json(_out_path(args, "ghz.json"), doc)
    plots.plot_phase_cycle(
        result.signal,
        result.components.amplitudes,
        _out_path(args, "ghz.svg"),
    )
    print(
        f"a_8 = {result.components.amplitudes[8]:.4f}, "
        f"|rho_18| = {report.coherence:.4f}, verdict: {report.verdict}"
    )
    return 0


def cmd_synth(args, opts: _Options) -> int:
    import numpy as np

    from . import dipolar, fields, hyperfine, io, model

    kind = opts.require("kind")
    system = _load_system(opts, io, model)
    noise = float(opts.get("noise", 0.0))
    if noise > 0 and args.seed is None:
        raise ValueError("--seed is required when synthesizing noisy data")
    rng = np.random.default_rng(args.seed)
    b0 = float(opts.get("b0", 171.8))
    truth: dict = {"kind": kind, "seed": args.seed, "noise": noise}

    if kind == "hyperfine":
        label = opts.get("defect") or system.defects[0].label
        defect = system.defect(label)
        sigma = noise if noise > 0 else 0.2
        obs = []
        for theta in np.linspace(0.0, 180.0, 13):
            obs.append((theta, 0.0))
        for phi in np.linspace(0.0, 330.0, 12):
            obs.append((90.0, phi))
        data = []
        for theta, phi in obs:
            fv = model.FieldVector(b0, theta, phi)
            y = hyperfine.secular_strength_numeric(defect.hyperfine, fv)
            y = abs(y + (rng.normal(0.0, sigma) if noise > 0 else 0.0))
            data.append(
                hyperfine.HyperfineObservation(fv, y, sigma)
            )
        io.write_hyperfine_csv(_out_path(args, "synth_hyperfine.csv"), data)
        truth["defect"] = label
        truth["tensor"] = io.tensor_to_dict(defect.hyperfine)
    elif kind == "couplings":
        label = opts.get("defect") or system.defects[0].label
        defect = system.defect(label)
        rel = noise if noise > 0 else 0.05
        angles = [(theta, 0.0) for theta in np.linspace(0.0, 180.0, 13)]
        angles += [(90.0, phi) for phi in np.linspace(0.0, 330.0, 12)]
        data = []
        for theta, phi in angles:
            fv = model.FieldVector(b0, theta, phi)
            d = dipolar.secular_dipolar_numeric(system.nv, defect, fv)
            sigma = max(rel * abs(d), 1e-6)
            y = abs(d + (rng.normal(0.0, sigma) if noise > 0 else 0.0))
            data.append(dipolar.DipolarObservation(fv, y, sigma))
        io.write_coupling_csv(_out_path(args, "synth_couplings.csv"), data)
        truth["defect"] = label
        truth["geometry"] = {
            "r_nm": defect.geometry.r,
            "zeta_deg": defect.geometry.zeta,
            "xi_deg": defect.geometry.xi,
        }
    elif kind == "eseem":
        from .constants import NV_AXIS_THETA_DEG

        theta = float(opts.get("theta", NV_AXIS_THETA_DEG + 12.0))
        phi = float(opts.get("phi", 0.0))
        fv = model.FieldVector(b0, theta, phi)
        spectrum = fields.simulate_eseem(
            system.nv,
            fv,
            dwell=float(opts.get("dwell", 0.2)),
            npoints=int(opts.get("npoints", 512)),
        )
        if noise > 0:
            amps = spectrum.amplitudes + rng.normal(
                0.0, noise, spectrum.amplitudes.size
            )
            spectrum = fields.Spectrum(
                spectrum.frequencies, np.abs(amps), dict(spectrum.meta)
            )
        io.write_spectrum_csv(_out_path(args, "synth_eseem.csv"), spectrum)
        truth["field"] = {"b0_gauss": b0, "theta_deg": theta, "phi_deg": phi}
        truth["resonance_mhz"] = fields.nv_resonance_frequency(system.nv, fv)
    else:
        raise ValueError(f"unknown fixture kind {kind!r}")

    io.write_json(_out_path(args, f"synth_{kind}_truth.json"), truth)
    print(f"wrote synth_{kind} fixtures to {args.out}")
    return 0


_COMMANDS = {
    "field-solve": cmd_field_solve,
    "hyperfine-fit": cmd_hyperfine_fit,
    "locate": cmd_locate,
    "sedor-sim": cmd_sedor_sim,
    "ghz-sim": cmd_ghz_sim,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
        ):
            os.environ[var] = str(args.threads)

    from .errors import AmbiguityError, ConvergenceError, DegeneracyError

    try:
        config = {}
        if args.config is not None:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        return _COMMANDS[args.command](args, _Options(args, config))
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (AmbiguityError, DegeneracyError) as err:
        print(f"ambiguous/degenerate: {err}", file=sys.stderr)
        return 2
    except ConvergenceError as err:
        print(f"did not converge: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
