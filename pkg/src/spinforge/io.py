"""Artifact serialization: canonical JSON documents and CSV tables.

JSON output is deterministic (sorted keys, two-space indent, trailing
newline, non-finite floats mapped to null) so reruns diff clean. Every
document kind has a schema under ``spinforge/schemas`` for validation.
CSV columns follow the documented formats: angles in degrees, fields in
Gauss, energies in MHz, couplings in kHz, distances in nm.
"""

from __future__ import annotations

import csv
import json
import math
from importlib import resources

import numpy as np

from .dipolar import DipolarObservation, ProbabilityMap
from .fields import FieldSolution, Spectrum
from .fitting import FitResult
from .hyperfine import HyperfineObservation
from .model import (
    DipolarGeometry,
    EulerAngles,
    FieldVector,
    HyperfineTensor,
    NvSpec,
    SpinSpecies,
    SpinSystemSpec,
    XDefectSpec,
)

SCHEMA_NAMES = (
    "spin_system",
    "fit_result",
    "field_solution",
    "ghz_report",
    "sedor_report",
)


def _clean(obj):
    """Make an object JSON-ready: numpy scalars to python, non-finite to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, indent 2, newline-terminated."""
    return (
        json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False)
        + "\n"
    )


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_schema(name: str) -> dict:
    """Load one of the shipped JSON schemas by short name."""
    if name not in SCHEMA_NAMES:
        raise ValueError(f"unknown schema {name!r}, have {SCHEMA_NAMES}")
    ref = resources.files("spinforge").joinpath(f"schemas/{name}.schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_document(doc: dict, name: str) -> None:
    """Validate a document against a shipped schema (raises on mismatch)."""
    import jsonschema

    jsonschema.validate(doc, load_schema(name))


# ---------------------------------------------------------------- systems


def tensor_to_dict(t: HyperfineTensor) -> dict:
    return {
        "ax_mhz": t.ax,
        "ay_mhz": t.ay,
        "az_mhz": t.az,
        "alpha_deg": t.orientation.alpha,
        "beta_deg": t.orientation.beta,
        "gamma_deg": t.orientation.gamma,
    }


def tensor_from_dict(d: dict) -> HyperfineTensor:
    return HyperfineTensor(
        ax=float(d["ax_mhz"]),
        ay=float(d["ay_mhz"]),
        az=float(d["az_mhz"]),
        orientation=EulerAngles(
            float(d.get("alpha_deg", 0.0)),
            float(d.get("beta_deg", 0.0)),
            float(d.get("gamma_deg", 0.0)),
        ),
    )


def system_to_dict(system: SpinSystemSpec) -> dict:
    nv = system.nv
    return {
        "kind": "spin_system",
        "nv": {
            "zfs_mhz": nv.zfs,
            "axis_theta_deg": nv.axis_theta,
            "axis_phi_deg": nv.axis_phi,
            "electron_gyro_mhz_per_g": nv.electron.gyro,
            "nucleus_gyro_mhz_per_g": nv.nucleus.gyro,
            "host_hyperfine": tensor_to_dict(nv.n15_hyperfine),
        },
        "defects": [
            {
                "label": x.label,
                "hyperfine": tensor_to_dict(x.hyperfine),
                "geometry": {
                    "r_nm": x.geometry.r,
                    "zeta_deg": x.geometry.zeta,
                    "xi_deg": x.geometry.xi,
                },
                "electron_gyro_mhz_per_g": x.electron.gyro,
                "nucleus_gyro_mhz_per_g": x.nucleus.gyro,
            }
            for x in system.defects
        ],
    }


def system_from_dict(doc: dict) -> SpinSystemSpec:
    nv_doc = doc.get("nv", {})
    defaults = NvSpec()
    nv = NvSpec(
        zfs=float(nv_doc.get("zfs_mhz", defaults.zfs)),
        axis_theta=float(nv_doc.get("axis_theta_deg", defaults.axis_theta)),
        axis_phi=float(nv_doc.get("axis_phi_deg", defaults.axis_phi)),
        n15_hyperfine=(
            tensor_from_dict(nv_doc["host_hyperfine"])
            if "host_hyperfine" in nv_doc
            else defaults.n15_hyperfine
        ),
        electron=SpinSpecies(
            1.0,
            float(
                nv_doc.get(
                    "electron_gyro_mhz_per_g", defaults.electron.gyro
                )
            ),
            defaults.electron.label,
        ),
        nucleus=SpinSpecies(
            0.5,
            float(nv_doc.get("nucleus_gyro_mhz_per_g", defaults.nucleus.gyro)),
            defaults.nucleus.label,
        ),
    )
    defects = []
    for xd in doc.get("defects", []):
        geom = xd["geometry"]
        kwargs = {}
        if "electron_gyro_mhz_per_g" in xd:
            kwargs["electron"] = SpinSpecies(
                0.5, float(xd["electron_gyro_mhz_per_g"]), "x-electron"
            )
        if "nucleus_gyro_mhz_per_g" in xd:
            kwargs["nucleus"] = SpinSpecies(
                0.5, float(xd["nucleus_gyro_mhz_per_g"]), "x-nucleus"
            )
        defects.append(
            XDefectSpec(
                label=str(xd["label"]),
                hyperfine=tensor_from_dict(xd["hyperfine"]),
                geometry=DipolarGeometry(
                    r=float(geom["r_nm"]),
                    zeta=float(geom["zeta_deg"]),
                    xi=float(geom["xi_deg"]),
                ),
                **kwargs,
            )
        )
    return SpinSystemSpec(nv=nv, defects=tuple(defects))


def read_system(path) -> SpinSystemSpec:
    return system_from_dict(read_json(path))


def write_system(path, system: SpinSystemSpec) -> None:
    write_json(path, system_to_dict(system))


# ---------------------------------------------------------------- results


def fit_result_to_dict(fit: FitResult) -> dict:
    return {
        "kind": "fit_result",
        "model": fit.model,
        "param_names": list(fit.param_names),
        "params": dict(fit.params),
        "uncertainties": dict(fit.uncertainties),
        "chi_square": fit.chi_square,
        "dof": fit.dof,
        "reduced_chi_square": (
            fit.reduced_chi_square if fit.dof > 0 else None
        ),
    }


def field_solution_to_dict(sol: FieldSolution) -> dict:
    def fv(f: FieldVector, residual: float) -> dict:
        return {
            "b0_gauss": f.b0,
            "theta_deg": f.theta,
            "phi_deg": f.phi,
            "residual": residual,
        }

    return {
        "kind": "field_solution",
        "field": fv(sol.field, sol.residual),
        "residual": sol.residual,
        "alternates": [fv(c.field, c.residual) for c in sol.alternates],
    }


# ------------------------------------------------------------------- CSV


def _write_rows(path, header: list[str], rows, meta: dict | None = None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key in sorted(meta or {}):
            fh.write(f"# {key}={meta[key]!r}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def _read_rows(path, expected: list[str]):
    meta: dict = {}
    rows: list[list[float]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        header: list[str] | None = None
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                try:
                    meta[key.strip()] = json.loads(value)
                except json.JSONDecodeError:
                    meta[key.strip()] = value.strip().strip("'\"")
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = [c.strip() for c in cells]
                if header != expected:
                    raise ValueError(
                        f"expected columns {expected}, got {header}"
                    )
                continue
            rows.append([float(c) for c in cells])
    if header is None:
        raise ValueError(f"{path}: empty file, expected columns {expected}")
    return rows, meta


HYPERFINE_COLUMNS = [
    "theta_deg",
    "phi_deg",
    "b0_gauss",
    "splitting_mhz",
    "sigma_mhz",
]
COUPLING_COLUMNS = [
    "theta_deg",
    "phi_deg",
    "b0_gauss",
    "coupling_khz",
    "sigma_khz",
]
SPECTRUM_COLUMNS = ["frequency_mhz", "amplitude"]
MAP_COLUMNS = ["x_nm", "y_nm", "z_nm", "weight"]
PHASE_CYCLE_COLUMNS = ["n", "signal"]


def write_hyperfine_csv(path, data: list[HyperfineObservation]) -> None:
    _write_rows(
        path,
        HYPERFINE_COLUMNS,
        (
            (o.field.theta, o.field.phi, o.field.b0, o.splitting, o.sigma)
            for o in data
        ),
    )


def read_hyperfine_csv(path) -> list[HyperfineObservation]:
    rows, _ = _read_rows(path, HYPERFINE_COLUMNS)
    return [
        HyperfineObservation(
            field=FieldVector(b0, theta, phi),
            splitting=split,
            sigma=sigma,
        )
        for theta, phi, b0, split, sigma in rows
    ]


def write_coupling_csv(path, data: list[DipolarObservation]) -> None:
    _write_rows(
        path,
        COUPLING_COLUMNS,
        (
            (o.field.theta, o.field.phi, o.field.b0, o.coupling, o.sigma)
            for o in data
        ),
    )


def read_coupling_csv(path) -> list[DipolarObservation]:
    rows, _ = _read_rows(path, COUPLING_COLUMNS)
    return [
        DipolarObservation(
            field=FieldVector(b0, theta, phi),
            coupling=coupling,
            sigma=sigma,
        )
        for theta, phi, b0, coupling, sigma in rows
    ]


def write_spectrum_csv(path, spectrum: Spectrum) -> None:
    """Two-column spectrum CSV; meta entries become '# key=value' lines."""
    meta = {
        k: v
        for k, v in spectrum.meta.items()
        if isinstance(v, (int, float, str))
    }
    _write_rows(
        path,
        SPECTRUM_COLUMNS,
        zip(spectrum.frequencies, spectrum.amplitudes),
        meta=meta,
    )


def read_spectrum_csv(path) -> Spectrum:
    rows, meta = _read_rows(path, SPECTRUM_COLUMNS)
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        raise ValueError(f"{path}: no spectrum rows")
    return Spectrum(frequencies=arr[:, 0], amplitudes=arr[:, 1], meta=meta)


MAP_WEIGHT_FLOOR = 1e-12


def write_map_csv(path, pmap: ProbabilityMap) -> None:
    """Flatten a probability map, dropping cells below 1e-12 of the peak.

    The full cube at fine resolution is dominated by numerically zero
    cells; the floor keeps files reviewable without moving the argmax or
    any credible-region boundary.
    """
    peak = float(np.max(pmap.values))
    floor = MAP_WEIGHT_FLOOR * peak
    axis = pmap.axis

    def rows():
        idx = np.argwhere(pmap.values > floor)
        for i, j, k in idx:
            yield (axis[i], axis[j], axis[k], pmap.values[i, j, k])

    _write_rows(
        path,
        MAP_COLUMNS,
        rows(),
        meta={"resolution_nm": pmap.resolution, "box_nm": float(axis[-1])},
    )


def write_phase_cycle_csv(path, signal: np.ndarray) -> None:
    signal = np.asarray(signal, dtype=float)
    _write_rows(
        path, PHASE_CYCLE_COLUMNS, zip(range(signal.size), signal)
    )


def read_phase_cycle_csv(path) -> np.ndarray:
    rows, _ = _read_rows(path, PHASE_CYCLE_COLUMNS)
    arr = np.asarray(rows, dtype=float)
    order = np.argsort(arr[:, 0])
    return arr[order, 1]
