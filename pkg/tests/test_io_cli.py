"""Artifact serialization and the command-line workflows."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from spinforge import (
    DipolarObservation,
    FieldCandidate,
    FieldSolution,
    FieldVector,
    HyperfineObservation,
    ProbabilityMap,
    Spectrum,
    fit_lorentzians,
    simulate_eseem,
)
from spinforge.cli import main
from spinforge.io import (
    canonical_json,
    field_solution_to_dict,
    fit_result_to_dict,
    load_schema,
    read_coupling_csv,
    read_hyperfine_csv,
    read_json,
    read_phase_cycle_csv,
    read_spectrum_csv,
    read_system,
    system_from_dict,
    system_to_dict,
    tensor_from_dict,
    tensor_to_dict,
    validate_document,
    write_coupling_csv,
    write_hyperfine_csv,
    write_map_csv,
    write_phase_cycle_csv,
    write_spectrum_csv,
    write_system,
)

from conftest import make_system


class TestCanonicalJson:
    def test_sorted_indented_terminated(self):
        text = canonical_json({"b": 1, "a": 2})
        assert text == '{\n  "a": 2,\n  "b": 1\n}\n'

    def test_insertion_order_irrelevant(self):
        assert canonical_json({"x": 1, "y": 2}) == canonical_json(
            {"y": 2, "x": 1}
        )

    def test_numpy_types_cleaned(self):
        doc = json.loads(
            canonical_json(
                {
                    "f": np.float64(1.5),
                    "i": np.int64(3),
                    "arr": np.array([1.0, 2.0]),
                }
            )
        )
        assert doc == {"f": 1.5, "i": 3, "arr": [1.0, 2.0]}

    def test_non_finite_become_null(self):
        doc = json.loads(
            canonical_json({"a": np.inf, "b": float("nan"), "c": 1.0})
        )
        assert doc == {"a": None, "b": None, "c": 1.0}


class TestCsvRoundTrips:
    def test_hyperfine(self, tmp_path):
        data = [
            HyperfineObservation(
                FieldVector(1500.0, 37.5, 211.25), 12.3456789012345, 0.2
            ),
            HyperfineObservation(FieldVector(1500.0, 90.0, 0.0), 3.25, 0.15),
        ]
        path = tmp_path / "obs.csv"
        write_hyperfine_csv(path, data)
        back = read_hyperfine_csv(path)
        assert back == data  # repr round trip keeps floats exact

    def test_coupling(self, tmp_path):
        data = [
            DipolarObservation(FieldVector(171.8, 66.7, 0.0), 41.25, 2.0),
            DipolarObservation(FieldVector(171.8, 90.0, 30.0), 7.5, 0.4),
        ]
        path = tmp_path / "couplings.csv"
        write_coupling_csv(path, data)
        assert read_coupling_csv(path) == data

    def test_spectrum_with_meta(self, nv, tilted_field, tmp_path):
        s = simulate_eseem(nv, tilted_field, dwell=0.2, npoints=64)
        path = tmp_path / "spectrum.csv"
        write_spectrum_csv(path, s)
        back = read_spectrum_csv(path)
        assert np.array_equal(back.frequencies, s.frequencies)
        assert np.array_equal(back.amplitudes, s.amplitudes)
        assert back.meta["dwell_us"] == 0.2
        assert back.meta["npoints"] == 64
        assert back.meta["b0_gauss"] == 171.8

    def test_phase_cycle(self, tmp_path):
        signal = np.sin(np.arange(20.0))
        path = tmp_path / "cycle.csv"
        write_phase_cycle_csv(path, signal)
        assert np.array_equal(read_phase_cycle_csv(path), signal)

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "obs.csv"
        write_hyperfine_csv(
            path, [HyperfineObservation(FieldVector(100.0, 0.0, 0.0), 1.0, 0.1)]
        )
        with pytest.raises(ValueError):
            read_coupling_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError):
            read_hyperfine_csv(path)

    def test_map_drops_negligible_cells(self, tmp_path):
        axis = np.array([-0.5, 0.5])
        values = np.zeros((2, 2, 2))
        values[1, 0, 1] = 1.0 - 1e-13
        values[0, 0, 0] = 1e-13  # below the 1e-12 relative floor
        pmap = ProbabilityMap(axis=axis, values=values, resolution=1.0)
        path = tmp_path / "map.csv"
        write_map_csv(path, pmap)
        lines = path.read_text().splitlines()
        meta = [ln for ln in lines if ln.startswith("#")]
        rows = [
            next(csv.reader([ln]))
            for ln in lines
            if ln and not ln.startswith("#")
        ]
        assert any("resolution_nm=1.0" in ln for ln in meta)
        assert rows[0] == ["x_nm", "y_nm", "z_nm", "weight"]
        assert len(rows) == 2  # header plus the one surviving cell
        x, y, z, w = (float(v) for v in rows[1])
        assert (x, y, z) == (0.5, -0.5, 0.5)


class TestSystemCodec:
    def test_round_trip(self, system):
        doc = system_to_dict(system)
        validate_document(doc, "spin_system")
        back = system_from_dict(doc)
        assert back == system

    def test_file_round_trip(self, system, tmp_path):
        path = tmp_path / "system.json"
        write_system(path, system)
        assert read_system(path) == system

    def test_defaults_from_empty_document(self):
        system = system_from_dict({})
        assert system.nv.zfs == 2870.0
        assert system.defects == ()

    def test_tensor_round_trip(self, system):
        t = system.defects[1].hyperfine
        assert tensor_from_dict(tensor_to_dict(t)) == t

    def test_tensor_angles_default_to_zero(self):
        t = tensor_from_dict({"ax_mhz": 1.0, "ay_mhz": 2.0, "az_mhz": 3.0})
        assert t.orientation.alpha == 0.0
        assert t.orientation.beta == 0.0


class TestSchemas:
    def test_all_schemas_load(self):
        for name in (
            "spin_system",
            "fit_result",
            "field_solution",
            "ghz_report",
            "sedor_report",
        ):
            schema = load_schema(name)
            assert schema["title"]

    def test_unknown_schema_rejected(self):
        with pytest.raises(ValueError):
            load_schema("mystery")

    def test_field_solution_document(self):
        best = FieldCandidate(FieldVector(171.8, 66.7, 0.0), 0.01)
        sol = FieldSolution(
            field=best.field, residual=best.residual, alternates=(best,)
        )
        validate_document(field_solution_to_dict(sol), "field_solution")

    def test_fit_result_document(self):
        freq = np.linspace(478.0, 486.0, 801)
        amp = 1.0 - 0.4 * 0.01 / ((freq - 482.0) ** 2 + 0.01)
        _, fit = fit_lorentzians(Spectrum(freq, amp, {}), 1)
        validate_document(fit_result_to_dict(fit), "fit_result")


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def system_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("system") / "system.json"
    write_system(path, make_system())
    return path


class TestCliWorkflows:
    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "spinforge.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "field-solve" in proc.stdout

    def test_synth_then_field_solve_round_trip(self, tmp_path):
        fixtures = tmp_path / "fixtures"
        assert run_cli("--out", fixtures, "synth", "--kind", "eseem") == 0
        truth = read_json(fixtures / "synth_eseem_truth.json")
        out = tmp_path / "solve"
        code = run_cli(
            "--out",
            out,
            "field-solve",
            "--resonance",
            truth["resonance_mhz"],
            "--spectrum",
            fixtures / "synth_eseem.csv",
        )
        assert code == 0
        doc = read_json(out / "field_solution.json")
        validate_document(doc, "field_solution")
        assert abs(doc["field"]["b0_gauss"] - 171.8) < 1e-3
        assert abs(doc["field"]["theta_deg"] - 66.7) < 1e-6
        assert doc["residual"] < 1e-9
        assert (out / "field_solve.svg").read_text().lstrip().startswith(
            "<?xml"
        )

    def test_flat_spectrum_is_ambiguous_with_partial_artifact(
        self, tmp_path, capsys
    ):
        fixtures = tmp_path / "fixtures"
        assert (
            run_cli(
                "--out",
                fixtures,
                "synth",
                "--kind",
                "eseem",
                "--theta",
                54.7,
            )
            == 0
        )
        truth = read_json(fixtures / "synth_eseem_truth.json")
        out = tmp_path / "solve"
        code = run_cli(
            "--out",
            out,
            "field-solve",
            "--resonance",
            truth["resonance_mhz"],
            "--spectrum",
            fixtures / "synth_eseem.csv",
        )
        assert code == 2
        assert "ambiguous" in capsys.readouterr().err
        doc = read_json(out / "field_solution.json")
        validate_document(doc, "field_solution")
        assert "ambiguous" in doc
        assert len(doc["alternates"]) > 100

    def test_hyperfine_fit_recovers_tensor(self, tmp_path, system_file):
        fixtures = tmp_path / "fixtures"
        code = run_cli(
            "--out",
            fixtures,
            "synth",
            "--kind",
            "hyperfine",
            "--system",
            system_file,
            "--defect",
            "X1",
            "--b0",
            1500.0,
        )
        assert code == 0
        out = tmp_path / "fit"
        code = run_cli(
            "--out",
            out,
            "hyperfine-fit",
            "--data",
            fixtures / "synth_hyperfine.csv",
            "--model",
            "axial",
        )
        assert code == 0
        doc = read_json(out / "hyperfine_fit.json")
        validate_document(doc, "fit_result")
        assert abs(doc["params"]["a_perp"] - 17.2) < 0.05
        assert abs(doc["params"]["a_par"] - 29.4) < 0.05
        assert abs(doc["params"]["beta"] - 87.0) < 0.5

    def test_full_model_on_axial_data_reports_degeneracy(
        self, tmp_path, system_file
    ):
        fixtures = tmp_path / "fixtures"
        run_cli(
            "--out",
            fixtures,
            "synth",
            "--kind",
            "hyperfine",
            "--system",
            system_file,
            "--defect",
            "X1",
            "--b0",
            1500.0,
        )
        out = tmp_path / "fit"
        code = run_cli(
            "--out",
            out,
            "hyperfine-fit",
            "--data",
            fixtures / "synth_hyperfine.csv",
            "--model",
            "full",
        )
        # axial data cannot identify the full tensor; the command falls
        # back to the identifiable model and says so instead of failing
        assert code == 0
        doc = read_json(out / "hyperfine_fit.json")
        assert doc["model"] == "axial"
        assert doc["comparison"]["preferred"] == "axial"
        assert "full" in doc["comparison"]["degenerate"]

    def test_locate_recovers_geometry(self, tmp_path, system_file):
        fixtures = tmp_path / "fixtures"
        code = run_cli(
            "--out",
            fixtures,
            "synth",
            "--kind",
            "couplings",
            "--system",
            system_file,
            "--defect",
            "X1",
        )
        assert code == 0
        out = tmp_path / "locate"
        code = run_cli(
            "--out",
            out,
            "locate",
            "--data",
            fixtures / "synth_couplings.csv",
            "--box",
            11.0,
            "--resolution",
            0.5,
        )
        assert code == 0
        doc = read_json(out / "locate.json")
        assert abs(doc["params"]["r"] - 9.23) < 0.05
        assert abs(doc["params"]["zeta"] - 35.0) < 0.5
        assert abs(doc["params"]["xi"] - 20.0) < 0.5
        assert (out / "map.csv").exists()
        assert (out / "locate_slices.svg").exists()
        r = np.linalg.norm(doc["argmax_nm"])
        assert abs(r - 9.23) < 0.5  # within one cell of the fitted radius

    def test_locate_underdetermined_warns_not_fails(
        self, tmp_path, system_file, capsys
    ):
        fixtures = tmp_path / "fixtures"
        run_cli(
            "--out",
            fixtures,
            "synth",
            "--kind",
            "couplings",
            "--system",
            system_file,
        )
        rows = read_coupling_csv(fixtures / "synth_couplings.csv")[:3]
        short = fixtures / "short.csv"
        write_coupling_csv(short, rows)
        out = tmp_path / "locate"
        code = run_cli(
            "--out", out, "locate", "--data", short, "--skip-map"
        )
        assert code == 0
        assert "underdetermined" in capsys.readouterr().err
        doc = read_json(out / "locate.json")
        assert doc["params"] == {}
        assert "warning" in doc

    def test_ghz_sim_ideal(self, tmp_path, system_file):
        out = tmp_path / "ghz"
        code = run_cli(
            "--out", out, "ghz-sim", "--system", system_file
        )
        assert code == 0
        doc = read_json(out / "ghz.json")
        validate_document(doc, "ghz_report")
        assert abs(doc["amplitudes"][8] - 1.0) < 1e-9
        assert doc["verdict"] == "entangled"
        assert set(doc["couplings_khz"]) == {"x1", "x2"}
        assert (out / "phase_cycle.csv").exists()
        signal = read_phase_cycle_csv(out / "phase_cycle.csv")
        assert signal.size == 64

    def test_sedor_sim(self, tmp_path, system_file):
        out = tmp_path / "sedor"
        code = run_cli(
            "--out", out, "sedor-sim", "--system", system_file
        )
        assert code == 0
        doc = read_json(out / "sedor.json")
        validate_document(doc, "sedor_report")
        assert len(doc["lines"]) == 4
        center = doc["center_mhz"]
        outer = doc["lines"][0], doc["lines"][-1]
        assert abs(
            0.5 * (outer[0]["center_mhz"] + outer[1]["center_mhz"]) - center
        ) < 0.5
        spectrum = read_spectrum_csv(out / "sedor.csv")
        assert spectrum.frequencies.size == 6001

    def test_exit_codes(self, tmp_path, system_file):
        out = tmp_path / "x"
        # missing input file
        assert (
            run_cli(
                "--out", out, "hyperfine-fit", "--data", tmp_path / "no.csv"
            )
            == 1
        )
        # invalid option value
        fixtures = tmp_path / "fixtures"
        run_cli(
            "--out",
            fixtures,
            "synth",
            "--kind",
            "couplings",
            "--system",
            system_file,
        )
        assert (
            run_cli(
                "--out",
                out,
                "locate",
                "--data",
                fixtures / "synth_couplings.csv",
                "--resolution",
                0.0,
            )
            == 1
        )
        # noise without a seed is irreproducible, refuse
        assert (
            run_cli(
                "--out", out, "synth", "--kind", "eseem", "--noise", 0.05
            )
            == 1
        )
        # increments off the 18 degree lattice
        assert (
            run_cli(
                "--out",
                out,
                "ghz-sim",
                "--system",
                system_file,
                "--increments",
                90,
                36,
                10,
            )
            == 1
        )

    def test_config_file_with_cli_override(self, tmp_path, system_file):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "system": str(system_file),
                    "synth": {"kind": "hyperfine", "defect": "X2"},
                    "b0": 900.0,
                }
            )
        )
        out1 = tmp_path / "from_config"
        assert run_cli("--config", config, "--out", out1, "synth") == 0
        rows = read_hyperfine_csv(out1 / "synth_hyperfine.csv")
        assert rows[0].field.b0 == 900.0
        truth = read_json(out1 / "synth_hyperfine_truth.json")
        assert truth["defect"] == "X2"
        out2 = tmp_path / "overridden"
        assert (
            run_cli(
                "--config", config, "--out", out2, "synth", "--b0", 450.0
            )
            == 0
        )
        rows = read_hyperfine_csv(out2 / "synth_hyperfine.csv")
        assert rows[0].field.b0 == 450.0

    def test_reruns_are_byte_identical(self, tmp_path, system_file):
        def run_all(out):
            assert (
                run_cli(
                    "--out",
                    out,
                    "--seed",
                    13,
                    "synth",
                    "--kind",
                    "hyperfine",
                    "--system",
                    system_file,
                    "--noise",
                    0.2,
                )
                == 0
            )
            assert (
                run_cli(
                    "--out",
                    out,
                    "ghz-sim",
                    "--system",
                    system_file,
                    "--over-rotation",
                    0.02,
                )
                == 0
            )

        a, b = tmp_path / "a", tmp_path / "b"
        run_all(a)
        run_all(b)
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
