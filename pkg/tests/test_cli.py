import json
import math

import numpy as np
import pytest

from qring.cli import main
from qring.io import levels_from_text, spectrum_to_csv, spectrum_to_json, u_from_json
from qring.spectrum import full_spectrum
from qring.u2 import Geometry, from_matrix

EXCHANGE_JSON = '{"xi": 1.5707963267948966, "alpha": [0, 0], "beta": [0, -1]}'
MINUS_ID_JSON = '{"matrix": [[[-1, 0], [0, 0]], [[0, 0], [-1, 0]]]}'


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSpectrumCommand:
    def test_exchange_csv(self, capsys):
        code, out, _ = run_cli(capsys, "spectrum", "--u", EXCHANGE_JSON, "--levels", "3")
        assert code == 0
        rows = out.strip().splitlines()
        assert rows[0] == "index,sector,wavenumber,energy,multiplicity"
        assert rows[1].startswith("0,zero,")
        k1 = float(rows[2].split(",")[2])
        assert k1 == pytest.approx(2 * math.pi, abs=1e-10)
        assert rows[2].split(",")[4] == "2"

    def test_byte_stability(self, capsys):
        a = run_cli(capsys, "spectrum", "--u", EXCHANGE_JSON, "--levels", "4")
        b = run_cli(capsys, "spectrum", "--u", EXCHANGE_JSON, "--levels", "4")
        assert a == b

    def test_file_output_and_reingestion(self, tmp_path, capsys):
        path = tmp_path / "spec.csv"
        code, _, _ = run_cli(
            capsys, "spectrum", "--u", EXCHANGE_JSON, "--levels", "4", "--output", str(path)
        )
        assert code == 0
        levels = levels_from_text(path.read_text())
        direct = full_spectrum(u_from_json(EXCHANGE_JSON), Geometry(1.0, 1.0), 4)
        assert len(levels) == len(direct)
        for a, b in zip(levels, direct):
            assert a.sector == b.sector
            assert a.wavenumber == b.wavenumber  # repr round-trip is lossless
            assert a.multiplicity == b.multiplicity


class TestClassifyCommand:
    def test_minus_identity_flags(self, capsys):
        code, out, _ = run_cli(capsys, "classify", "--u", MINUS_ID_JSON)
        assert code == 0
        payload = json.loads(out)
        assert payload["separated"] and payload["isospectral"] and payload["self_dual"]
        assert payload["length_left"] == pytest.approx(0.0, abs=1e-12)
        assert payload["length_right"] == pytest.approx(0.0, abs=1e-12)


class TestOrbitCommand:
    def test_symmetry_maps_are_isospectral(self, capsys):
        code, out, _ = run_cli(
            capsys, "orbit", "--u", EXCHANGE_JSON, "--levels", "5", "--samples", "2"
        )
        assert code == 0
        rows = out.strip().splitlines()[1:]
        assert len(rows) == 5  # parity, T, PT, two rotations
        for row in rows:
            assert float(row.split(",")[1]) < 1e-9

    def test_pair_conjugation_orbit(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "orbit",
            "--u",
            MINUS_ID_JSON,
            "--u2",
            EXCHANGE_JSON,
            "--levels",
            "4",
            "--samples",
            "2",
        )
        assert code == 0
        for row in out.strip().splitlines()[1:]:
            assert float(row.split(",")[1]) < 1e-8


class TestInvertCommand:
    def test_round_trip_through_files(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.csv"
        run_cli(
            capsys,
            "spectrum",
            "--u",
            '{"xi": 0.9, "alpha": [0.2, 0.4], "beta": [0.8, 0.4]}',
            "--levels",
            "120",
            "--output",
            str(spec_path),
        )
        code, out, _ = run_cli(capsys, "invert", str(spec_path), "--method", "both")
        assert code == 0
        payload = json.loads(out)
        assert payload["case"] == "III"
        assert payload["fit"]["xi"] == pytest.approx(0.9, abs=1e-9)
        assert payload["asymptotic"]["xi"] == pytest.approx(0.9, abs=1e-6)
        assert payload["triple"]["alpha_r"] == pytest.approx(0.2, abs=1e-6)
        assert payload["triple"]["beta_i"] == pytest.approx(0.4, abs=1e-6)


class TestKernelCommand:
    def test_grid_output_shape(self, capsys):
        code, out, _ = run_cli(
            capsys, "kernel", "--family", "box", "--case", "00", "--grid", "4", "--tau", "0.1"
        )
        assert code == 0
        rows = out.strip().splitlines()
        assert rows[0] == "x,y,re_k,im_k"
        assert len(rows) == 17

    def test_smooth_family(self, capsys):
        code, out, _ = run_cli(
            capsys, "kernel", "--family", "smooth", "--theta", "1.0", "--grid", "3"
        )
        assert code == 0


class TestRoundtripCommand:
    def test_seeded_run(self, capsys):
        code, out, _ = run_cli(capsys, "roundtrip", "--seed", "42", "--levels", "80")
        assert code == 0
        payload = json.loads(out)
        assert payload["fit_error"] < 1e-9
        assert payload["asymptotic_error"] < 1e-3


class TestTwopointCommand:
    def test_free_pair(self, capsys):
        code, out, _ = run_cli(
            capsys, "twopoint", "--u1", EXCHANGE_JSON, "--u2", EXCHANGE_JSON, "--levels", "2"
        )
        assert code == 0
        rows = out.strip().splitlines()
        assert rows[1].startswith("0,zero,")
        assert rows[2].split(",")[4] == "2"


class TestErrorPaths:
    def test_bad_json_is_config_error(self, capsys):
        code, _, err = run_cli(capsys, "spectrum", "--u", "not json")
        assert code == 2
        assert "configuration error" in err

    def test_unknown_keys_rejected(self, capsys):
        code, _, err = run_cli(capsys, "spectrum", "--u", '{"xi": 0, "alpha": [1,0], "beta": [0,0], "bogus": 1}')
        assert code == 2

    def test_non_unitary_matrix_is_numeric_failure(self, capsys):
        code, _, err = run_cli(
            capsys, "spectrum", "--u", '{"matrix": [[[1,0],[0.5,0]],[[0,0],[1,0]]]}'
        )
        assert code == 3
        assert "numeric failure" in err


def test_serialization_round_trip():
    spec = full_spectrum(from_matrix(np.eye(2)), Geometry(1.0, 1.0), 5)
    for text in (spectrum_to_csv(spec), spectrum_to_json(spec)):
        levels = levels_from_text(text)
        assert len(levels) == len(spec)
        for a, b in zip(levels, spec):
            assert a.wavenumber == b.wavenumber and a.sector == b.sector
