import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from revembed import catalog
from revembed.cli import (
    EXIT_INPUT,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    FAMILIES,
    MatrixFile,
    Report,
    catalog_matrix,
    parse_matrix_file,
    render_report,
    run,
    write_matrix_file,
)
from revembed.errors import DimensionMismatch, NonNumeric, ParseError
from revembed.markov import validate_generator, validate_stochastic


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def matrix_json(tmp_path, rows, name="m.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"d": len(rows), "rows": [list(map(float, r)) for r in rows]}))
    return str(path)


class TestParse:
    def test_json(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"d":2,"rows":[[0.75,0.25],[0.25,0.75]]}')
        mf = parse_matrix_file(path)
        assert mf.format == "json" and mf.d == 2
        np.testing.assert_array_equal(mf.rows, [[0.75, 0.25], [0.25, 0.75]])

    def test_csv(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,0\n0,1\n")
        np.testing.assert_array_equal(parse_matrix_file(path).rows, np.eye(2))

    def test_ragged_csv(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,0\n0\n")
        with pytest.raises(DimensionMismatch):
            parse_matrix_file(path)

    def test_non_numeric_position(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,0\n0,x\n")
        with pytest.raises(NonNumeric) as info:
            parse_matrix_file(path)
        assert (info.value.line, info.value.col) == (2, 2)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"d": 2, "rows": [[1, 0], [0, 1]')
        with pytest.raises(ParseError) as info:
            parse_matrix_file(path)
        assert info.value.line == 1

    def test_declared_dimension(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"d": 3, "rows": [[1, 0], [0, 1]]}')
        with pytest.raises(DimensionMismatch):
            parse_matrix_file(path)

    def test_json_round_trip_is_exact(self, tmp_path):
        rows = np.random.default_rng(20).uniform(size=(4, 4))
        mf = MatrixFile("json", 4, rows, "markov")
        write_matrix_file(mf, tmp_path / "a.json")
        back = parse_matrix_file(tmp_path / "a.json")
        np.testing.assert_array_equal(back.rows, rows)
        assert back.kind == "markov"
        write_matrix_file(back, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


class TestCommands:
    def test_classify_strange_json(self, tmp_path):
        path = matrix_json(tmp_path, catalog.m_delta(catalog.EPSILON).entries)
        code, out, _ = call("classify", "--input", path, "--format", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["verdict"] == "EmbeddableNotReversibly"
        assert len(data["generators"]) == 2
        assert data["details"]["commuting"] is True
        assert set(data) >= {"verdict", "measures", "generators", "spectrum", "residuals", "tolerances"}

    def test_classify_text_two_state(self, tmp_path):
        path = matrix_json(tmp_path, [[0.7, 0.3], [0.6, 0.4]])
        code, out, _ = call("classify", "--input", path)
        assert code == EXIT_OK
        assert "Reversible" in out
        assert "p = (0.666667, 0.333333)" in out

    def test_not_reversible_is_success(self, tmp_path):
        path = matrix_json(tmp_path, [[0.7, 0.2, 0.1], [0.1, 0.7, 0.2], [0.2, 0.1, 0.7]])
        code, out, _ = call("classify", "--input", path)
        assert code == EXIT_OK
        assert "NotReversible" in out and "witness (cycle)" in out

    def test_json_report_round_trip(self, tmp_path):
        path = matrix_json(tmp_path, [[0.7, 0.3], [0.6, 0.4]])
        _, out, _ = call("classify", "--input", path, "--format", "json")
        report = Report.from_dict(json.loads(out))
        assert render_report(report, "json") == out

    def test_determinism(self, tmp_path):
        path = matrix_json(tmp_path, catalog.dihedral_markov().entries)
        first = call("classify", "--input", path, "--format", "json", "--no-timing")[1]
        second = call("classify", "--input", path, "--format", "json", "--no-timing")[1]
        assert first == second
        assert json.loads(first)["timing"] is None

    def test_log_vdm(self, tmp_path):
        path = matrix_json(tmp_path, [[0.7, 0.3], [0.2, 0.8]])
        code, out, _ = call("log", "--input", path, "--method", "vdm", "--format", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["details"]["alpha"] == pytest.approx([-math.log(0.5) / 0.5], rel=1e-14)
        assert data["residuals"]["VandermondePolynomial"] <= 1e-12

    @pytest.mark.parametrize("method", ["eigen", "series", "integral", "vdm"])
    def test_log_methods_agree(self, tmp_path, method):
        path = matrix_json(tmp_path, [[0.7, 0.3], [0.2, 0.8]])
        out = tmp_path / "L.json"
        code, _, _ = call("log", "--input", path, "--method", method, "--output", str(out))
        assert code == EXIT_OK
        L = parse_matrix_file(out).rows
        np.testing.assert_allclose(L[0, 1], 0.3 * 2 * math.log(2), rtol=1e-10)

    def test_exp_and_sqrt(self, tmp_path):
        Q = catalog.q_pair(1.0)[0].entries
        path = matrix_json(tmp_path, Q)
        out = tmp_path / "M.json"
        assert call("exp", "--input", path, "--output", str(out))[0] == EXIT_OK
        M = parse_matrix_file(out).rows
        M2 = M @ M.T
        path2 = matrix_json(tmp_path, M2, "m2.json")
        code, text, _ = call("sqrt", "--input", path2, "--format", "json")
        assert code == EXIT_OK
        R = np.array(json.loads(text)["details"]["matrix"])
        np.testing.assert_allclose(R @ R, M2, atol=1e-12)

    def test_validate(self, tmp_path):
        path = matrix_json(tmp_path, [[1.0, 0.0], [0.5, 0.5]])
        code, out, _ = call("validate", "--input", path, "--format", "json")
        data = json.loads(out)
        assert code == EXIT_OK and data["verdict"] == "ValidMarkov"
        assert data["details"]["closed"] == [True, False]
        gen = matrix_json(tmp_path, [[-1.0, 1.0], [0.0, 0.0]], "q.json")
        assert call("validate", "--input", gen, "--kind", "generator")[0] == EXIT_OK

    def test_catalog_dihedral_generator(self):
        code, out, _ = call("catalog", "--family", "dihedral", "--param", "which=generator", "--format", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["d"] == 4 and data["kind"] == "generator"
        np.testing.assert_array_equal(data["rows"], catalog.dihedral_generator().entries)

    @pytest.mark.parametrize(
        "family,params",
        [
            ("equal_input", {"x": "0.2,0,0.1"}),
            ("equal_input", {"x": "0.2,0,0.1", "which": "generator"}),
            ("constant_input", {"c": "1.5", "d": "4"}),
            ("m_delta", {"delta": "0.1"}),
            ("m_delta", {}),
            ("q_pair", {"k": "1", "which": "minus"}),
            ("dihedral", {}),
        ],
    )
    def test_catalog_families_validate(self, family, params):
        mf = catalog_matrix(family, params)
        if mf.kind == "generator":
            validate_generator(mf.rows)
        else:
            validate_stochastic(mf.rows)
        assert family in FAMILIES

    def test_catalog_csv_output_round_trip(self, tmp_path):
        out = tmp_path / "m.csv"
        code, text, _ = call("catalog", "--family", "m_delta", "--param", "delta=0.25", "--output", str(out))
        assert code == EXIT_OK
        np.testing.assert_array_equal(parse_matrix_file(out).rows, catalog.m_delta(0.25).entries)
        assert text.count("\n") == 3

    def test_probe(self, tmp_path):
        plus, minus = catalog.q_pair(catalog.lambda_k(0))
        a = matrix_json(tmp_path, plus.entries, "a.json")
        b = matrix_json(tmp_path, minus.entries, "b.json")
        code, out, _ = call("probe", "--input", a, "--input", b, "--grid", "0:3:0.05", "--format", "json")
        assert code == EXIT_OK
        assert json.loads(out)["details"]["hits"] == [0.0, 1.0, 2.0, 3.0]


class TestErrors:
    def test_unknown_subcommand(self):
        assert call("frobnicate")[0] == EXIT_USAGE

    def test_unknown_flag(self, tmp_path):
        assert call("classify", "--bogus")[0] == EXIT_USAGE

    def test_missing_input(self):
        assert call("classify")[0] == EXIT_USAGE

    def test_bad_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,0\n0\n")
        code, _, err = call("classify", "--input", str(path))
        assert code == EXIT_INPUT and "square" in err

    def test_missing_file(self, tmp_path):
        assert call("classify", "--input", str(tmp_path / "nope.json"))[0] == EXIT_INPUT

    def test_not_stochastic(self, tmp_path):
        path = matrix_json(tmp_path, [[0.5, 0.6], [0.7, 0.3]])
        code, _, err = call("classify", "--input", path)
        assert code == EXIT_INPUT and "row 0" in err

    def test_series_divergence_is_numerical(self, tmp_path):
        path = matrix_json(tmp_path, [[0.0, 1.0], [1.0, 0.0]])
        assert call("log", "--input", path, "--method", "series")[0] == EXIT_NUMERICAL

    def test_bad_tolerance(self, tmp_path):
        path = matrix_json(tmp_path, np.eye(2))
        assert call("classify", "--input", path, "--tol", "nonsense=1")[0] == EXIT_INPUT
        assert call("classify", "--input", path, "--tol", "db_tol")[0] == EXIT_USAGE


class TestTolerances:
    def test_flag_is_reported(self, tmp_path):
        path = matrix_json(tmp_path, np.eye(2))
        _, out, _ = call("classify", "--input", path, "--format", "json", "--tol", "db_tol=1e-6", "--tol", "emb_tol=1e-8")
        tol = json.loads(out)["tolerances"]
        assert tol["db_tol"] == 1e-6 and tol["emb_tol"] == 1e-8

    def test_environment_file(self, tmp_path, monkeypatch):
        cfg = tmp_path / "tol.cfg"
        cfg.write_text("# looser detailed balance\ndb_tol = 1e-3\n")
        monkeypatch.setenv("REVEMBED_TOL_CONFIG", str(cfg))
        path = matrix_json(tmp_path, [[0.7, 0.3], [0.6, 0.4]])
        _, out, _ = call("classify", "--input", path, "--format", "json")
        assert json.loads(out)["tolerances"]["db_tol"] == 1e-3


def test_module_entry_point(tmp_path):
    path = matrix_json(tmp_path, [[0.7, 0.3], [0.6, 0.4]])
    proc = subprocess.run(
        [sys.executable, "-m", "revembed", "classify", "--input", path, "--no-timing"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("classify: ReversiblyEmbeddable")
