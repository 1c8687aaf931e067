from __future__ import annotations

import json

import numpy as np
import pytest

from minorbit import cli
from minorbit.exchange import (ExchangeError, OperatorFile, atomic_write, dump_operator, dumps17, load_operator,
                               read_operator)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestExchange:
    def test_round_trip(self):
        A = 1j * np.array([[0.1, 1 / 3], [1 / 3, -2.0]])
        op = OperatorFile(A, "custom", {"gamma": 0.5})
        back = load_operator(dump_operator(op))
        assert np.array_equal(back.matrix, A)
        assert back.family == "custom"

    def test_seventeen_digits(self):
        assert dumps17({"x": 1 / 3}) == '{\n  "x": 0.33333333333333331\n}'
        assert dumps17([1.0, 2]) == "[1.0, 2]"
        assert json.loads(dumps17({"a": [0.1, float("1e-300")]}))["a"][1] == 1e-300

    def test_numpy_scalars(self):
        assert dumps17({"v": np.float64(0.5), "i": np.int64(3), "b": np.bool_(True)}) == \
            '{\n  "v": 0.5,\n  "i": 3,\n  "b": true\n}'

    def test_malformed(self):
        with pytest.raises(ExchangeError):
            load_operator("{}")
        with pytest.raises(ExchangeError):
            load_operator('{"dim": 2, "entries": [[0, 0]]}')
        with pytest.raises(ExchangeError):
            read_operator("/nonexistent/file.json")

    def test_atomic_write(self, tmp_path):
        p = atomic_write(tmp_path / "sub" / "f.txt", "hello")
        assert p.read_text() == "hello"
        assert [f.name for f in p.parent.iterdir()] == ["f.txt"]


class TestConstruct:
    def test_Zr(self, capsys, tmp_path):
        out = tmp_path / "zr.json"
        code, stdout, _ = run(capsys, "construct", "Zr", "--gamma", "0.5", "-o", str(out))
        assert code == 0
        op = read_operator(out)
        assert op.dim == 64 and op.matrix[0, 0] == 0
        assert json.loads(stdout)["constants"]["M0"] == 2.0
        d = json.loads(out.read_text())
        assert d["structure_flag"] == "anti_hermitian" and d["tail"]["kind"] == "single_limit"

    def test_rejects_bad_oscillant_region(self, capsys, tmp_path):
        code, stdout, err = run(capsys, "construct", "D0prime", "--gamma", "0.7", "--delta", "0.2",
                                "--out-dir", str(tmp_path))
        assert code == 2 and "gamma^2 <= delta" in err and stdout == ""

    def test_Psigma(self, capsys, tmp_path):
        out = tmp_path / "p.json"
        code, _, _ = run(capsys, "construct", "Psigma", "--sigma", "even", "--N", "4", "-o", str(out))
        assert code == 0
        np.testing.assert_array_equal(np.diag(read_operator(out).matrix).real, [0, 1, 0, 1])

    @pytest.mark.parametrize("family", ["L", "Y1", "D0", "Yn", "Dn", "base_point"])
    def test_main_family_members(self, capsys, tmp_path, family):
        code, _, _ = run(capsys, "construct", family, "--n", "8", "--N", "16", "--out-dir", str(tmp_path))
        assert code == 0

    @pytest.mark.parametrize("family", ["Z0", "D0prime", "Znprime", "Dnprime"])
    def test_oscillant_members(self, capsys, tmp_path, family):
        code, _, _ = run(capsys, "construct", family, "--gamma", "0.6", "--delta", "0.36", "--n", "8",
                         "--out-dir", str(tmp_path))
        assert code == 0

    def test_config_and_flag_override(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"schema": 1, "gamma": 0.3, "N": 8, "out_dir": str(tmp_path)}))
        code, stdout, _ = run(capsys, "--config", str(cfg), "construct", "L", "--gamma", "0.4")
        assert code == 0
        op = read_operator(json.loads(stdout)["file"])
        assert op.params["gamma"] == 0.4 and op.dim == 8

    def test_config_schema_required(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"gamma": 0.3}))
        assert run(capsys, "--config", str(cfg), "construct", "L")[0] == 2

    def test_unknown_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"schema": 1, "colour": "red"}))
        assert run(capsys, "--config", str(cfg), "construct", "L")[0] == 2


class TestCertify:
    def _write(self, tmp_path, A, name="op.json"):
        path = tmp_path / name
        atomic_write(path, dump_operator(OperatorFile(np.asarray(A, dtype=complex))))
        return str(path)

    def test_Zr_certified(self, capsys, tmp_path):
        run(capsys, "construct", "Zr", "-o", str(tmp_path / "zr.json"))
        code, stdout, _ = run(capsys, "certify", str(tmp_path / "zr.json"), "--audit-trials", "500")
        assert code == 0
        rep = json.loads(stdout)
        assert rep["verdict"] == "certified_minimal" and rep["audit_worst"] >= -1e-10

    def test_scalar_diagonal(self, capsys, tmp_path):
        assert run(capsys, "certify", self._write(tmp_path, 1j * np.eye(2)))[0] == 3

    def test_Yr_without_diagonal(self, capsys, tmp_path):
        from minorbit import families as fam
        Yr = fam.build_Yr(fam.FamilyParams(gamma=0.5))
        code, stdout, _ = run(capsys, "certify", self._write(tmp_path, Yr))
        assert code == 3 and "pivot_column_orthogonal" in json.loads(stdout)["failed_conditions"]

    def test_parse_failure(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("not json")
        assert run(capsys, "certify", str(bad))[0] == 1

    def test_report_file(self, capsys, tmp_path):
        out = tmp_path / "cert.json"
        run(capsys, "certify", self._write(tmp_path, 1j * np.eye(2)), "-o", str(out))
        assert json.loads(out.read_text())["certificate"]["verdict"] == "conditions_fail"


class TestOtherCommands:
    def test_quotient_norm(self, capsys, tmp_path):
        run(capsys, "construct", "Yn", "--n", "8", "-o", str(tmp_path / "y.json"))
        code, stdout, _ = run(capsys, "quotient-norm", str(tmp_path / "y.json"))
        assert code == 0 and json.loads(stdout)["value"] == pytest.approx(2.0, abs=1e-9)

    def test_curve_length(self, capsys, tmp_path):
        run(capsys, "construct", "Zr", "--N", "16", "-o", str(tmp_path / "z.json"))
        code, stdout, _ = run(capsys, "curve-length", str(tmp_path / "z.json"), "--csv", str(tmp_path / "c.csv"))
        assert code == 0
        assert json.loads(stdout)["length"] == pytest.approx(np.pi / 4, abs=1e-8)
        header = (tmp_path / "c.csv").read_text().splitlines()[0].split(",")
        assert header[:3] == ["t", "re_0_0", "im_0_0"] and len(header) == 1 + 2 * 256

    def test_experiment_n_list_too_large(self, capsys, tmp_path):
        assert run(capsys, "experiment", "norm", "--n-list", "70", "--out-dir", str(tmp_path))[0] == 2

    def test_experiment_norm_writes_reports(self, capsys, tmp_path):
        code, stdout, _ = run(capsys, "experiment", "norm", "--out-dir", str(tmp_path))
        assert code == 0 and stdout.startswith("norm: PASS")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["norm_0.5_64.csv", "norm_0.5_64.json"]
        rep = json.loads((tmp_path / "norm_0.5_64.json").read_text())
        assert rep["passed"] and rep["n_list"] == [4, 8, 16, 32]

    def test_experiment_oscillant_alternative_region(self, capsys, tmp_path):
        code, stdout, err = run(capsys, "experiment", "oscillant", "--gamma", "0.5", "--delta", "0.25",
                                "--out-dir", str(tmp_path))
        # the run completes; its report records the failed assertions
        assert (tmp_path / "oscillant_0.5_64.json").exists()
        assert code == 5 and "interleaving_holds" in err

    def test_experiment_bad_region(self, capsys, tmp_path):
        code, _, _ = run(capsys, "experiment", "oscillant", "--gamma", "0.6", "--delta", "0.5",
                         "--out-dir", str(tmp_path))
        assert code == 2

    def test_no_command(self, capsys):
        assert run(capsys)[0] == 2
