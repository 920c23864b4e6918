"""Tests for the command-line interface and its exit-code contract."""
import json

import numpy as np
import pytest

from selectcond.cli import main
from selectcond.winners import WinnersData, WinnersModelKind, infer_winner


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


WINNERS_DOC = {
    "scenario": "winners-coverage",
    "params": {"m": 4, "theta": [1, 0, 0, 0], "level": 0.9, "n_reps": 20},
    "seed": 7,
}


class TestSimulate:
    def test_runs_and_writes_outputs(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("SELECTCOND_SEED", raising=False)
        cfg = write_config(tmp_path, WINNERS_DOC)
        code = main(["simulate", cfg, "--out", str(tmp_path / "out")])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["summary"]["scenario"] == "winners-coverage"
        csv_path = tmp_path / "out" / "winners-coverage.csv"
        assert csv_path.exists()

    def test_jobs_flag_keeps_bytes(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("SELECTCOND_SEED", raising=False)
        cfg = write_config(tmp_path, WINNERS_DOC)
        assert main(["simulate", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["simulate", cfg, "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
        capsys.readouterr()
        a = (tmp_path / "a" / "winners-coverage.csv").read_bytes()
        b = (tmp_path / "b" / "winners-coverage.csv").read_bytes()
        assert a == b

    def test_seed_flag_overrides_config(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("SELECTCOND_SEED", raising=False)
        cfg = write_config(tmp_path, WINNERS_DOC)
        assert main(["simulate", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["simulate", cfg, "--out", str(tmp_path / "b"), "--seed", "8"]) == 0
        capsys.readouterr()
        a = (tmp_path / "a" / "winners-coverage.csv").read_bytes()
        b = (tmp_path / "b" / "winners-coverage.csv").read_bytes()
        assert a != b

    def test_env_seed_used_and_flag_wins(self, tmp_path, capsys, monkeypatch):
        cfg = write_config(tmp_path, WINNERS_DOC)
        monkeypatch.setenv("SELECTCOND_SEED", "8")
        assert main(["simulate", cfg, "--out", str(tmp_path / "env")]) == 0
        assert main(["simulate", cfg, "--out", str(tmp_path / "flag"),
                     "--seed", "7"]) == 0
        capsys.readouterr()
        monkeypatch.delenv("SELECTCOND_SEED")
        assert main(["simulate", cfg, "--out", str(tmp_path / "plain")]) == 0
        capsys.readouterr()
        env = (tmp_path / "env" / "winners-coverage.csv").read_bytes()
        flag = (tmp_path / "flag" / "winners-coverage.csv").read_bytes()
        plain = (tmp_path / "plain" / "winners-coverage.csv").read_bytes()
        assert env != plain
        assert flag == plain

    def test_bad_config_exits_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(WINNERS_DOC, typo=1))
        assert main(["simulate", cfg]) == 1

    def test_missing_file_exits_one(self, capsys):
        assert main(["simulate", "/nonexistent/config.json"]) == 1

    def test_usage_error_exits_one(self, capsys):
        assert main(["simulate"]) == 1


class TestInfer:
    def test_winners_matches_library(self, tmp_path, capsys):
        y = np.array([2.0, 0.0, -1.0])
        data = tmp_path / "y.csv"
        data.write_text(",".join(str(v) for v in y))
        code = main(["infer", "winners", "--data", str(data),
                     "--kind", "conditional-on-losers", "--level", "0.9"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        ref = infer_winner(WinnersData(y), WinnersModelKind.CONDITIONAL_ON_LOSERS, 0.9)
        assert doc["estimate"] == pytest.approx(ref.estimate, rel=1e-12)
        assert doc["ci"][0] == pytest.approx(ref.ci[0], rel=1e-12)
        assert doc["pvalue"] == pytest.approx(ref.pvalue, rel=1e-12)

    def test_winners_from_stdin(self, capsys, monkeypatch):
        import io
        monkeypatch.setattr("sys.stdin", io.StringIO("2.0 0.0 -1.0"))
        assert main(["infer", "winners", "--data", "-"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["model_kind"] == "conditional-on-losers"

    def test_two_stage(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        while True:
            s1 = 0.8 + rng.standard_normal(6)
            if s1.sum() > 1.96 * np.sqrt(6):
                break
        s2 = 0.8 + rng.standard_normal(4)
        data = tmp_path / "two.csv"
        data.write_text("\n".join(str(v) for v in np.concatenate([s1, s2])))
        code = main(["infer", "two-stage", "--data", str(data), "--n1", "6"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["model_kind"] == "two-stage-conditional"

    def test_two_stage_unselected_is_numeric_failure(self, tmp_path, capsys):
        data = tmp_path / "two.csv"
        data.write_text("-1.0,-2.0,0.5")
        assert main(["infer", "two-stage", "--data", str(data), "--n1", "2"]) == 2

    def test_two_stage_requires_n1(self, tmp_path, capsys):
        data = tmp_path / "two.csv"
        data.write_text("1.0,2.0")
        assert main(["infer", "two-stage", "--data", str(data)]) == 1

    def test_location(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        while True:
            y = 1.2 + rng.standard_normal(5)
            if y.mean() > 1.2816 / np.sqrt(5):  # u <= 0.1 for the gaussian family
                break
        data = tmp_path / "loc.csv"
        data.write_text(" ".join(str(v) for v in y))
        code = main(["infer", "location", "--data", str(data),
                     "--family", "gaussian", "--alpha", "0.1"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["model_kind"] == "location-gaussian"

    def test_polyhedral(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((15, 3))
        X = X / np.linalg.norm(X, axis=0)
        beta = np.array([1.5, 0.0, 0.0])
        y = X @ beta + rng.standard_normal(15)
        design = tmp_path / "X.csv"
        design.write_text("\n".join(",".join(str(v) for v in row) for row in X))
        data = tmp_path / "y.csv"
        data.write_text(",".join(str(v) for v in y))
        code = main(["infer", "polyhedral", "--design", str(design),
                     "--data", str(data), "--threshold", "1.0"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["model_kind"] == "polyhedral"
        assert doc["ci"][0] < doc["estimate"] < doc["ci"][1]

    def test_empty_data_numeric_failure(self, tmp_path, capsys):
        data = tmp_path / "empty.csv"
        data.write_text("")
        assert main(["infer", "winners", "--data", str(data)]) == 2


class TestCheckAncillarity:
    def test_default_audit_passes(self, capsys):
        code = main(["check-ancillarity", "--audits", "40", "--seed", "5"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["all_audits_passed"] is True
        assert doc["n_audits"] == 40

    def test_counterexample_mode(self, capsys):
        code = main(["check-ancillarity", "--audits", "10", "--seed", "5",
                     "--counterexample"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["counterexample_failed_as_expected"] is True

    def test_report_written(self, tmp_path, capsys):
        code = main(["check-ancillarity", "--audits", "5", "--seed", "1",
                     "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "ancillarity-audit.summary.json").exists()
