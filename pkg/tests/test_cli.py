import json
import os
from pathlib import Path

import pytest

from bertrand_lab.cli import main, resolve_jobs

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(*argv):
    return main([str(a) for a in argv])


def test_classify_rows(capsys):
    assert run("classify", "--c", 1, "--delta", 0) == 0
    out = capsys.readouterr().out
    assert "regime row      : 1" in out and "pseudo-Riemann. : empty" in out
    assert run("classify", "--c", -1, "--delta", 0, "--json") == 0
    out = capsys.readouterr().out
    doc = json.loads(out[out.index("{"):])
    assert doc["riemannian_intervals"] == [[1, "inf"]] and doc["pseudo_intervals"] == [[0, 1]]
    assert run("classify", "--c", -3, "--delta", -1) == 0
    out = capsys.readouterr().out
    assert "equator theta   : 1" in out and out.count("(") >= 4


def test_classify_missing_args():
    assert run("classify", "--c", 1) == 2


def test_simulate_kepler_and_manifest(tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--config", CONFIGS / "kepler_simulate.ini", "--plot", "--out", out) == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,r,phi,p_r,H,K,driftH"
    assert max(float(l.split(",")[6]) for l in lines[1:]) < 1e-8
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["outputs"]) == {"trajectory.csv", "orbit.svg"}
    assert "<dc:date>" not in (out / "orbit.svg").read_text()


def test_simulate_singular_and_left_domain(tmp_path):
    assert run("simulate", "--set", "surface.family=sphere", "--set", "experiment.r0=1", "--set", "experiment.k=0",
               "--set", "experiment.t_end=1", "--out", tmp_path / "a") == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert "singular" in man["summary"]["notes"][0]
    assert run("simulate", "--set", "surface.family=de_sitter", "--set", "experiment.r0=0",
               "--set", "experiment.p_r0=1", "--set", "experiment.k=0.5", "--set", "experiment.t_end=20",
               "--out", tmp_path / "b") == 0
    man = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert man["summary"]["exit_reason"] == "left_domain"


def test_scan_outputs_and_determinism(tmp_path):
    args = ["scan", "--config", CONFIGS / "kepler_scan.ini", "--set", "experiment.k_values=1.0",
            "--set", "experiment.fractions=0.2,0.6", "--jobs", "1"]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "scan.csv").read_bytes()
    assert a == (tmp_path / "b" / "scan.csv").read_bytes()
    assert a.splitlines()[0] == b"E,K,r_minus,r_plus,phi_over_pi,p,q,verdict"
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["closing_evidence"] is True


def test_scan_perturbed_reports_witness(tmp_path, capsys):
    assert run("scan", "--config", CONFIGS / "perturbed_kepler_scan.ini", "--set", "experiment.k_values=1.0",
               "--set", "experiment.fractions=0.5", "--out", tmp_path) == 0
    assert "first non-closing point" in capsys.readouterr().out


def test_svg_is_deterministic(tmp_path):
    args = ["simulate", "--config", CONFIGS / "kepler_simulate.ini", "--set", "experiment.t_end=5", "--plot"]
    run(*args, "--out", tmp_path / "a")
    run(*args, "--out", tmp_path / "b")
    assert (tmp_path / "a" / "orbit.svg").read_bytes() == (tmp_path / "b" / "orbit.svg").read_bytes()


def test_falsify_precondition_exit_code(tmp_path):
    assert run("falsify", "--set", "surface.family=sphere", "--out", tmp_path) == 1


def test_tannery_rejects_even_h(tmp_path):
    assert run("tannery", "--set", "surface.family=tannery", "--set", "surface.h_coeffs=0.1,0.3",
               "--out", tmp_path) == 1


def test_decompose_json(tmp_path):
    assert run("decompose", "--config", CONFIGS / "multi_equator_decompose.ini", "--set",
               "experiment.k_grid=0.1,1,10", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "decomposition.json").read_text())
    assert len(doc["equators"]) == 4 and len(doc["pieces"]) == 5 and doc["consistent"] is True


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[surface]\nfamily = sphere\nr = abc\n")
    assert run("decompose", "--config", bad, "--out", tmp_path) == 2
    bad.write_text("[surface]\nfamily = torus\n")
    assert run("decompose", "--config", bad, "--out", tmp_path) == 2
    bad.write_text("[geometry]\nfamily = sphere\n")
    assert run("decompose", "--config", bad, "--out", tmp_path) == 2
    assert run("decompose", "--set", "surface.family=sphere", "--set", "surface.colour=red",
               "--out", tmp_path) == 2
    assert run("decompose", "--set", "nonsense", "--out", tmp_path) == 2
    assert run("decompose", "--config", tmp_path / "missing.ini") == 2


def test_config_error_names_the_line(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[surface]\nfamily = sphere\n\nr = abc\n")
    run("decompose", "--config", bad, "--out", tmp_path)
    assert f"{bad}:4" in capsys.readouterr().err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_jobs_env_overrides_flag(monkeypatch):
    monkeypatch.setenv("BERTRAND_LAB_JOBS", "3")
    assert resolve_jobs(1) == 3
    monkeypatch.delenv("BERTRAND_LAB_JOBS")
    assert resolve_jobs(2) == 2
    assert resolve_jobs(None) == (os.cpu_count() or 1)
