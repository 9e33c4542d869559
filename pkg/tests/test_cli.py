"""Exit codes, file outputs, schemas, and determinism of the command line."""

import csv
import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from kgtorus.cli import main


def run_cli(args, capsys=None):
    code = main([str(a) for a in args])
    if capsys is None:
        return code, "", ""
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_schema(name):
    path = resources.files("kgtorus").joinpath("schemas", name)
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def b3_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("b3")
    assert main(["select", "--d", "1", "--b", "3", "--p", "2", "--bound", "10",
                 "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def pell_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("pell")
    assert main(["select", "--d", "1", "--b", "1", "--p", "2", "--bound", "1",
                 "--out", str(d)]) == 0
    return d


def solve_config(tmp_path, basis_file, **overrides):
    cfg = {
        "basis_file": str(basis_file),
        "delta": 1e-2,
        "a": [0.008, -0.006, 0.007],
        "r_max": 0,
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path


# ---------------------------------------------------------------------------
# select

def test_select_writes_verified_basis(b3_dir):
    obj = json.loads((b3_dir / "basis.json").read_text())
    jsonschema.validate(obj, read_schema("basis.schema.json"))
    assert obj["radicands"] == [2, 10, 17]
    assert obj["verified"] == {"i": True, "ii": True, "iii": True}


def test_select_exhaustion_exits_2(tmp_path):
    code = main(["select", "--d", "1", "--b", "2", "--bound", "1",
                 "--out", str(tmp_path)])
    assert code == 2
    assert not (tmp_path / "basis.json").exists()


def test_select_same_seed_identical_file(tmp_path):
    args = ["select", "--d", "1", "--b", "3", "--p", "2", "--bound", "6",
            "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "one")]) == 0
    assert main(args + ["--out", str(tmp_path / "two")]) == 0
    one = (tmp_path / "one" / "basis.json").read_bytes()
    two = (tmp_path / "two" / "basis.json").read_bytes()
    assert one == two


# ---------------------------------------------------------------------------
# verify

def test_verify_selected_basis_passes(b3_dir, tmp_path, capsys):
    code, out, _ = run_cli(["verify", b3_dir / "basis.json", "--out", tmp_path],
                           capsys)
    assert code == 0
    assert "verified" in out
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert report["ok"]
    assert set(report["conditions"]) == {"i", "ii", "iii"}


def test_verify_tampered_basis_names_condition_ii(tmp_path, capsys):
    # radicands (2, 50): 50 = 2 * 5^2 is not square-free
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(
        {"d": 1, "b": 2, "p": 2, "modes": [[1], [7]], "radicands": [2, 50]}
    ))
    code, _, err = run_cli(["verify", tampered, "--out", tmp_path], capsys)
    assert code == 1
    assert "(ii)" in err
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert not report["conditions"]["ii"]["ok"]


def test_verify_radicand_mismatch_is_bad_input(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(
        {"d": 1, "b": 2, "p": 2, "modes": [[1], [2]], "radicands": [2, 50]}
    ))
    code, _, err = run_cli(["verify", broken, "--out", tmp_path], capsys)
    assert code == 3
    assert "disagree" in err


def test_verify_missing_file_is_bad_input(tmp_path):
    assert main(["verify", str(tmp_path / "none.json")]) == 3


# ---------------------------------------------------------------------------
# characteristics

def test_characteristics_pell_case_three_positive_clusters(pell_dir, tmp_path):
    code = main(["characteristics", str(pell_dir / "basis.json"),
                 "--boxN", "50", "--out", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "characteristics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    positive = [r for r in rows if r["positive"] == "1"]
    assert len(positive) == 3
    assert {r["members"] for r in positive} == {"(1,1)", "(5,7)", "(29,41)"}
    exceptional = [r for r in rows if r["exceptional_S"] == "1"]
    assert len(exceptional) == 1
    assert exceptional[0]["size"] == "2"


def test_characteristics_zoo_levels_respect_bounds(pell_dir, tmp_path):
    code = main(["characteristics", str(pell_dir / "basis.json"),
                 "--boxN", "20", "--zoo", "4", "--jobs", "2",
                 "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "characteristics.json").read_text())
    assert report["ok"]
    assert len(report["levels"]) == 4
    for level in report["levels"]:
        assert level["max_cluster"] <= level["bound"]


def test_characteristics_unverified_basis_fails(tmp_path, capsys):
    raw = tmp_path / "raw.json"
    raw.write_text(json.dumps({"d": 1, "b": 1, "p": 2, "modes": [[1]]}))
    code, _, err = run_cli(
        ["characteristics", raw, "--boxN", "10", "--out", tmp_path], capsys
    )
    assert code == 1
    assert "verif" in err


# ---------------------------------------------------------------------------
# solve

def test_solve_r_max_zero_single_record(b3_dir, tmp_path):
    cfg = solve_config(tmp_path, b3_dir / "basis.json", r_max=0)
    code = main(["solve", str(cfg), "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "trace.jsonl").read_text().strip().splitlines()
    assert len(lines) == 1
    rec = json.loads(lines[0])
    assert rec["kind"] == "step" and rec["r"] == 0 and rec["accepted"]
    solution = json.loads((tmp_path / "solution.json").read_text())
    assert solution["success"]
    assert solution["support"] == 3
    schema = read_schema("trace_record.schema.json")
    jsonschema.validate(rec, schema)


def test_solve_trace_csv_has_header_and_step(b3_dir, tmp_path):
    cfg = solve_config(tmp_path, b3_dir / "basis.json", r_max=0)
    assert main(["solve", str(cfg), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "trace.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["r", "N", "N_active", "accepted"]
    assert "omega_1" in rows[0] and "omega_3" in rows[0]
    assert len(rows) == 2


def test_solve_is_deterministic(b3_dir, tmp_path):
    cfg = solve_config(tmp_path, b3_dir / "basis.json", r_max=0)
    assert main(["solve", str(cfg), "--out", str(tmp_path / "one")]) == 0
    assert main(["solve", str(cfg), "--out", str(tmp_path / "two")]) == 0
    for name in ("trace.jsonl", "trace.csv", "solution.json"):
        assert (tmp_path / "one" / name).read_bytes() == \
            (tmp_path / "two" / name).read_bytes()


def test_solve_schema_violation_reports_line(b3_dir, tmp_path, capsys):
    cfg = solve_config(tmp_path, b3_dir / "basis.json", delta=3.0)
    code, _, err = run_cli(["solve", cfg, "--out", tmp_path], capsys)
    assert code == 3
    assert "delta" in err and "line" in err


def test_solve_unknown_key_is_bad_input(b3_dir, tmp_path, capsys):
    cfg = solve_config(tmp_path, b3_dir / "basis.json", r_mx=1)
    code, _, err = run_cli(["solve", cfg, "--out", tmp_path], capsys)
    assert code == 3
    assert "r_mx" in err


def test_solve_invalid_json_reports_position(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    cfg.write_text('{"delta": 0.01,\n  "a": [0.008,]\n}')
    code, _, err = run_cli(["solve", cfg, "--out", tmp_path], capsys)
    assert code == 3
    assert "line 2" in err


def test_solve_amplitude_count_mismatch(pell_dir, tmp_path, capsys):
    cfg = solve_config(tmp_path, pell_dir / "basis.json")  # 3 amps, b=1
    code, _, err = run_cli(["solve", cfg, "--out", tmp_path], capsys)
    assert code == 3
    assert "amplitudes" in err


# ---------------------------------------------------------------------------
# report

def test_report_summarizes_trace(b3_dir, tmp_path):
    cfg = solve_config(tmp_path, b3_dir / "basis.json", r_max=0)
    assert main(["solve", str(cfg), "--out", str(tmp_path)]) == 0
    code = main(["report", str(tmp_path / "trace.jsonl"),
                 "--out", str(tmp_path / "rep")])
    assert code == 0
    text = (tmp_path / "rep" / "report.txt").read_text()
    assert "final accepted step r=0" in text
    assert "omega" in text
    # the CSV summary reproduces the solve's own CSV exactly
    assert (tmp_path / "rep" / "summary.csv").read_bytes() == \
        (tmp_path / "trace.csv").read_bytes()


def test_report_rejects_malformed_trace(tmp_path, capsys):
    bad = tmp_path / "trace.jsonl"
    bad.write_text('{"kind": "step", "r": 0}\n')
    code, _, err = run_cli(["report", bad, "--out", tmp_path], capsys)
    assert code == 3
    assert "line 1" in err


# ---------------------------------------------------------------------------
# sweep-theta

def test_sweep_theta_bad_fraction_decays(pell_dir, tmp_path):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({
        "basis_file": str(pell_dir / "basis.json"),
        "delta": 1e-2,
        "a": [0.007],
        "Ns": [6, 8, 10],
        "theta": {"min": -0.5, "max": 0.5, "count": 201},
        "sigma": 0.8,
    }))
    code = main(["sweep-theta", str(cfg), "--assert-decay",
                 "--jobs", "2", "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "sweep_report.json").read_text())
    fracs = report["bad_fractions"]
    assert report["strictly_decreasing"]
    assert fracs[0] > fracs[1] > fracs[2] > 0
    with open(tmp_path / "sweep.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["N", "theta", "bad"]
    assert len(rows) == 1 + 3 * 201


def test_sweep_theta_from_solution_file(pell_dir, tmp_path):
    cfg = tmp_path / "solve.json"
    cfg.write_text(json.dumps({
        "basis_file": str(pell_dir / "basis.json"),
        "delta": 1e-2, "a": [0.007], "r_max": 1,
    }))
    assert main(["solve", str(cfg), "--out", str(tmp_path)]) == 0
    sweep = tmp_path / "sweep.json"
    sweep.write_text(json.dumps({
        "basis_file": str(pell_dir / "basis.json"),
        "delta": 1e-2,
        "solution_file": str(tmp_path / "solution.json"),
        "N": 6,
        "theta": {"min": -0.3, "max": 0.3, "count": 31},
    }))
    code = main(["sweep-theta", str(sweep), "--out", str(tmp_path / "sw")])
    assert code == 0
    report = json.loads((tmp_path / "sw" / "sweep_report.json").read_text())
    assert len(report["levels"]) == 1
    assert report["levels"][0]["N"] == 6


def test_sweep_theta_requires_box_size(pell_dir, tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({
        "basis_file": str(pell_dir / "basis.json"),
        "delta": 1e-2, "a": [0.007],
        "theta": {"min": -0.1, "max": 0.1, "count": 11},
    }))
    code, _, err = run_cli(["sweep-theta", cfg, "--out", tmp_path], capsys)
    assert code == 3
    assert "N" in err


# ---------------------------------------------------------------------------
# manifests, output locations, entry point

def test_manifest_lists_every_output(b3_dir, tmp_path):
    cfg = solve_config(tmp_path, b3_dir / "basis.json", r_max=0)
    assert main(["solve", str(cfg), "--out", str(tmp_path / "run")]) == 0
    manifest = json.loads((tmp_path / "run" / "solve_manifest.json").read_text())
    jsonschema.validate(manifest, read_schema("manifest.schema.json"))
    produced = sorted(p.name for p in (tmp_path / "run").iterdir())
    assert manifest["outputs"] == produced
    assert str(cfg) in manifest["inputs"]
    assert manifest["config"]["delta"] == 1e-2
    assert set(manifest["versions"]) >= {"kgtorus", "python", "numpy", "scipy"}


def test_env_var_selects_output_dir(tmp_path, monkeypatch):
    target = tmp_path / "envout"
    monkeypatch.setenv("KGTORUS_OUT", str(target))
    assert main(["select", "--d", "1", "--b", "1", "--p", "2", "--bound", "1"]) == 0
    assert (target / "basis.json").exists()


def test_out_flag_overrides_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("KGTORUS_OUT", str(tmp_path / "ignored"))
    assert main(["select", "--d", "1", "--b", "1", "--p", "2", "--bound", "1",
                 "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "basis.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_no_subcommand_is_bad_input():
    assert main([]) == 3


def test_unknown_flag_is_bad_input():
    assert main(["select", "--d", "1", "--b", "1", "--bound", "1",
                 "--frobnicate"]) == 3


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-c",
         "from kgtorus.cli import main; raise SystemExit(main(['--version']))"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "kgtorus" in proc.stdout
