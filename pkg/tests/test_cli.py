import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from chainflow.cli import main

SCENARIOS = Path(__file__).parent.parent / "scenarios"


def run_cli(*argv, capsys=None):
    code = main(list(argv))
    out = capsys.readouterr().out if capsys else ""
    return code, out


@pytest.fixture()
def happy_outputs(tmp_path, capsys):
    code, out = run_cli(
        "run", str(SCENARIOS / "happy_path.json"), "--out", str(tmp_path),
        capsys=capsys,
    )
    assert code == 0
    return tmp_path, out


def test_run_baseline_exit_zero_and_artifacts(happy_outputs):
    out_dir, stdout = happy_outputs
    report = json.loads(stdout)
    assert report["integrity_violations"] == 0
    assert (out_dir / "happy-path.report.json").exists()
    assert (out_dir / "happy-path.chain.cfs").exists()
    assert (out_dir / "happy-path.keys.json").exists()


def test_run_majority_scenario_exit_two(tmp_path, capsys):
    code, out = run_cli(
        "run", str(SCENARIOS / "majority_051.json"), "--out", str(tmp_path),
        capsys=capsys,
    )
    assert code == 2
    assert json.loads(out)["integrity_violations"] >= 1


def test_run_malformed_json_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", seed: }')
    code = main(["run", str(bad)])
    err = capsys.readouterr().err
    assert code == 1
    assert "line" in err and "column" in err


def test_run_schema_violation_exit_one(tmp_path, capsys):
    no_seed = json.loads((SCENARIOS / "happy_path.json").read_text())
    del no_seed["seed"]
    bad = tmp_path / "noseed.json"
    bad.write_text(json.dumps(no_seed))
    code = main(["run", str(bad), "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 1
    assert "seed" in err


def test_run_missing_file_exit_one(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.json")]) == 1


def test_rerun_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(SCENARIOS / "happy_path.json"), "--out", str(a)]) == 0
    assert main(["run", str(SCENARIOS / "happy_path.json"), "--out", str(b)]) == 0
    capsys.readouterr()
    for name in ("happy-path.report.json", "happy-path.chain.cfs"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_chainflow_out_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CHAINFLOW_OUT", str(tmp_path / "envout"))
    assert main(["run", str(SCENARIOS / "happy_path.json")]) == 0
    capsys.readouterr()
    assert (tmp_path / "envout" / "happy-path.report.json").exists()


def test_verify_valid_chain(happy_outputs, capsys):
    out_dir, _ = happy_outputs
    code, out = run_cli("verify", str(out_dir / "happy-path.chain.cfs"), capsys=capsys)
    assert code == 0
    assert json.loads(out)["valid"] is True


def test_verify_hex_edit_exit_two_with_index(happy_outputs, capsys):
    out_dir, _ = happy_outputs
    path = out_dir / "happy-path.chain.cfs"
    data = bytearray(path.read_bytes())
    context_len = int.from_bytes(data[4:8], "big")
    block_region = 8 + context_len
    data[block_region + 150] ^= 0x01
    tampered = out_dir / "tampered.cfs"
    tampered.write_bytes(bytes(data))
    code, out = run_cli("verify", str(tampered), capsys=capsys)
    assert code == 2
    verdict = json.loads(out)
    assert verdict["valid"] is False
    assert "first_failure" in verdict or "error" in verdict


def test_verify_truncated_exit_one(happy_outputs, capsys):
    out_dir, _ = happy_outputs
    path = out_dir / "happy-path.chain.cfs"
    truncated = out_dir / "truncated.cfs"
    truncated.write_bytes(path.read_bytes()[:-25])
    code = main(["verify", str(truncated)])
    err = capsys.readouterr().err
    assert code == 1
    assert "unexpected end of record" in err


def test_trace_final_barcode_seven_events(happy_outputs, capsys):
    out_dir, _ = happy_outputs
    code, out = run_cli(
        "trace", str(out_dir / "happy-path.chain.cfs"), "PKG-0001", capsys=capsys
    )
    assert code == 0
    trail = json.loads(out)
    assert len(trail["events"]) == 7
    assert trail["events"][0]["variant"] == "raw_material_shipment"


def test_trace_unknown_barcode_empty_exit_zero(happy_outputs, capsys):
    out_dir, _ = happy_outputs
    code, out = run_cli(
        "trace", str(out_dir / "happy-path.chain.cfs"), "NOPE", capsys=capsys
    )
    assert code == 0
    assert json.loads(out)["events"] == []


def test_trace_refuses_tampered_chain(happy_outputs, capsys):
    out_dir, _ = happy_outputs
    path = out_dir / "happy-path.chain.cfs"
    data = bytearray(path.read_bytes())
    data[-3] ^= 0xFF
    bad = out_dir / "bad.cfs"
    bad.write_bytes(bytes(data))
    code, _ = run_cli("trace", str(bad), "PKG-0001", capsys=capsys)
    assert code == 2


def test_trace_sealed_fields_redacted_then_revealed(tmp_path, capsys):
    assert main(["run", str(SCENARIOS / "sealed_fields.json"), "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    chain = tmp_path / "sealed-fields.chain.cfs"
    code, out = run_cli("trace", str(chain), "PKG-0001", capsys=capsys)
    assert code == 0
    raw_event = json.loads(out)["events"][0]
    assert "sealed_for" in raw_event["certificate_of_origin"]

    keys = tmp_path / "sealed-fields.keys.json"
    code, out = run_cli(
        "trace", str(chain), "PKG-0001", "--key", str(keys), capsys=capsys
    )
    assert code == 0
    revealed = json.loads(out)["events"][0]
    assert revealed["certificate_of_origin"] == "CO-OM-2031"


def test_report_summary_and_csv(happy_outputs, capsys):
    out_dir, _ = happy_outputs
    report_path = out_dir / "happy-path.report.json"
    code, out = run_cli("report", str(report_path), capsys=capsys)
    assert code == 0
    assert json.loads(out)["blocks_accepted"] == 13

    code, out = run_cli("report", str(report_path), "--csv", capsys=capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("step,blocks_accepted")
    assert len(lines) == 1 + 12  # header + one row per step


def test_sweep_duration(tmp_path, capsys):
    scenario = json.loads((SCENARIOS / "majority_051.json").read_text())
    scenario["nodes"] = {"count": 10, "degree": 4}
    scenario["attacks"][0]["controlled_fraction"] = 0.6
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(scenario))
    code, out = run_cli(
        "run", str(path), "--out", str(tmp_path), "--sweep",
        "attacks.0.duration_steps=1..3", capsys=capsys,
    )
    assert code == 2  # violations recorded across the sweep
    rows = json.loads(out)
    costs = [row["attack_cost"] for row in rows]
    assert [row["value"] for row in rows] == [1, 2, 3]
    assert costs == sorted(costs) and costs[0] < costs[-1]


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("chainflow")
    assert exe, "console script not installed"
    proc = subprocess.run(
        [exe, "run", str(SCENARIOS / "happy_path.json"), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    json.loads(proc.stdout)  # stdout is valid JSON
