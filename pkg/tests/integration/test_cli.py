"""Integration tests for the nhlab.py command line.

Runs the subcommands in-process through ``main`` and checks exit codes and
the JSON artifacts they write. One test goes through a real subprocess.
"""
import sys
import os
# Ensure project root is on sys.path for tests
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

import json
import subprocess
from pathlib import Path

import pytest

import nhlab
from src.harness import validate_report

pytestmark = pytest.mark.integration

ROOT_DIR = Path(__file__).parent.parent.parent
TOY = "toy-n64-q257"
SEED = "00" * 31 + "2a"


def _toy_args(command, *extra):
    return [command, "--param", TOY, "--trials", "5", "--seed", SEED, "--quiet", *extra]


# ============================================================================
# Scenario subcommands
# ============================================================================

def test_exchange_writes_report(results_dir):
    out = results_dir / "integration_exchange.json"
    assert nhlab.main(_toy_args("exchange", "--out", str(out))) == nhlab.EXIT_OK
    data = json.loads(out.read_text())
    assert validate_report(data) == (True, None)
    assert data["config"]["seed"] == SEED
    assert data["aggregates"]["agreement"]["count"] == 5


def test_exchange_prints_to_stdout(capsys):
    assert nhlab.main(_toy_args("exchange", "--backend", "d4")) == nhlab.EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["scenario"] == "honest"
    assert data["aggregates"]["agreement"]["rate"] == 1.0


def test_exchange_transcript_out(results_dir):
    transcript = results_dir / "integration_transcript.json"
    out = results_dir / "integration_exchange_t.json"
    assert nhlab.main(_toy_args("exchange", "--out", str(out), "--transcript-out", str(transcript))) == 0
    is_valid, error = validate_report(json.loads(transcript.read_text()), "transcript")
    assert is_valid, error


def test_backdoor_export_then_recover(results_dir):
    export_dir = results_dir / "test_export_cli"
    out = results_dir / "integration_backdoor.json"
    args = _toy_args("backdoor", "--out", str(out), "--export-dir", str(export_dir))
    assert nhlab.main(args) == nhlab.EXIT_OK
    assert json.loads(out.read_text())["aggregates"]["recovery"]["rate"] == 1.0

    result = results_dir / "integration_recover.json"
    assert nhlab.main([
        "recover",
        "--transcript", str(export_dir / "transcript.json"),
        "--trapdoor", str(export_dir / "trapdoor.json"),
        "--out", str(result),
        "--quiet",
    ]) == nhlab.EXIT_OK
    data = json.loads(result.read_text())
    assert data["recovered"] is True
    assert data["matches_alice_key"] is True
    assert data["overflow"] is False


def test_recover_with_honest_transcript_is_rejected(results_dir):
    export_dir = results_dir / "test_export_foreign"
    transcript = results_dir / "integration_honest_transcript.json"
    assert nhlab.main(_toy_args("exchange", "--out", str(results_dir / "integration_h.json"),
                                "--transcript-out", str(transcript))) == 0
    assert nhlab.main(_toy_args("backdoor", "--out", str(results_dir / "integration_b.json"),
                                "--export-dir", str(export_dir))) == 0
    code = nhlab.main(["recover", "--transcript", str(transcript),
                       "--trapdoor", str(export_dir / "trapdoor.json"), "--quiet"])
    assert code == nhlab.EXIT_CONFIG


def test_sweep_and_cached_subcommands(results_dir):
    sweep = results_dir / "integration_sweep.json"
    assert nhlab.main(_toy_args("sweep", "--weights", "1,2", "--p-values", "5", "--k-values", "1",
                                "--out", str(sweep))) == 0
    assert [row["worst_case_bound"] for row in json.loads(sweep.read_text())["sweep"]] == [12, 22]

    cached = results_dir / "integration_cached.json"
    assert nhlab.main(_toy_args("cached", "--ttl", "5", "--out", str(cached))) == 0
    assert json.loads(cached.read_text())["metrics"]["rotations"] == 0


def test_config_file_and_environment_seed(results_dir, tmp_path, monkeypatch):
    conf = tmp_path / "lab.conf"
    conf.write_text(f"param = {TOY}\ntrials = 3\nbackend = d4\n")
    monkeypatch.setenv("NHLAB_SEED", "ab" * 32)
    out = results_dir / "integration_config.json"
    assert nhlab.main(["exchange", "--config", str(conf), "--out", str(out), "--quiet"]) == 0
    data = json.loads(out.read_text())
    assert data["config"]["seed"] == "ab" * 32
    assert data["config"]["backend"] == "d4"
    assert data["aggregates"]["agreement"]["count"] == 3


# ============================================================================
# decode-d4
# ============================================================================

def test_decode_d4_prints_region(capsys):
    assert nhlab.main(["decode-d4", "1/2 1/2 0 0"]) == nhlab.EXIT_OK
    output = capsys.readouterr().out
    assert "boundary" in output


def test_decode_d4_json(results_dir):
    out = results_dir / "integration_d4.json"
    assert nhlab.main(["decode-d4", "0.6, 0.2, 0.1, 0", "--out", str(out), "--quiet"]) == 0
    data = json.loads(out.read_text())
    assert data["region"] == "inside"


# ============================================================================
# Exit codes
# ============================================================================

@pytest.mark.parametrize("extra", [
    ["--trials", "0"],
    ["--param", "newhope4096"],
    ["--param", "toy-n2-q17", "--backend", "d4"],
    ["--p", "4"],
])
def test_configuration_errors_exit_2(extra):
    assert nhlab.main(["exchange", "--seed", SEED, "--quiet", *extra]) == nhlab.EXIT_CONFIG


def test_missing_config_file_exits_2(tmp_path):
    assert nhlab.main(["exchange", "--config", str(tmp_path / "none.conf"), "--quiet"]) == nhlab.EXIT_CONFIG


def test_bad_backend_choice_is_argparse_error():
    with pytest.raises(SystemExit) as excinfo:
        nhlab.main(["exchange", "--backend", "lattice"])
    assert excinfo.value.code == 2


def test_malformed_transcript_exits_3(tmp_path):
    transcript = tmp_path / "transcript.json"
    transcript.write_text("{not json")
    trapdoor = tmp_path / "trapdoor.json"
    trapdoor.write_text("{}")
    code = nhlab.main(["recover", "--transcript", str(transcript), "--trapdoor", str(trapdoor), "--quiet"])
    assert code == nhlab.EXIT_DECODE


def test_transcript_failing_schema_exits_3(tmp_path):
    transcript = tmp_path / "transcript.json"
    transcript.write_text(json.dumps({"msg1_hex": "00"}))
    code = nhlab.main(["recover", "--transcript", str(transcript), "--trapdoor", str(transcript), "--quiet"])
    assert code == nhlab.EXIT_DECODE


def test_bad_d4_point_exits_2():
    assert nhlab.main(["decode-d4", "1 2 3", "--quiet"]) == nhlab.EXIT_CONFIG


@pytest.mark.slow
def test_verify_claims_failure_exits_4(results_dir):
    # weight 16 with p = 7 is outside the guaranteed regime on the toy ring
    args = _toy_args("verify-claims", "--weight", "16", "--p", "7",
                     "--out", str(results_dir / "integration_claims_fail.json"))
    assert nhlab.main(args) == nhlab.EXIT_CLAIM


# ============================================================================
# Subprocess
# ============================================================================

def test_cli_subprocess_decode_d4():
    result = subprocess.run(
        [sys.executable, str(ROOT_DIR / "nhlab.py"), "decode-d4", "1.4, 0, 0, 0"],
        cwd=str(ROOT_DIR), capture_output=True, text=True, timeout=120,
    )
    assert result.returncode == 0, result.stderr
    assert "Decoded:" in result.stdout
