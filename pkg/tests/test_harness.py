import sys
import os
# Ensure project root is on sys.path for tests
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import json

import pytest
from pydantic import ValidationError

from src.harness import (
    LabHarness,
    Report,
    Scenario,
    ScenarioConfig,
    rate_summary,
    validate_report,
    wilson_interval,
)
from src.reconcile import Backend

TOY = "toy-n64-q257"


def _config(seed_hex, **overrides):
    values = dict(scenario=Scenario.HONEST, trials=12, param=TOY, seed=seed_hex)
    values.update(overrides)
    return ScenarioConfig(**values)


def _run(cfg, **kwargs):
    return LabHarness(cfg, show_progress_bar=False, **kwargs).run()


# ============================================================================
# Configuration
# ============================================================================

def test_scenario_config_defaults(seed_hex):
    cfg = ScenarioConfig(scenario=Scenario.BACKDOOR, seed=seed_hex)
    assert cfg.trials == 1000
    assert cfg.param == "newhope1024"
    assert cfg.backend is Backend.PEIKERT
    assert cfg.weight == 2 and cfg.ttl == 5 and cfg.workers == 1
    assert cfg.trapdoor_prime == 67


def test_seed_normalization():
    assert ScenarioConfig(scenario="honest", seed=42).seed == "0" * 62 + "2a"
    assert len(ScenarioConfig(scenario="honest").seed) == 64
    with pytest.raises(ValidationError):
        ScenarioConfig(scenario="honest", seed="xyz")


def test_param_accepts_wire_id(seed_hex):
    assert ScenarioConfig(scenario="honest", param="7", seed=seed_hex).param == TOY


@pytest.mark.parametrize("overrides", [
    {"param": "newhope4096"},
    {"param": "toy-n2-q17", "backend": "d4"},
    {"p": 4},
    {"p": 257},
    {"p": 3},
    {"weight": 65},
    {"trials": 0},
    {"workers": 0},
    {"colour": "blue"},
    {"scenario": "sweep", "weights": [2, 96]},
])
def test_scenario_config_rejects(seed_hex, overrides):
    with pytest.raises(ValidationError):
        _config(seed_hex, **overrides)


def test_list_fields_accept_comma_text(seed_hex):
    cfg = _config(seed_hex, scenario="sweep", weights="1, 2,4", p_values="5;7", k_values="1")
    assert cfg.weights == [1, 2, 4]
    assert cfg.p_values == [5, 7]


# ============================================================================
# Statistics
# ============================================================================

def test_wilson_interval():
    assert wilson_interval(0, 0) == (0.0, 1.0)
    low, high = wilson_interval(1000, 1000)
    assert high == pytest.approx(1.0)
    assert 0.99 < low < 1.0
    low, high = wilson_interval(50, 100)
    assert low < 0.5 < high
    assert low == pytest.approx(0.4038, abs=1e-3)


def test_rate_summary():
    summary = rate_summary([True, True, False, True])
    assert (summary.successes, summary.count, summary.rate) == (3, 4, 0.75)
    assert summary.ci_low < 0.75 < summary.ci_high
    assert rate_summary([]).rate == 0.0


# ============================================================================
# Scenarios on the toy ring
# ============================================================================

def test_honest_batch(seed_hex):
    report = _run(_config(seed_hex))
    assert report.scenario is Scenario.HONEST
    assert report.aggregates["agreement"].count == 12
    assert [r.trial for r in report.records] == list(range(12))
    assert report.metrics["disagreements_within_guaranteed_gap"] == 0
    assert report.metrics["guaranteed_noise_gap"] == 30
    assert "workers" not in report.config


def test_honest_batch_d4_agrees(seed_hex):
    report = _run(_config(seed_hex, backend="d4"))
    assert report.aggregates["agreement"].rate == 1.0


def test_backdoor_batch(seed_hex):
    report = _run(_config(seed_hex, scenario="backdoor"))
    for name in ("recovery", "attacker_key_equal", "exact_bound_held"):
        assert report.aggregates[name].rate == 1.0, name
    assert report.metrics["worst_case_bound"] == 22
    assert report.metrics["recovery_guaranteed"] is True
    assert report.metrics["overflow_trials"] == 0
    assert all(r.guarantee == "guaranteed" for r in report.records)
    assert 0.0 <= report.metrics["mean_generator_uniformity_p_value"] <= 1.0


def test_uniform_control_batch(seed_hex):
    report = _run(_config(seed_hex, scenario="uniform_control"))
    assert report.aggregates["recovery"].successes == 0
    assert report.aggregates["attacker_key_equal"].count == 12
    assert report.metrics["disagreements_within_guaranteed_gap"] == 0
    # A secret recovered through the wrong trapdoor yields a key that is no better than a coin toss.
    assert report.aggregates["attacker_key_equal"].successes == 0
    assert any(r.attacker_key_bit_error_rate is not None for r in report.records)
    assert 0.35 <= report.metrics["mean_attacker_key_bit_error_rate"] <= 0.65


def test_cached_generator_windows(seed_hex):
    report = _run(_config(seed_hex, scenario="cached_a", trials=12, ttl=4))
    windows = report.windows
    assert [w.window for w in windows] == [0, 1, 2]
    assert [w.sessions for w in windows] == [4, 4, 4]
    assert windows[0].trapdoored and windows[0].recovery.rate == 1.0
    assert not windows[1].trapdoored and windows[1].recovery.successes == 0
    assert report.aggregates["recovery_trapdoored_window"].count == 4
    assert report.metrics == {"ttl": 4, "rotations": 2}


def test_mitm_learns_both_half_keys(seed_hex):
    report = _run(_config(seed_hex, scenario="mitm", backend="d4"))
    assert report.aggregates["oscar_knows_alice_key"].rate == 1.0
    assert report.aggregates["oscar_knows_bob_key"].rate == 1.0
    assert report.aggregates["bob_secret_recovered"].rate == 1.0
    assert report.aggregates["alice_bob_keys_differ"].successes >= 11


def test_sweep_rows(seed_hex):
    cfg = _config(seed_hex, scenario="sweep", trials=4, weights=[1, 2], p_values=[5, 7], k_values=[1])
    report = _run(cfg)
    assert report.metrics["grid_size"] == 4
    rows = [(r.k, r.p, r.weight, r.worst_case_bound) for r in report.sweep]
    assert rows == [(1, 5, 1, 12), (1, 5, 2, 22), (1, 7, 1, 16), (1, 7, 2, 30)]
    assert [r.param for r in report.sweep] == [TOY, TOY, f"{TOY}-p7", f"{TOY}-p7"]
    assert all(r.guaranteed and r.recovery.rate == 1.0 for r in report.sweep)


def test_sweep_marks_probabilistic_rows(seed_hex):
    cfg = _config(seed_hex, scenario="sweep", trials=2, weights=[16], p_values=[7], k_values=[1])
    row = _run(cfg).sweep[0]
    # 2 + 7*2*16 = 226, twice that exceeds q = 257
    assert row.worst_case_bound == 226
    assert not row.guaranteed


def test_sweep_recovery_falls_with_weight(seed_hex):
    # p = 7 on the toy ring: weights 2 and 8 are guaranteed, 16 and up are not.
    cfg = _config(seed_hex, scenario="sweep", trials=20, weights=[2, 8, 16, 32, 64], p_values=[7], k_values=[1])
    rows = _run(cfg).sweep
    assert [r.guaranteed for r in rows] == [True, True, False, False, False]
    assert rows[0].recovery.rate == rows[1].recovery.rate == 1.0
    for heavier, lighter in zip(rows[1:], rows):
        assert heavier.recovery.rate <= lighter.recovery.ci_high, (heavier.weight, lighter.weight)
    assert rows[-1].recovery.rate < 1.0


# ============================================================================
# Reports
# ============================================================================

@pytest.mark.parametrize("scenario", ["honest", "backdoor", "uniform_control", "cached_a", "mitm"])
def test_reports_match_schema(seed_hex, scenario):
    report = _run(_config(seed_hex, scenario=scenario, trials=4, ttl=2))
    is_valid, error = validate_report(report.to_dict())
    assert is_valid, error


def test_schema_rejects_bad_reports(seed_hex):
    data = _run(_config(seed_hex, trials=2)).to_dict()
    data["records"][0]["agreed"] = "yes"
    is_valid, error = validate_report(data)
    assert not is_valid and error.startswith("records/0/agreed")
    assert validate_report({}, "missing")[0] is False


def test_same_seed_same_report(seed_hex):
    first = _run(_config(seed_hex, scenario="backdoor", trials=6)).deterministic_json()
    second = _run(_config(seed_hex, scenario="backdoor", trials=6)).deterministic_json()
    assert first == second
    assert "wall_clock_seconds" not in json.loads(first)


def test_parallel_workers_match_sequential(seed_hex):
    sequential = _run(_config(seed_hex, scenario="backdoor", trials=6)).deterministic_json()
    parallel = _run(_config(seed_hex, scenario="backdoor", trials=6, workers=2)).deterministic_json()
    assert sequential == parallel


def test_different_seeds_differ(seed_hex):
    first = _run(_config(seed_hex, trials=3)).deterministic_json()
    second = _run(_config("11" * 32, trials=3)).deterministic_json()
    assert first != second


def test_report_save(seed_hex, results_dir):
    report = _run(_config(seed_hex, trials=2))
    path = report.save(str(results_dir / "test_harness_report.json"))
    assert Report(**json.loads(open(path).read())).scenario is Scenario.HONEST


def test_progress_callback_receives_messages(seed_hex):
    messages = []
    LabHarness(_config(seed_hex, trials=2), progress_callback=messages.append, show_progress_bar=False).run()
    assert messages[0].startswith("▶ honest")
    assert messages[-1].startswith("✓ honest")
