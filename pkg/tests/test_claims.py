import sys
import os
# Ensure project root is on sys.path for tests
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import pytest

from src.claims import (
    CLAIM_CHECKS,
    EXCLUDED_CLAIMS,
    check_algebraic_identities,
    check_d4_oracle,
    check_guaranteed_recovery,
    check_honest_agreement,
    check_pseudo_inverse,
    check_reconciliation_tolerance,
    check_scenario_semantics,
    check_uniform_control,
    require_passed,
)
from src.errors import ClaimFailure
from src.harness import ClaimResult, LabHarness, Report, Scenario, ScenarioConfig


@pytest.fixture
def toy_cfg(seed_hex):
    return ScenarioConfig(scenario=Scenario.VERIFY_CLAIMS, trials=10, param="toy-n64-q257", ttl=3, seed=seed_hex)


@pytest.fixture
def harness(toy_cfg):
    return LabHarness(toy_cfg, show_progress_bar=False)


@pytest.mark.parametrize("check", [
    check_honest_agreement,
    check_guaranteed_recovery,
    check_uniform_control,
    check_reconciliation_tolerance,
    check_algebraic_identities,
    check_pseudo_inverse,
    check_scenario_semantics,
])
def test_claim_holds_on_toy_ring(check, toy_cfg, harness):
    result = check(toy_cfg, harness)
    assert result.passed, result.detail


def test_reconciliation_tolerance_reports_exact_value(toy_cfg, harness):
    result = check_reconciliation_tolerance(toy_cfg, harness)
    assert result.measured["tolerance"] == 63
    assert result.measured["failures"] == 0


def test_uniform_control_claim_reports_guessed_key_quality(toy_cfg, harness):
    result = check_uniform_control(toy_cfg, harness)
    assert result.measured["attacker_key_equal"]["successes"] == 0
    assert 0.35 <= result.measured["mean_attacker_key_bit_error_rate"] <= 0.65


def test_d4_oracle_claim(toy_cfg, harness):
    result = check_d4_oracle(toy_cfg, harness)
    assert result.passed, result.detail
    assert result.measured["relevant_vectors"] == 24


def test_guaranteed_recovery_fails_outside_bound(seed_hex):
    cfg = ScenarioConfig(scenario=Scenario.VERIFY_CLAIMS, trials=3, param="toy-n64-q257", weight=16, p=7,
                         seed=seed_hex)
    result = check_guaranteed_recovery(cfg, LabHarness(cfg, show_progress_bar=False))
    assert not result.passed
    assert result.measured["worst_case_bound"] == 226


def test_every_check_is_registered():
    assert len(CLAIM_CHECKS) == 9
    assert len({check.__name__ for check in CLAIM_CHECKS}) == 9


def test_excluded_claims_have_reasons():
    assert len(EXCLUDED_CLAIMS) == 5
    assert all(item.reason for item in EXCLUDED_CLAIMS)


def test_require_passed_names_first_failure():
    report = Report(
        scenario=Scenario.VERIFY_CLAIMS,
        config={},
        claims=[
            ClaimResult(claim_id="ok", description="", passed=True, detail="fine"),
            ClaimResult(claim_id="broken", description="", passed=False, detail="1 mismatch"),
        ],
        passed=False,
    )
    with pytest.raises(ClaimFailure) as excinfo:
        require_passed(report)
    assert excinfo.value.claim_id == "broken"
    require_passed(Report(scenario=Scenario.VERIFY_CLAIMS, config={}, claims=[], passed=True))
