"""Claim-by-claim verification of the lab's acceptance properties.

Each check returns a ``ClaimResult``; ``verify_claims`` bundles them into one
report whose ``passed`` flag is the conjunction. Claims that cannot be turned
into computation are listed under ``excluded_claims`` with the reason.
"""
import logging
import time
from typing import Callable, List, Optional

import numpy as np

from src.backdoor import (
    DecompositionInstance,
    PseudoInverseWitness,
    decomposition_check,
    pseudo_inverse_check,
    pseudo_inverse_find,
    recover_s,
    worst_case_bound,
)
from src.errors import ClaimFailure
from src.harness import (
    ClaimResult,
    ExcludedClaim,
    LabHarness,
    Report,
    Scenario,
    ScenarioConfig,
)
from src.params_ring import (
    CenteredPoly,
    CyclicRingElement,
    RingElement,
    get_param_set,
    ntt_mul,
    ring_mul,
)
from src.protocol import run_session
from src.reconcile import (
    Backend,
    RationalPoint4,
    VoronoiRegion,
    cross_bit,
    d4_decode,
    d4_nearest_bruteforce,
    rec_bit,
    round_bit,
    scan_rec_tolerance,
    voronoi_contains,
    voronoi_relevant_vectors,
)
from src.sampling import SeededRng, sample_uniform_ring

logger = logging.getLogger(__name__)

RANDOM_REC_SAMPLES = 1_000_000
D4_ORACLE_POINTS = 10_000
D4_MAX_DENOMINATOR = 64
IDENTITY_SESSIONS = 100
NTT_PAIRS = 100
PSEUDO_INVERSE_TRIALS = 1000
DETERMINISM_TRIALS = 20
# A key guessed from a wrong secret should miss about half its bits.
GUESSED_KEY_ERROR_BAND = (0.35, 0.65)

# Claim-specific rng streams, far from the trial streams.
_STREAM_BASE = 1 << 62

EXCLUDED_CLAIMS = [
    ExcludedClaim(
        claim="Indefinite integral of the key relation with respect to the generator",
        reason="Integration has no meaning over Z_q; nothing to compute.",
    ),
    ExcludedClaim(
        claim="Characteristic-two rewriting of the key relation (e = as/b, -2s = 0)",
        reason="Presupposes an even modulus; q = 12289 is an odd prime.",
    ),
    ExcludedClaim(
        claim="Substitutions through symbols that are never defined",
        reason="Without definitions the substitutions cannot be reproduced.",
    ),
    ExcludedClaim(
        claim="Internals of the decomposition oracle's query set",
        reason="The set and its weight parameter are not specified; only the t = h*v + w predicate is checked.",
    ),
    ExcludedClaim(
        claim="Difficulty of exploiting a cached generator in practice",
        reason="Qualitative; the cached_a scenario measures the ttl exposure window only.",
    ),
]


def _sub_config(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    values = cfg.model_dump()
    values.update(changes)
    return ScenarioConfig(**values)


def _claim_rng(cfg: ScenarioConfig, claim_index: int) -> SeededRng:
    return SeededRng(cfg.seed, stream_index=_STREAM_BASE + claim_index)


def check_honest_agreement(cfg: ScenarioConfig, harness: LabHarness) -> ClaimResult:
    peikert = LabHarness(_sub_config(cfg, scenario=Scenario.HONEST, backend=Backend.PEIKERT),
                         harness.verbose, harness.progress_callback, harness.show_progress_bar).run_honest_batch()
    d4 = LabHarness(_sub_config(cfg, scenario=Scenario.HONEST, backend=Backend.D4),
                    harness.verbose, harness.progress_callback, harness.show_progress_bar).run_honest_batch()
    peikert_bad = peikert.metrics["disagreements_within_guaranteed_gap"]
    d4_bad = d4.metrics["disagreements_within_guaranteed_gap"]
    d4_rate = d4.aggregates["agreement"].rate
    passed = peikert_bad == 0 and d4_bad == 0 and d4_rate == 1.0
    return ClaimResult(
        claim_id="honest_agreement",
        description="Honest sessions agree: always within the proved noise gap, always on the D4 backend",
        passed=passed,
        detail=(f"peikert rate {peikert.aggregates['agreement'].rate} "
                f"({peikert_bad} disagreements within gap), d4 rate {d4_rate}"),
        measured={
            "peikert_agreement": peikert.aggregates["agreement"].model_dump(),
            "peikert_max_noise_gap": peikert.metrics["max_noise_gap"],
            "peikert_guaranteed_noise_gap": peikert.metrics["guaranteed_noise_gap"],
            "d4_agreement": d4.aggregates["agreement"].model_dump(),
        },
    )


def check_guaranteed_recovery(cfg: ScenarioConfig, harness: LabHarness) -> ClaimResult:
    sub = _sub_config(cfg, scenario=Scenario.BACKDOOR)
    bound = worst_case_bound(sub.param_set, sub.trapdoor_prime, sub.weight)
    report = LabHarness(sub, harness.verbose, harness.progress_callback, harness.show_progress_bar).run_backdoor_batch()
    recovery = report.aggregates["recovery"].rate
    key_equal = report.aggregates["attacker_key_equal"].rate
    passed = bound.guaranteed and recovery == 1.0 and key_equal == 1.0
    return ClaimResult(
        claim_id="guaranteed_backdoor_recovery",
        description="Inside the worst-case bound every trapdoored session gives up s and the session key",
        passed=passed,
        detail=f"bound {bound.bound} vs q/2 {bound.half_q}; recovery {recovery}, attacker key {key_equal}",
        measured={
            "worst_case_bound": bound.bound,
            "half_q": bound.half_q,
            "recovery": report.aggregates["recovery"].model_dump(),
            "attacker_key_equal": report.aggregates["attacker_key_equal"].model_dump(),
            "exact_bound_held": report.aggregates["exact_bound_held"].model_dump(),
        },
    )


def check_uniform_control(cfg: ScenarioConfig, harness: LabHarness) -> ClaimResult:
    sub = _sub_config(cfg, scenario=Scenario.UNIFORM_CONTROL)
    report = LabHarness(sub, harness.verbose, harness.progress_callback,
                        harness.show_progress_bar).run_uniform_control_batch()
    recovery = report.aggregates["recovery"]
    key_equal = report.aggregates["attacker_key_equal"]
    bad = report.metrics["disagreements_within_guaranteed_gap"]
    error_rate = report.metrics["mean_attacker_key_bit_error_rate"]
    low, high = GUESSED_KEY_ERROR_BAND
    return ClaimResult(
        claim_id="uniform_control",
        description="An honest uniform generator defeats recovery while sessions still agree",
        passed=(recovery.successes == 0 and key_equal.successes == 0 and bad == 0
                and error_rate is not None and low <= error_rate <= high),
        detail=(f"recovered {recovery.successes}/{recovery.count}; attacker keys equal {key_equal.successes}; "
                f"guessed key bit error rate {error_rate}; {bad} disagreements within gap"),
        measured={
            "recovery": recovery.model_dump(),
            "attacker_key_equal": key_equal.model_dump(),
            "agreement": report.aggregates["agreement"].model_dump(),
            "mean_attacker_key_bit_error_rate": error_rate,
        },
    )


def check_reconciliation_tolerance(cfg: ScenarioConfig, harness: LabHarness) -> ClaimResult:
    q = cfg.param_set.q
    tolerance = scan_rec_tolerance(q, limit=q // 4 + 2)
    rng = _claim_rng(cfg, 4)
    v = rng.integers(0, 2 * q, size=RANDOM_REC_SAMPLES)
    delta = rng.integers(-tolerance, tolerance + 1, size=RANDOM_REC_SAMPLES)
    recovered = rec_bit(np.mod(v + delta, 2 * q), cross_bit(v, q), q)
    failures = int(np.count_nonzero(recovered != round_bit(v, q)))
    passed = tolerance >= q // 4 - 2 and failures == 0
    return ClaimResult(
        claim_id="reconciliation_tolerance",
        description="rec_bit recovers round_bit for every offset up to the scanned tolerance",
        passed=passed,
        detail=f"exhaustive tolerance T={tolerance} (floor(q/4)-1 = {q // 4 - 1}); {failures} random failures",
        measured={"tolerance": tolerance, "random_samples": RANDOM_REC_SAMPLES, "failures": failures},
    )


def check_d4_oracle(cfg: ScenarioConfig, harness: LabHarness) -> ClaimResult:
    rng = _claim_rng(cfg, 5)
    mismatches = 0
    inconsistent = 0
    denominators = rng.integers(1, D4_MAX_DENOMINATOR + 1, size=D4_ORACLE_POINTS)
    for denominator in denominators:
        D = int(denominator)
        point = RationalPoint4(tuple(int(x) for x in rng.integers(-4 * D, 4 * D + 1, size=4)), D)
        decoded = d4_decode(point)
        if decoded not in d4_nearest_bruteforce(point):
            mismatches += 1
        origin = decoded.half_coords == (0, 0, 0, 0)
        region = voronoi_contains(point)
        if (region is VoronoiRegion.INSIDE) != (origin and region is not VoronoiRegion.BOUNDARY):
            inconsistent += 1
    relevant = voronoi_relevant_vectors()
    norms_ok = all(v.squared_norm() == 2 for v in relevant)
    halves_boundary = all(
        voronoi_contains(RationalPoint4(tuple(c // 2 for c in v.half_coords), 2)) is VoronoiRegion.BOUNDARY
        for v in relevant
    )
    passed = mismatches == 0 and inconsistent == 0 and len(relevant) == 24 and norms_ok and halves_boundary
    return ClaimResult(
        claim_id="d4_decoding_oracle",
        description="d4_decode returns a nearest D4 point; the 24-cell classification is consistent",
        passed=passed,
        detail=(f"{mismatches} decode mismatches and {inconsistent} Voronoi inconsistencies over "
                f"{D4_ORACLE_POINTS} points; {len(relevant)} relevant vectors"),
        measured={"points": D4_ORACLE_POINTS, "mismatches": mismatches, "relevant_vectors": len(relevant)},
    )


def check_algebraic_identities(cfg: ScenarioConfig, harness: LabHarness) -> ClaimResult:
    rng = _claim_rng(cfg, 6)
    sub = _sub_config(cfg, scenario=Scenario.HONEST)
    settings = sub.trial_settings()
    param = settings.param
    identity_failures = 0
    for index in range(IDENTITY_SESSIONS):
        transcript = run_session(settings.protocol_config(), rng.fork(1, index))
        alice, bob = transcript.alice_state, transcript.bob_state
        s = alice.s.to_ring(param)
        lhs = bob.v - transcript.msg2.u * s
        rhs = alice.e.to_ring(param) * bob.s1.to_ring(param) + bob.e2.to_ring(param) - bob.e1.to_ring(param) * s
        identity_failures += int(lhs != rhs)

    ntt_failures = 0
    if param.ntt_supported:
        for index in range(NTT_PAIRS):
            x = sample_uniform_ring(rng.fork(2, index, 0), param)
            y = sample_uniform_ring(rng.fork(2, index, 1), param)
            ntt_failures += int(ntt_mul(x, y) != ring_mul(x, y))

    toy = get_param_set("toy-n1-q17")
    a = RingElement.from_coeffs([3], toy)
    b = a * RingElement.from_coeffs([5], toy) + RingElement.from_coeffs([2], toy)
    scalar = recover_s(b, CenteredPoly([7]), a)
    scalar_ok = isinstance(scalar, RingElement) and scalar.to_list() == [5]

    h = CyclicRingElement.from_coeffs([1, 2, 0], 3, 5)
    bin_v = CyclicRingElement.from_coeffs([1, 0, 1], 3, 5)
    bin_w = CyclicRingElement.from_coeffs([0, 1, 1], 3, 5)
    t = h * bin_v + bin_w
    off_by_one = t + CyclicRingElement.from_coeffs([1], 3, 5)
    decomposition_ok = (decomposition_check(DecompositionInstance(h=h, t=t, v=bin_v, w=bin_w))
                        and not decomposition_check(DecompositionInstance(h=h, t=off_by_one, v=bin_v, w=bin_w)))

    passed = identity_failures == 0 and ntt_failures == 0 and scalar_ok and decomposition_ok
    return ClaimResult(
        claim_id="algebraic_identities",
        description=("v - u*s = e*s' + e'' - e'*s; NTT product equals schoolbook; scalar recovery example; "
                     "t = h*v + w decomposition predicate"),
        passed=passed,
        detail=(f"{identity_failures}/{IDENTITY_SESSIONS} identity failures, "
                f"{ntt_failures}/{NTT_PAIRS} NTT mismatches, scalar example {'ok' if scalar_ok else 'failed'}, "
                f"decomposition {'ok' if decomposition_ok else 'failed'}"),
        measured={"identity_failures": identity_failures, "ntt_failures": ntt_failures, "scalar_ok": scalar_ok,
                  "decomposition_ok": decomposition_ok},
    )


def check_pseudo_inverse(cfg: ScenarioConfig, harness: LabHarness) -> ClaimResult:
    rng = _claim_rng(cfg, 7)
    p_poly = CyclicRingElement.from_coeffs([4, 1], 3, 5)
    witness = pseudo_inverse_find(p_poly)
    found_expected = (
        isinstance(witness, PseudoInverseWitness) and witness.P.to_list() == [1, 3, 0]
    )
    check_ok = found_expected and pseudo_inverse_check(witness, PSEUDO_INVERSE_TRIALS, rng.fork(1))
    unit = pseudo_inverse_find(CyclicRingElement.from_coeffs([1], 3, 5))
    unit_ok = isinstance(unit, PseudoInverseWitness) and unit.P.to_list() == [1, 0, 0]
    annihilator_ok = not isinstance(
        pseudo_inverse_find(CyclicRingElement.from_coeffs([1, 1, 1], 3, 5)), PseudoInverseWitness)

    mutations_detected = 0
    if found_expected:
        for index in range(3):
            bumped = witness.P.coeffs.copy()
            bumped[index] += 1
            mutant = PseudoInverseWitness(P=CyclicRingElement.from_coeffs(bumped, 3, 5), p_poly=p_poly)
            mutations_detected += int(not pseudo_inverse_check(mutant, PSEUDO_INVERSE_TRIALS, rng.fork(2, index)))
    passed = check_ok and unit_ok and annihilator_ok and mutations_detected == 3
    return ClaimResult(
        claim_id="pseudo_inverse",
        description="P = 3X + 1 is a pseudo-inverse of X + 4 in Z_5[X]/(X^3 - 1); mutations are caught",
        passed=passed,
        detail=(f"witness {'found' if found_expected else 'missing'}, randomized check {check_ok}, "
                f"unit {unit_ok}, annihilator rejected {annihilator_ok}, mutations caught {mutations_detected}/3"),
        measured={"trials": PSEUDO_INVERSE_TRIALS, "mutations_detected": mutations_detected},
    )


def check_scenario_semantics(cfg: ScenarioConfig, harness: LabHarness) -> ClaimResult:
    ttl = cfg.ttl
    cached = LabHarness(_sub_config(cfg, scenario=Scenario.CACHED_A, trials=3 * ttl),
                        harness.verbose, harness.progress_callback, harness.show_progress_bar).run_cached_a()
    windows = cached.windows or []
    cached_ok = (
        len(windows) == 3
        and all(w.sessions == ttl for w in windows)
        and windows[0].trapdoored and windows[0].recovery.rate == 1.0
        and all(not w.trapdoored and w.recovery.successes == 0 for w in windows[1:])
    )
    mitm = LabHarness(_sub_config(cfg, scenario=Scenario.MITM, backend=Backend.D4),
                      harness.verbose, harness.progress_callback, harness.show_progress_bar).run_mitm()
    knows_alice = mitm.aggregates["oscar_knows_alice_key"].rate
    knows_bob = mitm.aggregates["oscar_knows_bob_key"].rate
    differ = mitm.aggregates["alice_bob_keys_differ"].rate
    mitm_ok = knows_alice == 1.0 and knows_bob == 1.0 and differ == 1.0
    return ClaimResult(
        claim_id="scenario_semantics",
        description="A cached trapdoor exposes exactly its ttl window; a MITM learns both half-session keys",
        passed=cached_ok and mitm_ok,
        detail=(f"cached windows {[round(w.recovery.rate, 3) for w in windows]}; mitm knows alice {knows_alice}, "
                f"bob {knows_bob}, keys differ {differ}"),
        measured={"ttl": ttl, "windows": [w.model_dump() for w in windows],
                  "oscar_knows_alice_key": knows_alice, "oscar_knows_bob_key": knows_bob},
    )


def check_determinism(cfg: ScenarioConfig, harness: LabHarness) -> ClaimResult:
    trials = min(cfg.trials, DETERMINISM_TRIALS)
    runs = []
    for workers in (1, 1, 2):
        sub = _sub_config(cfg, scenario=Scenario.BACKDOOR, trials=trials, workers=workers)
        runs.append(LabHarness(sub, show_progress_bar=False).run_backdoor_batch().deterministic_json())
    identical = len(set(runs)) == 1
    return ClaimResult(
        claim_id="determinism",
        description="Same seed gives byte-identical reports, sequential or parallel",
        passed=identical,
        detail=f"{len(runs)} runs, {'identical' if identical else 'different'} JSON",
        measured={"runs": len(runs), "trials": trials},
    )


CLAIM_CHECKS: List[Callable[[ScenarioConfig, LabHarness], ClaimResult]] = [
    check_honest_agreement,
    check_guaranteed_recovery,
    check_uniform_control,
    check_reconciliation_tolerance,
    check_d4_oracle,
    check_algebraic_identities,
    check_pseudo_inverse,
    check_scenario_semantics,
    check_determinism,
]


def verify_claims(cfg: ScenarioConfig, harness: Optional[LabHarness] = None) -> Report:
    """Run every claim check and return one report; ``passed`` is true iff all held."""
    started = time.perf_counter()
    harness = harness or LabHarness(cfg)
    results = []
    for check in CLAIM_CHECKS:
        harness._report_progress(f"🔎 {check.__name__}")
        result = check(cfg, harness)
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, "%s: %s (%s)", result.claim_id, "pass" if result.passed else "FAIL", result.detail)
        results.append(result)
    passed = all(r.passed for r in results)
    return Report(
        scenario=Scenario.VERIFY_CLAIMS,
        config=cfg.model_dump(mode="json", exclude={"workers"}),
        claims=results,
        excluded_claims=EXCLUDED_CLAIMS,
        passed=passed,
        metrics={"claims_passed": sum(1 for r in results if r.passed), "claims_total": len(results)},
        wall_clock_seconds=round(time.perf_counter() - started, 3),
    )


def require_passed(report: Report) -> None:
    """Raise ClaimFailure naming the first failed claim."""
    for claim in report.claims or []:
        if not claim.passed:
            raise ClaimFailure(claim.claim_id, claim.detail)
