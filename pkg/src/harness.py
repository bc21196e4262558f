"""Scenario driver: batches of sessions, attacks and controls, summarized as JSON reports."""
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from jsonschema import Draft202012Validator
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.stats import norm
from sympy import isprime
from tqdm import tqdm

from src import __version__
from src.backdoor import (
    TrapdoorKey,
    attacker_key,
    exact_bound_witness,
    gen_trapdoor,
    generator_uniformity_test,
    recover_from_response,
    recover_full,
    worst_case_bound,
)
from src.errors import ParameterError
from src.params_ring import DEFAULT_PARAM_SET, NotInvertible, ParamSet, eval_at_one, get_param_set
from src.protocol import (
    GeneratorCache,
    GeneratorPolicy,
    ProtocolConfig,
    Transcript,
    alice_finish,
    alice_init,
    bob_respond,
    noise_gap,
    run_session,
)
from src.reconcile import Backend, guaranteed_noise_gap, reconcile
from src.sampling import SeededRng, parse_seed, random_seed, seed_to_hex

logger = logging.getLogger(__name__)

SCHEMA_DIR = Path(__file__).resolve().parent.parent / "schemas"

# Fork labels inside one trial's rng.
_TRAPDOOR, _SESSION, _OSCAR_TRAPDOOR, _ALICE, _OSCAR_AS_BOB, _OSCAR_AS_ALICE, _BOB = range(10, 17)
_CACHE_STREAM = (1 << 63) + 1


class Scenario(str, Enum):
    HONEST = "honest"
    BACKDOOR = "backdoor"
    UNIFORM_CONTROL = "uniform_control"
    CACHED_A = "cached_a"
    MITM = "mitm"
    SWEEP = "sweep"
    VERIFY_CLAIMS = "verify_claims"


def _check_prime_for_noise(p: int, k: int, q: int) -> None:
    if not isprime(p) or p == 2 or p == q:
        raise ValueError(f"trapdoor prime must be an odd prime other than q, got {p}")
    if p < 4 * k + 1:
        raise ValueError(f"trapdoor prime {p} is below 4*k+1 = {4 * k + 1}")


def _parse_int_list(value: Any) -> Any:
    if isinstance(value, str):
        parts = [p for p in value.replace(";", ",").split(",") if p.strip()]
        return [int(p) for p in parts]
    return value


class ScenarioConfig(BaseModel):
    """Validated settings for one harness run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Scenario
    trials: int = Field(1000, ge=1)
    param: str = DEFAULT_PARAM_SET
    backend: Backend = Backend.PEIKERT
    p: Optional[int] = None
    weight: int = Field(2, ge=1)
    ttl: int = Field(5, ge=1)
    seed: str = Field(default_factory=lambda: seed_to_hex(random_seed()))
    workers: int = Field(1, ge=1)
    weights: List[int] = Field(default_factory=lambda: [2, 16, 48, 96])
    p_values: List[int] = Field(default_factory=lambda: [67])
    k_values: List[int] = Field(default_factory=lambda: [16])
    deterministic_dbl: bool = False

    @field_validator("seed", mode="before")
    @classmethod
    def _normalize_seed(cls, value):
        if isinstance(value, int):
            return seed_to_hex(parse_seed(value))
        return seed_to_hex(parse_seed(str(value)))

    @field_validator("param")
    @classmethod
    def _known_param(cls, value: str) -> str:
        return get_param_set(value).name

    @field_validator("weights", "p_values", "k_values", mode="before")
    @classmethod
    def _split_lists(cls, value):
        return _parse_int_list(value)

    @model_validator(mode="after")
    def _check_combination(self):
        param = self.param_set
        if self.backend is Backend.D4 and param.n % 4:
            raise ValueError(f"D4 backend needs n divisible by 4, got n={param.n}")
        if self.p is not None:
            _check_prime_for_noise(self.p, param.k_noise, param.q)
        if self.weight > param.n:
            raise ValueError(f"weight must not exceed n = {param.n}")
        if self.scenario is Scenario.SWEEP:
            if not (self.weights and self.p_values and self.k_values):
                raise ValueError("sweep grid must be nonempty")
            for k in self.k_values:
                for p in self.p_values:
                    _check_prime_for_noise(p, k, param.q)
            if max(self.weights) > param.n or min(self.weights) < 1:
                raise ValueError(f"sweep weights must lie in [1, {param.n}]")
        return self

    @property
    def param_set(self) -> ParamSet:
        return get_param_set(self.param)

    @property
    def trapdoor_prime(self) -> int:
        return self.param_set.p_trapdoor if self.p is None else self.p

    def trial_settings(self, param: Optional[ParamSet] = None, p: Optional[int] = None,
                       weight: Optional[int] = None, stream_offset: int = 0,
                       backend: Optional[Backend] = None) -> "TrialSettings":
        return TrialSettings(
            param=param or self.param_set,
            backend=backend or self.backend,
            p=self.trapdoor_prime if p is None else p,
            weight=self.weight if weight is None else weight,
            seed=self.seed,
            deterministic_dbl=self.deterministic_dbl,
            stream_offset=stream_offset,
        )


class TrialSettings(BaseModel):
    """What a worker needs to replay one trial; picklable for process pools."""

    model_config = ConfigDict(frozen=True)

    param: ParamSet
    backend: Backend
    p: int
    weight: int
    seed: str
    deterministic_dbl: bool = False
    stream_offset: int = 0

    def rng(self, index: int) -> SeededRng:
        return SeededRng(self.seed, stream_index=self.stream_offset + index)

    def protocol_config(self) -> ProtocolConfig:
        return ProtocolConfig(param=self.param, backend=self.backend, deterministic_dbl=self.deterministic_dbl)


class TrialRecord(BaseModel):
    trial: int
    agreed: bool
    noise_gap: int
    within_guaranteed_gap: bool
    recovery_matched: Optional[bool] = None
    attacker_key_equal: Optional[bool] = None
    attacker_key_bit_error_rate: Optional[float] = None
    guarantee: str = "n/a"
    exact_bound_held: Optional[bool] = None
    overflow: Optional[bool] = None
    s_at_one_zero: bool = False
    uniformity_p_value: Optional[float] = None
    window: Optional[int] = None
    trapdoored: Optional[bool] = None
    oscar_knows_alice_key: Optional[bool] = None
    oscar_knows_bob_key: Optional[bool] = None
    bob_secret_recovered: Optional[bool] = None


class RateSummary(BaseModel):
    successes: int
    count: int
    rate: float
    ci_low: float
    ci_high: float


class WindowSummary(BaseModel):
    window: int
    trapdoored: bool
    sessions: int
    recovery: RateSummary


class SweepRow(BaseModel):
    param: str
    k: int
    p: int
    weight: int
    worst_case_bound: int
    guaranteed: bool
    recovery: RateSummary


class ClaimResult(BaseModel):
    claim_id: str
    description: str
    passed: bool
    detail: str
    measured: Dict[str, Any] = Field(default_factory=dict)


class ExcludedClaim(BaseModel):
    claim: str
    reason: str


class Report(BaseModel):
    artifact_version: str = __version__
    scenario: Scenario
    config: Dict[str, Any]
    aggregates: Dict[str, RateSummary] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    records: List[TrialRecord] = Field(default_factory=list)
    windows: Optional[List[WindowSummary]] = None
    sweep: Optional[List[SweepRow]] = None
    claims: Optional[List[ClaimResult]] = None
    excluded_claims: Optional[List[ExcludedClaim]] = None
    passed: Optional[bool] = None
    wall_clock_seconds: float = 0.0

    def to_dict(self, include_wall_clock: bool = True) -> Dict[str, Any]:
        data = self.model_dump(mode="json", exclude_none=True)
        if not include_wall_clock:
            data.pop("wall_clock_seconds", None)
        return data

    def to_json(self, include_wall_clock: bool = True) -> str:
        return json.dumps(self.to_dict(include_wall_clock), sort_keys=True, indent=2)

    def deterministic_json(self) -> str:
        """Report JSON without the wall-clock field."""
        return self.to_json(include_wall_clock=False)

    def save(self, path: str) -> str:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(self.to_json() + "\n", encoding="utf-8")
        return str(out)


def wilson_interval(successes: int, count: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if count == 0:
        return 0.0, 1.0
    z = float(norm.ppf(0.5 + confidence / 2))
    phat = successes / count
    denom = 1 + z * z / count
    centre = (phat + z * z / (2 * count)) / denom
    half = z * math.sqrt(phat * (1 - phat) / count + z * z / (4 * count * count)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def rate_summary(flags: List[bool]) -> RateSummary:
    successes, count = sum(1 for f in flags if f), len(flags)
    low, high = wilson_interval(successes, count)
    return RateSummary(
        successes=successes,
        count=count,
        rate=round(successes / count, 6) if count else 0.0,
        ci_low=round(low, 6),
        ci_high=round(high, 6),
    )


def validate_report(data: Dict[str, Any], schema_name: str = "report") -> Tuple[bool, Optional[str]]:
    """Validate a JSON document against ``schemas/<schema_name>.schema.json``."""
    schema_path = SCHEMA_DIR / f"{schema_name}.schema.json"
    if not schema_path.exists():
        return False, f"Schema not found: {schema_path}"
    schema = json.loads(schema_path.read_text(encoding="utf-8"))
    validator = Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda err: [str(part) for part in err.path])
    if errors:
        first = errors[0]
        location = "/".join(str(part) for part in first.path) or "<root>"
        return False, f"{location}: {first.message}"
    return True, None


# ============================================================================
# Trial functions (module level so process pools can pickle them)
# ============================================================================

def _session_record_fields(transcript, settings: TrialSettings) -> Dict[str, Any]:
    param = settings.param
    s_ring = transcript.alice_state.s.to_ring(param)
    at_one_zero = eval_at_one(s_ring) == 0
    if at_one_zero:
        logger.info("Session secret with s(1) == 0 mod q observed")
    return {
        "agreed": transcript.agreed,
        "noise_gap": transcript.noise_gap,
        "within_guaranteed_gap": transcript.noise_gap <= guaranteed_noise_gap(param, settings.backend),
        "s_at_one_zero": at_one_zero,
    }


def honest_session(settings: TrialSettings, index: int) -> Transcript:
    return run_session(settings.protocol_config(), settings.rng(index))


def honest_trial(settings: TrialSettings, index: int) -> TrialRecord:
    transcript = honest_session(settings, index)
    return TrialRecord(trial=index, **_session_record_fields(transcript, settings))


def backdoor_session(settings: TrialSettings, index: int) -> Tuple[TrapdoorKey, Transcript]:
    """The trapdoor and session of backdoor trial ``index``."""
    rng = settings.rng(index)
    key = gen_trapdoor(settings.param, settings.p, settings.weight, rng.fork(_TRAPDOOR))
    transcript = run_session(settings.protocol_config().with_generator(key.a), rng.fork(_SESSION))
    return key, transcript


def backdoor_trial(settings: TrialSettings, index: int) -> TrialRecord:
    key, transcript = backdoor_session(settings, index)
    outcome = recover_full(transcript, key)
    bound = worst_case_bound(settings.param, settings.p, settings.weight)
    state = transcript.alice_state
    witness = exact_bound_witness(key, state.s.poly, state.e.poly)
    fields = _session_record_fields(transcript, settings)
    if isinstance(outcome, NotInvertible):
        matched, key_equal, overflow = False, False, None
    else:
        matched = outcome.matched
        key_equal = attacker_key(transcript, outcome.s_rec) == transcript.alice_key
        overflow = outcome.overflow
    return TrialRecord(
        trial=index,
        recovery_matched=matched,
        attacker_key_equal=key_equal,
        guarantee="guaranteed" if bound.guaranteed else "probabilistic",
        exact_bound_held=2 * witness < settings.param.q,
        overflow=overflow,
        uniformity_p_value=round(generator_uniformity_test(key.a).p_value, 6),
        **fields,
    )


def uniform_control_trial(settings: TrialSettings, index: int) -> TrialRecord:
    rng = settings.rng(index)
    key = gen_trapdoor(settings.param, settings.p, settings.weight, rng.fork(_TRAPDOOR))
    transcript = run_session(settings.protocol_config(), rng.fork(_SESSION))
    outcome = recover_full(transcript, key)
    error_rate = None
    if isinstance(outcome, NotInvertible):
        matched = key_equal = False
    else:
        matched = outcome.matched
        guessed = attacker_key(transcript, outcome.s_rec)
        key_equal = guessed == transcript.alice_key
        error_rate = guessed.hamming_distance(transcript.alice_key) / len(guessed)
    return TrialRecord(
        trial=index,
        recovery_matched=matched,
        attacker_key_equal=key_equal,
        attacker_key_bit_error_rate=error_rate,
        **_session_record_fields(transcript, settings),
    )


def mitm_trial(settings: TrialSettings, index: int) -> TrialRecord:
    """Oscar sits between Alice and Bob and runs one half-session with each."""
    rng = settings.rng(index)
    honest = settings.protocol_config()
    param = settings.param
    oscar_key = gen_trapdoor(param, settings.p, settings.weight, rng.fork(_OSCAR_TRAPDOOR))

    # Alice <-> Oscar: Oscar answers Alice's Message1 as if he were Bob.
    alice_state, msg1 = alice_init(honest, rng.fork(_ALICE))
    oscar_bob_state, oscar_msg2 = bob_respond(msg1, honest, rng.fork(_OSCAR_AS_BOB))
    alice_key = alice_finish(alice_state, oscar_msg2, honest)
    gap = noise_gap(oscar_bob_state.v, oscar_msg2.u * alice_state.s.to_ring(param))

    # Oscar <-> Bob: Oscar plays Alice with his trapdoored generator.
    oscar_config = honest.with_generator(oscar_key.a)
    _, forged_msg1 = alice_init(oscar_config, rng.fork(_OSCAR_AS_ALICE))
    bob_state, bob_msg2 = bob_respond(forged_msg1, oscar_config, rng.fork(_BOB))

    # u = a'*s' + e' falls to the same trapdoor; b'*s' is within e'' of Bob's v.
    response = recover_from_response(bob_msg2, oscar_key)
    if isinstance(response, NotInvertible):
        oscar_bob_key, bob_secret_recovered = None, False
    else:
        oscar_bob_key = reconcile(forged_msg1.b * response.s1, bob_msg2.r)
        bob_secret_recovered = response.s1 == bob_state.s1.to_ring(param)

    return TrialRecord(
        trial=index,
        agreed=alice_key == bob_state.key,
        noise_gap=gap,
        within_guaranteed_gap=gap <= guaranteed_noise_gap(param, settings.backend),
        oscar_knows_alice_key=oscar_bob_state.key == alice_key,
        oscar_knows_bob_key=oscar_bob_key is not None and oscar_bob_key == bob_state.key,
        bob_secret_recovered=bob_secret_recovered,
        recovery_matched=bob_secret_recovered,
    )


class LabHarness:
    """Runs lab scenarios for one ScenarioConfig and produces Reports."""

    def __init__(
        self,
        config: ScenarioConfig,
        verbose: bool = False,
        progress_callback: Optional[Callable[[str], None]] = None,
        show_progress_bar: bool = True,
    ):
        self.config = config
        self.verbose = verbose
        self.progress_callback = progress_callback
        self.show_progress_bar = show_progress_bar

    def _report_progress(self, message: str):
        """Report progress message via callback or print if verbose."""
        if self.progress_callback:
            self.progress_callback(message)
        elif self.verbose:
            print(message)

    def _run_trials(
        self,
        trial_fn: Callable[[TrialSettings, int], TrialRecord],
        settings: TrialSettings,
        count: int,
        label: str,
    ) -> List[TrialRecord]:
        """Run ``count`` trials, in a process pool when workers > 1; results stay in trial order."""
        self._report_progress(f"▶ {label}: {count} trials")
        job = partial(trial_fn, settings)
        disable = not self.show_progress_bar
        if self.config.workers > 1 and count > 1:
            chunk = max(1, count // (self.config.workers * 4))
            with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
                records = list(tqdm(pool.map(job, range(count), chunksize=chunk),
                                    total=count, desc=label, disable=disable))
        else:
            records = [job(i) for i in tqdm(range(count), desc=label, disable=disable)]
        self._report_progress(f"✓ {label} complete")
        return records

    def _report(self, scenario: Scenario, started: float, **fields) -> Report:
        return Report(
            scenario=scenario,
            config=self.config.model_dump(mode="json", exclude={"workers"}),
            wall_clock_seconds=round(time.perf_counter() - started, 3),
            **fields,
        )

    @staticmethod
    def _session_metrics(records: List[TrialRecord], param: ParamSet, backend: Backend) -> Dict[str, Any]:
        return {
            "max_noise_gap": max((r.noise_gap for r in records), default=0),
            "guaranteed_noise_gap": guaranteed_noise_gap(param, backend),
            "disagreements_within_guaranteed_gap": sum(
                1 for r in records if r.within_guaranteed_gap and not r.agreed
            ),
            "s_at_one_zero_sessions": sum(1 for r in records if r.s_at_one_zero),
        }

    def run_honest_batch(self) -> Report:
        started = time.perf_counter()
        settings = self.config.trial_settings()
        records = self._run_trials(honest_trial, settings, self.config.trials, "honest")
        return self._report(
            Scenario.HONEST,
            started,
            aggregates={"agreement": rate_summary([r.agreed for r in records])},
            metrics=self._session_metrics(records, settings.param, settings.backend),
            records=records,
        )

    def run_backdoor_batch(self) -> Report:
        started = time.perf_counter()
        settings = self.config.trial_settings()
        bound = worst_case_bound(settings.param, settings.p, settings.weight)
        records = self._run_trials(backdoor_trial, settings, self.config.trials, "backdoor")
        metrics = self._session_metrics(records, settings.param, settings.backend)
        p_values = [r.uniformity_p_value for r in records if r.uniformity_p_value is not None]
        metrics.update({
            "worst_case_bound": bound.bound,
            "half_q": bound.half_q,
            "recovery_guaranteed": bound.guaranteed,
            "overflow_trials": sum(1 for r in records if r.overflow),
            "mean_generator_uniformity_p_value": round(sum(p_values) / len(p_values), 6) if p_values else None,
        })
        return self._report(
            Scenario.BACKDOOR,
            started,
            aggregates={
                "agreement": rate_summary([r.agreed for r in records]),
                "recovery": rate_summary([bool(r.recovery_matched) for r in records]),
                "attacker_key_equal": rate_summary([bool(r.attacker_key_equal) for r in records]),
                "exact_bound_held": rate_summary([bool(r.exact_bound_held) for r in records]),
            },
            metrics=metrics,
            records=records,
        )

    def run_uniform_control_batch(self) -> Report:
        started = time.perf_counter()
        settings = self.config.trial_settings()
        records = self._run_trials(uniform_control_trial, settings, self.config.trials, "uniform control")
        metrics = self._session_metrics(records, settings.param, settings.backend)
        error_rates = [r.attacker_key_bit_error_rate for r in records if r.attacker_key_bit_error_rate is not None]
        metrics["mean_attacker_key_bit_error_rate"] = (
            round(sum(error_rates) / len(error_rates), 6) if error_rates else None
        )
        return self._report(
            Scenario.UNIFORM_CONTROL,
            started,
            aggregates={
                "agreement": rate_summary([r.agreed for r in records]),
                "recovery": rate_summary([bool(r.recovery_matched) for r in records]),
                "attacker_key_equal": rate_summary([bool(r.attacker_key_equal) for r in records]),
            },
            metrics=metrics,
            records=records,
        )

    def run_cached_a(self) -> Report:
        """One trapdoored generator is planted in Alice's cache and serves ttl sessions."""
        started = time.perf_counter()
        settings = self.config.trial_settings()
        param, ttl = settings.param, self.config.ttl
        root = SeededRng(self.config.seed, stream_index=_CACHE_STREAM)
        key = gen_trapdoor(param, settings.p, settings.weight, root.fork(_TRAPDOOR))
        cache = GeneratorCache(param, ttl, root.fork(_SESSION))
        cache.install(key.a)
        protocol_config = ProtocolConfig(
            param=param,
            backend=settings.backend,
            generator_policy=GeneratorPolicy.CACHED,
            ttl=ttl,
            deterministic_dbl=settings.deterministic_dbl,
        )
        self._report_progress(f"▶ cached_a: {self.config.trials} sessions, ttl={ttl}")
        records: List[TrialRecord] = []
        iterator = tqdm(range(self.config.trials), desc="cached_a", disable=not self.show_progress_bar)
        for index in iterator:
            transcript = run_session(protocol_config, settings.rng(index), cache=cache)
            outcome = recover_full(transcript, key)
            matched = not isinstance(outcome, NotInvertible) and outcome.matched
            records.append(TrialRecord(
                trial=index,
                recovery_matched=matched,
                window=cache.window,
                trapdoored=transcript.msg1.a == key.a,
                **_session_record_fields(transcript, settings),
            ))
        windows = []
        for window in sorted({r.window for r in records}):
            members = [r for r in records if r.window == window]
            windows.append(WindowSummary(
                window=window,
                trapdoored=all(r.trapdoored for r in members),
                sessions=len(members),
                recovery=rate_summary([bool(r.recovery_matched) for r in members]),
            ))
        self._report_progress(f"✓ cached_a complete: {cache.rotations} rotations")
        return self._report(
            Scenario.CACHED_A,
            started,
            aggregates={
                "recovery": rate_summary([bool(r.recovery_matched) for r in records]),
                "recovery_trapdoored_window": rate_summary(
                    [bool(r.recovery_matched) for r in records if r.trapdoored]),
                "recovery_after_rotation": rate_summary(
                    [bool(r.recovery_matched) for r in records if not r.trapdoored]),
            },
            metrics={"ttl": ttl, "rotations": cache.rotations},
            records=records,
            windows=windows,
        )

    def run_mitm(self) -> Report:
        started = time.perf_counter()
        settings = self.config.trial_settings()
        logger.info("Man-in-the-middle: Message1 substitution is undetectable without authentication")
        records = self._run_trials(mitm_trial, settings, self.config.trials, "mitm")
        return self._report(
            Scenario.MITM,
            started,
            aggregates={
                "oscar_knows_alice_key": rate_summary([bool(r.oscar_knows_alice_key) for r in records]),
                "oscar_knows_bob_key": rate_summary([bool(r.oscar_knows_bob_key) for r in records]),
                "alice_bob_keys_differ": rate_summary([not r.agreed for r in records]),
                "bob_secret_recovered": rate_summary([bool(r.bob_secret_recovered) for r in records]),
            },
            metrics={
                "guaranteed_noise_gap": guaranteed_noise_gap(settings.param, settings.backend),
                "max_noise_gap": max((r.noise_gap for r in records), default=0),
            },
            records=records,
        )

    def sweep(
        self,
        weights: Optional[List[int]] = None,
        p_values: Optional[List[int]] = None,
        k_values: Optional[List[int]] = None,
    ) -> Report:
        """Worst-case bound and measured recovery rate for every (k, p, weight) grid point."""
        started = time.perf_counter()
        weights = weights or self.config.weights
        p_values = p_values or self.config.p_values
        k_values = k_values or self.config.k_values
        if not (weights and p_values and k_values):
            raise ParameterError("sweep grid must be nonempty")
        base = self.config.param_set
        rows: List[SweepRow] = []
        row_index = 0
        for k in k_values:
            for p in p_values:
                param = base.with_noise(k, p_trapdoor=p)
                for weight in weights:
                    row_index += 1
                    settings = self.config.trial_settings(
                        param=param, p=p, weight=weight, stream_offset=row_index << 32)
                    bound = worst_case_bound(param, p, weight)
                    records = self._run_trials(
                        backdoor_trial, settings, self.config.trials, f"sweep k={k} p={p} w={weight}")
                    rows.append(SweepRow(
                        param=param.name,
                        k=k,
                        p=p,
                        weight=weight,
                        worst_case_bound=bound.bound,
                        guaranteed=bound.guaranteed,
                        recovery=rate_summary([bool(r.recovery_matched) for r in records]),
                    ))
        return self._report(Scenario.SWEEP, started, sweep=rows, metrics={"grid_size": len(rows)})

    def run(self) -> Report:
        scenario = self.config.scenario
        if scenario is Scenario.HONEST:
            return self.run_honest_batch()
        if scenario is Scenario.BACKDOOR:
            return self.run_backdoor_batch()
        if scenario is Scenario.UNIFORM_CONTROL:
            return self.run_uniform_control_batch()
        if scenario is Scenario.CACHED_A:
            return self.run_cached_a()
        if scenario is Scenario.MITM:
            return self.run_mitm()
        if scenario is Scenario.SWEEP:
            return self.sweep()
        from src.claims import verify_claims

        return verify_claims(self.config, harness=self)
