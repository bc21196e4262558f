"""Trapdoored generators and the recovery chain they enable.

A trapdoored generator is ``a = g * f^-1`` with ``f = 1 + p*f_hat`` and
``g = 1 + p*g_hat`` for sparse ternary ``f_hat, g_hat``. For any public
``b = a*s + e``::

    b*f = g*s + f*e                        (mod q)
        = s + e + p*(g_hat*s + f_hat*e)    (over Z, when nothing wraps)

so reducing the centered ``b*f`` mod p yields ``t = s + e``, and
``s = (b - t) * (a - 1)^-1`` in R_q.

The module also hosts the pseudo-inverse and decomposition predicates on the
cyclic ring Z_q[X]/(X^N - 1).
"""
import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.stats import chisquare
from sympy import isprime

from src.errors import DecodeError, ParameterError, TrapdoorGenerationError
from src.params_ring import (
    CenteredPoly,
    CyclicRingElement,
    NotInvertible,
    ParamSet,
    RingElement,
    centered_lift,
    cyclic_mul,
    poly_inverse_mod,
    reduce_mod_p_centered,
    ring_inverse,
)
from src.protocol import Message2, Transcript
from src.reconcile import KeyBits, reconcile
from src.sampling import SeededRng, sample_sparse_ternary

logger = logging.getLogger(__name__)

DEFAULT_WEIGHT = 2
MAX_TRAPDOOR_ATTEMPTS = 64


def _sparse_to_dict(poly: CenteredPoly) -> Dict[str, Any]:
    positions = np.flatnonzero(poly.coeffs)
    return {"positions": [int(i) for i in positions], "signs": [int(poly.coeffs[i]) for i in positions]}


def _sparse_from_dict(data: Dict[str, Any], n: int) -> CenteredPoly:
    coeffs = np.zeros(n, dtype=np.int64)
    positions, signs = data["positions"], data["signs"]
    if len(positions) != len(signs):
        raise DecodeError("positions and signs differ in length")
    for index, sign in zip(positions, signs):
        if not 0 <= int(index) < n or int(sign) not in (-1, 1):
            raise DecodeError(f"Bad sparse entry ({index}, {sign})")
        coeffs[int(index)] = int(sign)
    return CenteredPoly(coeffs)


def _lift_trapdoor(hat: CenteredPoly, p: int, param: ParamSet) -> RingElement:
    """1 + p*hat as an element of R_q."""
    coeffs = p * hat.coeffs.copy()
    coeffs[0] += 1
    return RingElement.from_coeffs(coeffs, param)


@dataclass(frozen=True)
class TrapdoorKey:
    param: ParamSet
    p: int
    weight: int
    f_hat: CenteredPoly
    g_hat: CenteredPoly
    f: RingElement
    g: RingElement
    a: RingElement

    def to_dict(self) -> Dict[str, Any]:
        return {
            "param": self.param.name,
            "p": self.p,
            "weight": self.weight,
            "f_hat": _sparse_to_dict(self.f_hat),
            "g_hat": _sparse_to_dict(self.g_hat),
            "a_hex": self.a.to_bytes().hex(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], param: ParamSet) -> "TrapdoorKey":
        """Rebuild the key and check the exported generator against f_hat, g_hat."""
        if isinstance(data, dict) and data.get("param", param.name) != param.name:
            raise DecodeError(f"Export is for parameter set {data['param']!r}, not {param.name!r}")
        try:
            p, weight = int(data["p"]), int(data["weight"])
            f_hat = _sparse_from_dict(data["f_hat"], param.n)
            g_hat = _sparse_from_dict(data["g_hat"], param.n)
            a_hex = data["a_hex"]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DecodeError):
                raise
            raise DecodeError(f"Malformed trapdoor export: {exc}") from exc
        key = build_trapdoor(param, p, weight, f_hat, g_hat)
        if isinstance(key, NotInvertible):
            raise DecodeError(f"Exported trapdoor is degenerate: {key.reason}")
        if key.a.to_bytes().hex() != a_hex:
            raise DecodeError("Exported generator does not match f_hat and g_hat")
        return key

    @classmethod
    def from_json(cls, text: str, param: ParamSet) -> "TrapdoorKey":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DecodeError(f"Trapdoor export is not valid JSON: {exc}") from exc
        return cls.from_dict(data, param)


def _check_trapdoor_prime(param: ParamSet, p: int) -> None:
    if not isprime(p) or p == 2:
        raise ParameterError(f"trapdoor prime must be an odd prime, got {p}")
    if p < 4 * param.k_noise + 1:
        raise ParameterError(f"trapdoor prime must be >= 4*k+1 = {4 * param.k_noise + 1}, got {p}")
    if p == param.q:
        raise ParameterError("trapdoor prime must differ from q")


def build_trapdoor(
    param: ParamSet, p: int, weight: int, f_hat: CenteredPoly, g_hat: CenteredPoly
) -> Union[TrapdoorKey, NotInvertible]:
    """Assemble a key from chosen f_hat, g_hat; NotInvertible if f or g - f is singular."""
    f = _lift_trapdoor(f_hat, p, param)
    g = _lift_trapdoor(g_hat, p, param)
    f_inv = ring_inverse(f)
    if isinstance(f_inv, NotInvertible):
        return NotInvertible(f"f is not invertible ({f_inv.reason})")
    difference = ring_inverse(g - f)
    if isinstance(difference, NotInvertible):
        return NotInvertible(f"g - f is not invertible ({difference.reason})")
    return TrapdoorKey(param=param, p=p, weight=weight, f_hat=f_hat, g_hat=g_hat, f=f, g=g, a=g * f_inv)


def gen_trapdoor(
    param: ParamSet,
    p: int,
    weight: int,
    rng: SeededRng,
    max_attempts: int = MAX_TRAPDOOR_ATTEMPTS,
) -> TrapdoorKey:
    """Sample f_hat != g_hat of the given weight until f and g - f are invertible."""
    _check_trapdoor_prime(param, p)
    if weight < 1:
        raise ParameterError("weight must be at least 1: weight 0 gives f = g = 1 and a - 1 = 0")
    if weight > param.n:
        raise ParameterError(f"weight must not exceed n = {param.n}")
    for attempt in range(max_attempts):
        f_hat = sample_sparse_ternary(rng.fork(attempt, 0), param.n, weight)
        g_hat = sample_sparse_ternary(rng.fork(attempt, 1), param.n, weight)
        if f_hat == g_hat:
            continue
        key = build_trapdoor(param, p, weight, f_hat, g_hat)
        if isinstance(key, NotInvertible):
            logger.debug("Trapdoor attempt %d rejected: %s", attempt, key.reason)
            continue
        return key
    logger.warning("Trapdoor generation gave up after %d attempts (param=%s, p=%d, weight=%d)",
                   max_attempts, param.name, p, weight)
    raise TrapdoorGenerationError(f"No usable trapdoor after {max_attempts} attempts")


@dataclass(frozen=True)
class WorstCaseBound:
    bound: int
    q: int

    @property
    def half_q(self) -> int:
        return self.q // 2

    @property
    def guaranteed(self) -> bool:
        return 2 * self.bound < self.q


def worst_case_bound(param: ParamSet, p: int, weight: int) -> WorstCaseBound:
    """Triangle-inequality bound 2k + p*2w*k on max |g*s + f*e| over Z."""
    k = param.k_noise
    return WorstCaseBound(bound=2 * k + p * 2 * weight * k, q=param.q)


def negacyclic_integer_product(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Product in Z[X]/(X^n + 1) without any modular reduction."""
    n = x.shape[0]
    full = np.convolve(np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64))
    out = full[:n].copy()
    out[: n - 1] -= full[n:]
    return out


def exact_bound_witness(key: TrapdoorKey, s: CenteredPoly, e: CenteredPoly) -> int:
    """max |g*s + f*e| computed in the clear over Z."""
    f = key.p * key.f_hat.coeffs.copy()
    f[0] += 1
    g = key.p * key.g_hat.coeffs.copy()
    g[0] += 1
    total = negacyclic_integer_product(g, s.coeffs) + negacyclic_integer_product(f, e.coeffs)
    return int(np.abs(total).max())


def recover_t(b: RingElement, key: TrapdoorKey) -> Tuple[CenteredPoly, bool]:
    """t = (centered b*f) mod p, centered. Overflow when some |t_i| exceeds 2k."""
    lifted = centered_lift(b * key.f)
    t = reduce_mod_p_centered(lifted, key.p)
    return t, t.max_abs() > 2 * key.param.k_noise


def recover_s(b: RingElement, t: CenteredPoly, a: RingElement) -> Union[RingElement, NotInvertible]:
    """(b - t) * (a - 1)^-1 in R_q."""
    param = a.param
    inverse = ring_inverse(a - RingElement.one(param))
    if isinstance(inverse, NotInvertible):
        return NotInvertible(f"a - 1 is not invertible ({inverse.reason})")
    return (b - t.to_ring(param)) * inverse


@dataclass(frozen=True)
class RecoveryOutcome:
    t: CenteredPoly
    s_rec: RingElement
    e_rec: RingElement
    overflow: bool
    matched: bool


def recover_full(transcript: Transcript, key: TrapdoorKey) -> Union[RecoveryOutcome, NotInvertible]:
    """Recover Alice's s and e from Message1 and compare them with her real secrets."""
    state = transcript.alice_state
    if state is None:
        raise ParameterError("transcript carries no Alice state to verify recovery against")
    param = transcript.config.param
    a = transcript.msg1.generator()
    b = transcript.msg1.b
    t, overflow = recover_t(b, key)
    s_rec = recover_s(b, t, a)
    if isinstance(s_rec, NotInvertible):
        return s_rec
    e_rec = b - a * s_rec
    matched = s_rec == state.s.to_ring(param) and e_rec == state.e.to_ring(param)
    return RecoveryOutcome(t=t, s_rec=s_rec, e_rec=e_rec, overflow=overflow, matched=matched)


def attacker_key(transcript: Transcript, s_rec: RingElement) -> KeyBits:
    """What Alice would compute if her secret were s_rec."""
    return reconcile(transcript.msg2.u * s_rec, transcript.msg2.r)


@dataclass(frozen=True)
class PassiveRecovery:
    s_rec: RingElement
    e_rec: RingElement
    overflow: bool
    key: KeyBits


def recover_from_transcript(transcript: Transcript, key: TrapdoorKey) -> Union[PassiveRecovery, NotInvertible]:
    """Recovery from the wire messages alone, for transcripts read back from JSON."""
    if transcript.config.param != key.param:
        raise ParameterError("transcript and trapdoor use different parameter sets")
    a = transcript.msg1.generator()
    if a != key.a:
        raise ParameterError("transcript generator is not the trapdoored one")
    b = transcript.msg1.b
    t, overflow = recover_t(b, key)
    s_rec = recover_s(b, t, a)
    if isinstance(s_rec, NotInvertible):
        return s_rec
    return PassiveRecovery(s_rec=s_rec, e_rec=b - a * s_rec, overflow=overflow, key=attacker_key(transcript, s_rec))


@dataclass(frozen=True)
class ResponseRecovery:
    s1: RingElement
    e1: RingElement
    overflow: bool


def recover_from_response(msg2: Message2, key: TrapdoorKey) -> Union[ResponseRecovery, NotInvertible]:
    """Recover Bob's s' and e' from u = a*s' + e' when Bob used the trapdoored a."""
    t, overflow = recover_t(msg2.u, key)
    s1 = recover_s(msg2.u, t, key.a)
    if isinstance(s1, NotInvertible):
        return s1
    return ResponseRecovery(s1=s1, e1=msg2.u - key.a * s1, overflow=overflow)


@dataclass(frozen=True)
class UniformityResult:
    statistic: float
    p_value: float
    bins: int


def generator_uniformity_test(a: RingElement, bins: int = 16) -> UniformityResult:
    """Chi-square of a's coefficients against uniform on Z_q, binned."""
    q = a.param.q
    bins = max(2, min(bins, q))
    edges = (np.arange(bins + 1) * q) // bins
    counts, _ = np.histogram(a.coeffs, bins=edges)
    expected = a.param.n * np.diff(edges) / q
    result = chisquare(counts, expected)
    return UniformityResult(statistic=float(result.statistic), p_value=float(result.pvalue), bins=bins)


# ============================================================================
# Cyclic ring predicates
# ============================================================================

@dataclass(frozen=True)
class PseudoInverseWitness:
    P: CyclicRingElement
    p_poly: CyclicRingElement


@dataclass(frozen=True)
class NotFound:
    reason: str = ""


def pseudo_inverse_find(p_poly: CyclicRingElement) -> Union[PseudoInverseWitness, NotFound]:
    """Find P with P*p*s == s for every s with s(1) == 0 (mod q).

    Such s are exactly the multiples of (X - 1), so P is the inverse of p
    modulo 1 + X + ... + X^(N-1).
    """
    N, q = p_poly.N, p_poly.q
    if not isprime(q):
        raise ParameterError(f"pseudo-inverse search needs a prime modulus, got {q}")
    if N == 1:
        # Only s = 0 qualifies, any P works.
        return PseudoInverseWitness(P=CyclicRingElement.from_coeffs([1], N, q), p_poly=p_poly)
    inverse = poly_inverse_mod(p_poly.to_list(), [1] * N, q)
    if inverse is None:
        return NotFound(f"p shares a factor with 1 + X + ... + X^{N - 1} over GF({q})")
    return PseudoInverseWitness(P=CyclicRingElement.from_coeffs(inverse, N, q), p_poly=p_poly)


def project_to_zero_sum(s: CyclicRingElement) -> CyclicRingElement:
    """Adjust the constant coefficient so that s(1) == 0 (mod q)."""
    coeffs = s.coeffs.copy()
    coeffs[0] -= s.eval_at_one()
    return CyclicRingElement.from_coeffs(coeffs, s.N, s.q)


def pseudo_inverse_check(witness: PseudoInverseWitness, trials: int, rng: SeededRng) -> bool:
    P, p_poly = witness.P, witness.p_poly
    N, q = p_poly.N, p_poly.q
    transfer = cyclic_mul(P, p_poly)
    for trial in range(trials):
        s = project_to_zero_sum(CyclicRingElement(rng.integers(0, q, size=N), N, q))
        if cyclic_mul(transfer, s) != s:
            logger.debug("Pseudo-inverse check failed on trial %d", trial)
            return False
    return True


@dataclass(frozen=True)
class DecompositionInstance:
    h: CyclicRingElement
    t: CyclicRingElement
    v: CyclicRingElement
    w: CyclicRingElement


def decomposition_check(inst: DecompositionInstance) -> bool:
    """t == h*v + w with binary v and w."""
    for name in ("v", "w"):
        poly: CyclicRingElement = getattr(inst, name)
        if poly.coeffs.size and poly.coeffs.max() > 1:
            raise ParameterError(f"{name} must be binary")
    return inst.t == inst.h * inst.v + inst.w


def trapdoor_for(param: ParamSet, rng: SeededRng, p: Optional[int] = None, weight: Optional[int] = None) -> TrapdoorKey:
    """gen_trapdoor with the parameter set's prime and weight 2 as defaults."""
    return gen_trapdoor(
        param,
        param.p_trapdoor if p is None else p,
        DEFAULT_WEIGHT if weight is None else weight,
        rng,
    )
