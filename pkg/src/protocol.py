"""Unauthenticated NewHope-style key exchange between Alice (server) and Bob (client).

The exchange is three explicit steps passing in-process messages::

    alice_init  -> Message1 (a, b = a*s + e)
    bob_respond -> Message2 (u = a*s' + e', help bits of v = b*s' + e'')
    alice_finish   reconciles w = u*s against the help bits

Messages have a bit-exact little-endian wire format (``to_bytes`` /
``from_bytes``) and whole sessions export to JSON through ``Transcript``.
"""
import json
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from src.errors import (
    BadMagicError,
    BadVersionError,
    DecodeError,
    HelpLengthError,
    MessageTypeError,
    ParameterError,
    ParamMismatchError,
    TruncatedMessageError,
)
from src.params_ring import ParamSet, RingElement, centered_lift, decode_ring, get_param_set
from src.reconcile import Backend, HelpBits, KeyBits, helprec, reconcile
from src.sampling import NoisePoly, SeededRng, expand_seed, sample_psi_k, sample_uniform_ring

logger = logging.getLogger(__name__)

MAGIC = b"NHKX"
WIRE_VERSION = 1
HEADER_SIZE = 8
SEED_SIZE = 32

MSG1_TYPE = 1
MSG2_TYPE = 2
A_EXPLICIT = 0
A_FROM_SEED = 1

# Fork labels of the per-session rng.
ALICE_STREAM = 1
BOB_STREAM = 2
_GENERATOR, _SECRET, _ERROR, _ERROR2, _DOUBLING = 1, 2, 3, 4, 5


class GeneratorPolicy(Enum):
    FRESH_PER_SESSION = "fresh"
    CACHED = "cached"
    EXTERNALLY_SUPPLIED = "external"


@dataclass(frozen=True)
class ProtocolConfig:
    param: ParamSet
    backend: Backend = Backend.PEIKERT
    generator_policy: GeneratorPolicy = GeneratorPolicy.FRESH_PER_SESSION
    ttl: int = 1
    supplied_a: Optional[RingElement] = field(default=None, compare=False)
    supplied_seed: Optional[bytes] = None
    deterministic_dbl: bool = False
    # Zeroes e, e' and e'' so that v == u*s exactly.
    noise_free: bool = False

    def __post_init__(self):
        if self.backend is Backend.D4 and self.param.n % 4:
            raise ParameterError(f"D4 backend needs n divisible by 4, got n={self.param.n}")
        if self.ttl < 1:
            raise ParameterError("ttl must be at least 1")
        if self.generator_policy is GeneratorPolicy.EXTERNALLY_SUPPLIED:
            if (self.supplied_a is None) == (self.supplied_seed is None):
                raise ParameterError("externally supplied policy needs exactly one of supplied_a or supplied_seed")
            if self.supplied_a is not None and self.supplied_a.param != self.param:
                raise ParameterError("supplied generator belongs to another parameter set")
            if self.supplied_seed is not None and len(self.supplied_seed) != SEED_SIZE:
                raise ParameterError(f"supplied seed must be {SEED_SIZE} bytes")

    def with_generator(self, a: RingElement) -> "ProtocolConfig":
        """Same settings, generator injected through the externally supplied policy."""
        return ProtocolConfig(
            param=self.param,
            backend=self.backend,
            generator_policy=GeneratorPolicy.EXTERNALLY_SUPPLIED,
            ttl=self.ttl,
            supplied_a=a,
            deterministic_dbl=self.deterministic_dbl,
            noise_free=self.noise_free,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "param": self.param.model_dump(),
            "backend": self.backend.value,
            "generator_policy": self.generator_policy.value,
            "ttl": self.ttl,
            "deterministic_dbl": self.deterministic_dbl,
            "noise_free": self.noise_free,
        }


class GeneratorCache:
    """Alice's cached generator: one a serves ``ttl`` sessions, then rotates."""

    def __init__(self, param: ParamSet, ttl: int, rng: SeededRng):
        if ttl < 1:
            raise ParameterError("ttl must be at least 1")
        self.param = param
        self.ttl = ttl
        self._rng = rng
        self._current: Optional[RingElement] = None
        self._uses = 0
        self.rotations = 0
        self.window = -1

    def _rotate(self) -> None:
        self.window += 1
        self._current = sample_uniform_ring(self._rng.fork(self.window), self.param)
        self._uses = 0
        if self.window > 0:
            self.rotations += 1
            logger.info("Generator cache rotated: window %d after %d sessions", self.window, self.ttl)

    def install(self, a: RingElement) -> None:
        """Plant a generator for the next window (what a cache poisoner does)."""
        if a.param != self.param:
            raise ParameterError("installed generator belongs to another parameter set")
        self.window += 1
        self._current = a
        self._uses = 0
        logger.info("Generator installed into cache for window %d", self.window)

    def acquire(self) -> RingElement:
        if self._current is None or self._uses >= self.ttl:
            self._rotate()
        self._uses += 1
        return self._current

    @property
    def remaining(self) -> int:
        return 0 if self._current is None else self.ttl - self._uses


@dataclass(frozen=True)
class AliceState:
    a: RingElement
    s: NoisePoly
    e: NoisePoly
    b: RingElement

    def is_consistent(self) -> bool:
        param = self.a.param
        return self.b == self.a * self.s.to_ring(param) + self.e.to_ring(param)


@dataclass(frozen=True)
class BobState:
    s1: NoisePoly
    e1: NoisePoly
    e2: NoisePoly
    u: RingElement
    v: RingElement
    r: HelpBits
    key: KeyBits

    def is_consistent(self, a: RingElement, b: RingElement) -> bool:
        param = a.param
        s1 = self.s1.to_ring(param)
        return self.u == a * s1 + self.e1.to_ring(param) and self.v == b * s1 + self.e2.to_ring(param)


def _header(param_id: int, backend: Backend, msg_type: int) -> bytes:
    return MAGIC + bytes([WIRE_VERSION, param_id, backend.wire_id, msg_type])


def _parse_header(data: bytes, expected_type: int, param: Optional[ParamSet]) -> Tuple[ParamSet, Backend]:
    if len(data) < HEADER_SIZE:
        raise TruncatedMessageError(f"Header needs {HEADER_SIZE} bytes, got {len(data)}")
    if data[:4] != MAGIC:
        raise BadMagicError(f"Bad magic {data[:4]!r}, expected {MAGIC!r}")
    if data[4] != WIRE_VERSION:
        raise BadVersionError(f"Unsupported wire version {data[4]}")
    param_id, backend_id, msg_type = data[5], data[6], data[7]
    if msg_type != expected_type:
        raise MessageTypeError(f"Expected message type {expected_type}, got {msg_type}")
    try:
        backend = Backend.from_wire_id(backend_id)
    except ParameterError as exc:
        raise DecodeError(str(exc)) from exc
    if param is None:
        try:
            param = get_param_set(int(param_id))
        except ParameterError as exc:
            raise ParamMismatchError(str(exc)) from exc
    elif param.param_id != param_id:
        raise ParamMismatchError(f"Message is for parameter id {param_id}, expected {param.param_id}")
    return param, backend


@dataclass(frozen=True)
class Message1:
    param: ParamSet
    backend: Backend
    b: RingElement
    a: Optional[RingElement] = None
    seed: Optional[bytes] = None

    def __post_init__(self):
        if (self.a is None) == (self.seed is None):
            raise ParameterError("Message1 carries either an explicit generator or a seed")

    def generator(self) -> RingElement:
        if self.a is not None:
            return self.a
        return expand_seed(self.seed, self.param)

    def to_bytes(self) -> bytes:
        out = bytearray(_header(self.param.param_id, self.backend, MSG1_TYPE))
        if self.a is not None:
            out.append(A_EXPLICIT)
            out += self.a.to_bytes()
        else:
            out.append(A_FROM_SEED)
            out += self.seed
        out += self.b.to_bytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, param: Optional[ParamSet] = None) -> "Message1":
        param, backend = _parse_header(data, MSG1_TYPE, param)
        body = data[HEADER_SIZE:]
        if not body:
            raise TruncatedMessageError("Message1 is missing its generator mode flag")
        mode, body = body[0], body[1:]
        ring_size = 2 * param.n
        a = seed = None
        if mode == A_EXPLICIT:
            a = decode_ring(body, param)
            body = body[ring_size:]
        elif mode == A_FROM_SEED:
            if len(body) < SEED_SIZE:
                raise TruncatedMessageError("Message1 seed is truncated")
            seed, body = bytes(body[:SEED_SIZE]), body[SEED_SIZE:]
        else:
            raise DecodeError(f"Unknown generator mode flag {mode}")
        b = decode_ring(body, param)
        if len(body) > ring_size:
            raise DecodeError(f"Message1 has {len(body) - ring_size} trailing bytes")
        return cls(param=param, backend=backend, b=b, a=a, seed=seed)


@dataclass(frozen=True)
class Message2:
    param: ParamSet
    backend: Backend
    u: RingElement
    r: HelpBits

    def to_bytes(self) -> bytes:
        header = _header(self.param.param_id, self.backend, MSG2_TYPE)
        return header + self.u.to_bytes() + struct.pack("<I", len(self.r)) + self.r.pack()

    @classmethod
    def from_bytes(cls, data: bytes, param: Optional[ParamSet] = None) -> "Message2":
        param, backend = _parse_header(data, MSG2_TYPE, param)
        body = data[HEADER_SIZE:]
        u = decode_ring(body, param)
        body = body[2 * param.n:]
        if len(body) < 4:
            raise TruncatedMessageError("Message2 help length is truncated")
        (help_len,) = struct.unpack("<I", body[:4])
        expected = backend.help_length(param.n)
        if help_len != expected:
            raise HelpLengthError(f"{backend.value} help needs {expected} bits, header says {help_len}")
        packed = body[4:]
        packed_size = (help_len + 7) // 8
        if len(packed) < packed_size:
            raise TruncatedMessageError(f"Help bits need {packed_size} bytes, got {len(packed)}")
        if len(packed) > packed_size:
            raise DecodeError(f"Message2 has {len(packed) - packed_size} trailing bytes")
        return cls(param=param, backend=backend, u=u, r=HelpBits.unpack(packed, help_len, backend))


def _noise(rng: SeededRng, config: ProtocolConfig, label: int, is_error: bool) -> NoisePoly:
    if is_error and config.noise_free:
        return NoisePoly.zero(config.param.n, config.param.k_noise)
    return sample_psi_k(rng.fork(label), config.param)


def alice_init(
    config: ProtocolConfig, rng: SeededRng, cache: Optional[GeneratorCache] = None
) -> Tuple[AliceState, Message1]:
    """Pick a per the generator policy, sample s and e, publish b = a*s + e."""
    param = config.param
    policy = config.generator_policy
    seed = None
    if policy is GeneratorPolicy.FRESH_PER_SESSION:
        a = sample_uniform_ring(rng.fork(_GENERATOR), param)
    elif policy is GeneratorPolicy.CACHED:
        if cache is None:
            raise ParameterError("cached generator policy needs a GeneratorCache")
        a = cache.acquire()
    elif config.supplied_a is not None:
        a = config.supplied_a
    else:
        seed = config.supplied_seed
        a = expand_seed(seed, param)

    s = _noise(rng, config, _SECRET, is_error=False)
    e = _noise(rng, config, _ERROR, is_error=True)
    b = a * s.to_ring(param) + e.to_ring(param)
    state = AliceState(a=a, s=s, e=e, b=b)
    message = Message1(param=param, backend=config.backend, b=b, a=None if seed else a, seed=seed)
    return state, message


def bob_respond(msg1: Message1, config: ProtocolConfig, rng: SeededRng) -> Tuple[BobState, Message2]:
    param = config.param
    if msg1.param != param or msg1.backend is not config.backend:
        raise ParamMismatchError("Message1 does not match the configured parameters or backend")
    a = msg1.generator()
    s1 = _noise(rng, config, _SECRET, is_error=False)
    e1 = _noise(rng, config, _ERROR, is_error=True)
    e2 = _noise(rng, config, _ERROR2, is_error=True)
    s1_ring = s1.to_ring(param)
    u = a * s1_ring + e1.to_ring(param)
    v = msg1.b * s1_ring + e2.to_ring(param)
    r, key = helprec(v, config.backend, rng=rng.fork(_DOUBLING), deterministic=config.deterministic_dbl)
    state = BobState(s1=s1, e1=e1, e2=e2, u=u, v=v, r=r, key=key)
    return state, Message2(param=param, backend=config.backend, u=u, r=r)


def alice_finish(state: AliceState, msg2: Message2, config: ProtocolConfig) -> KeyBits:
    """Reconcile w = u*s against Bob's help bits."""
    if msg2.param != config.param or msg2.backend is not config.backend:
        raise ParamMismatchError("Message2 does not match the configured parameters or backend")
    expected = config.backend.help_length(config.param.n)
    if len(msg2.r) != expected or msg2.r.backend is not config.backend:
        raise HelpLengthError(f"Expected {expected} {config.backend.value} help bits, got {len(msg2.r)}")
    w = msg2.u * state.s.to_ring(config.param)
    return reconcile(w, msg2.r)


def noise_gap(v: RingElement, w: RingElement) -> int:
    """max |centered(v - w)| over the coefficients."""
    return centered_lift(v - w).max_abs()


@dataclass
class Transcript:
    """One complete session. States are None for transcripts read back from JSON."""

    config: ProtocolConfig
    msg1: Message1
    msg2: Message2
    alice_key: KeyBits
    bob_key: KeyBits
    noise_gap: int
    alice_state: Optional[AliceState] = None
    bob_state: Optional[BobState] = None

    @property
    def agreed(self) -> bool:
        return self.alice_key == self.bob_key

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "msg1_hex": self.msg1.to_bytes().hex(),
            "msg2_hex": self.msg2.to_bytes().hex(),
            "alice_key_hex": self.alice_key.to_hex(),
            "bob_key_hex": self.bob_key.to_hex(),
            "noise_gap": self.noise_gap,
            "agreed": self.agreed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Transcript":
        try:
            raw = data["config"]
            param = ParamSet(**raw["param"])
            backend = Backend.parse(raw["backend"])
            policy = GeneratorPolicy(raw["generator_policy"])
            msg1 = Message1.from_bytes(bytes.fromhex(data["msg1_hex"]), param)
            msg2 = Message2.from_bytes(bytes.fromhex(data["msg2_hex"]), param)
            supplied_a = msg1.a if policy is GeneratorPolicy.EXTERNALLY_SUPPLIED else None
            supplied_seed = msg1.seed if policy is GeneratorPolicy.EXTERNALLY_SUPPLIED else None
            config = ProtocolConfig(
                param=param,
                backend=backend,
                generator_policy=policy,
                ttl=int(raw["ttl"]),
                supplied_a=supplied_a,
                supplied_seed=supplied_seed,
                deterministic_dbl=bool(raw["deterministic_dbl"]),
                noise_free=bool(raw["noise_free"]),
            )
            key_len = backend.key_length(param.n)
            claimed_agreement = bool(data["agreed"])
            transcript = cls(
                config=config,
                msg1=msg1,
                msg2=msg2,
                alice_key=KeyBits.from_hex(data["alice_key_hex"], key_len),
                bob_key=KeyBits.from_hex(data["bob_key_hex"], key_len),
                noise_gap=int(data["noise_gap"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DecodeError):
                raise
            raise DecodeError(f"Malformed transcript: {exc}") from exc
        if claimed_agreement != transcript.agreed:
            raise DecodeError("Transcript 'agreed' flag contradicts its keys")
        return transcript

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DecodeError(f"Transcript is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def run_session(
    config: ProtocolConfig, rng: SeededRng, cache: Optional[GeneratorCache] = None
) -> Transcript:
    """Run alice_init, bob_respond and alice_finish with independent rng forks."""
    alice_state, msg1 = alice_init(config, rng.fork(ALICE_STREAM), cache=cache)
    bob_state, msg2 = bob_respond(msg1, config, rng.fork(BOB_STREAM))
    alice_key = alice_finish(alice_state, msg2, config)
    w = msg2.u * alice_state.s.to_ring(config.param)
    return Transcript(
        config=config,
        msg1=msg1,
        msg2=msg2,
        alice_key=alice_key,
        bob_key=bob_state.key,
        noise_gap=noise_gap(bob_state.v, w),
        alice_state=alice_state,
        bob_state=bob_state,
    )
