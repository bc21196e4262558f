import sys
import os
# Ensure project root is on sys.path for tests
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import json

import pytest

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
from src.params_ring import RingElement, get_param_set
from src.protocol import (
    GeneratorCache,
    GeneratorPolicy,
    Message1,
    Message2,
    ProtocolConfig,
    Transcript,
    alice_finish,
    alice_init,
    bob_respond,
    noise_gap,
    run_session,
)
from src.reconcile import Backend, HelpBits, guaranteed_noise_gap
from src.sampling import SeededRng, sample_uniform_ring


@pytest.fixture
def d4_config(full_param):
    return ProtocolConfig(param=full_param, backend=Backend.D4)


@pytest.fixture
def session(d4_config, rng):
    return run_session(d4_config, rng)


# ============================================================================
# Honest sessions
# ============================================================================

def test_states_are_consistent(session):
    alice, bob = session.alice_state, session.bob_state
    assert alice.is_consistent()
    assert bob.is_consistent(alice.a, alice.b)


def test_d4_session_agrees(session):
    assert session.agreed
    assert len(session.alice_key) == 256


def test_noise_free_session_has_zero_gap(full_param, rng):
    config = ProtocolConfig(param=full_param, noise_free=True)
    transcript = run_session(config, rng)
    assert transcript.noise_gap == 0
    assert transcript.agreed
    assert transcript.alice_state.e.poly.nonzero_count() == 0


def test_peikert_sessions_agree_within_gap(full_param, seed_hex):
    config = ProtocolConfig(param=full_param)
    gap = guaranteed_noise_gap(full_param, Backend.PEIKERT)
    for index in range(10):
        transcript = run_session(config, SeededRng(seed_hex, stream_index=index))
        assert len(transcript.alice_key) == full_param.n
        if transcript.noise_gap <= gap:
            assert transcript.agreed


def test_noise_gap_matches_states(session, full_param):
    w = session.msg2.u * session.alice_state.s.to_ring(full_param)
    assert noise_gap(session.bob_state.v, w) == session.noise_gap


def test_session_replays_from_seed(d4_config, seed_hex):
    first = run_session(d4_config, SeededRng(seed_hex, stream_index=3))
    second = run_session(d4_config, SeededRng(seed_hex, stream_index=3))
    assert first.to_json() == second.to_json()


def test_fresh_generator_per_session(full_param, seed_hex):
    config = ProtocolConfig(param=full_param)
    a0 = run_session(config, SeededRng(seed_hex, stream_index=0)).msg1.a
    a1 = run_session(config, SeededRng(seed_hex, stream_index=1)).msg1.a
    assert a0 != a1


def test_externally_supplied_seed(toy_param, rng):
    config = ProtocolConfig(param=toy_param, generator_policy=GeneratorPolicy.EXTERNALLY_SUPPLIED,
                            supplied_seed=bytes(range(32)))
    transcript = run_session(config, rng)
    assert transcript.msg1.a is None and transcript.msg1.seed == bytes(range(32))
    decoded = Message1.from_bytes(transcript.msg1.to_bytes())
    assert decoded.generator() == transcript.alice_state.a


def test_with_generator_injects_a(toy_param, rng):
    a = sample_uniform_ring(rng.fork(9), toy_param)
    transcript = run_session(ProtocolConfig(param=toy_param).with_generator(a), rng)
    assert transcript.msg1.a == a


# ============================================================================
# Configuration checks
# ============================================================================

def test_config_validation(toy_param):
    with pytest.raises(ParameterError):
        ProtocolConfig(param=get_param_set("toy-n2-q17"), backend=Backend.D4)
    with pytest.raises(ParameterError):
        ProtocolConfig(param=toy_param, ttl=0)
    with pytest.raises(ParameterError):
        ProtocolConfig(param=toy_param, generator_policy=GeneratorPolicy.EXTERNALLY_SUPPLIED)
    with pytest.raises(ParameterError):
        ProtocolConfig(param=toy_param, generator_policy=GeneratorPolicy.EXTERNALLY_SUPPLIED,
                       supplied_seed=b"short")
    with pytest.raises(ParameterError):
        ProtocolConfig(param=toy_param, generator_policy=GeneratorPolicy.EXTERNALLY_SUPPLIED,
                       supplied_a=RingElement.one(get_param_set("toy-n8-q97")))


def test_cached_policy_needs_cache(toy_param, rng):
    config = ProtocolConfig(param=toy_param, generator_policy=GeneratorPolicy.CACHED, ttl=2)
    with pytest.raises(ParameterError):
        alice_init(config, rng)


def test_bob_rejects_mismatched_message(toy_param, rng):
    _, msg1 = alice_init(ProtocolConfig(param=toy_param), rng.fork(1))
    with pytest.raises(ParamMismatchError):
        bob_respond(msg1, ProtocolConfig(param=toy_param, backend=Backend.D4), rng.fork(2))


def test_alice_rejects_wrong_help_length(toy_param, rng):
    config = ProtocolConfig(param=toy_param)
    alice, msg1 = alice_init(config, rng.fork(1))
    _, msg2 = bob_respond(msg1, config, rng.fork(2))
    short = Message2(param=toy_param, backend=Backend.PEIKERT, u=msg2.u, r=HelpBits(msg2.r.bits[:-1], Backend.PEIKERT))
    with pytest.raises(HelpLengthError):
        alice_finish(alice, short, config)


# ============================================================================
# Generator cache
# ============================================================================

def test_generator_cache_rotates_after_ttl(toy_param, rng):
    cache = GeneratorCache(toy_param, ttl=2, rng=rng)
    served = [cache.acquire() for _ in range(5)]
    assert served[0] == served[1]
    assert served[2] == served[3]
    assert served[1] != served[2]
    assert cache.window == 2
    assert cache.rotations == 2
    assert cache.remaining == 1


def test_installed_generator_serves_one_window(toy_param, rng):
    planted = RingElement.one(toy_param)
    cache = GeneratorCache(toy_param, ttl=3, rng=rng)
    cache.install(planted)
    served = [cache.acquire() for _ in range(4)]
    assert all(a == planted for a in served[:3])
    assert served[3] != planted
    assert cache.window == 1
    with pytest.raises(ParameterError):
        cache.install(RingElement.one(get_param_set("toy-n8-q97")))


# ============================================================================
# Wire format
# ============================================================================

def test_message1_layout(session, full_param):
    data = session.msg1.to_bytes()
    assert data[:4] == b"NHKX"
    assert list(data[4:8]) == [1, full_param.param_id, Backend.D4.wire_id, 1]
    assert data[8] == 0  # explicit generator
    assert len(data) == 8 + 1 + 4 * full_param.n
    decoded = Message1.from_bytes(data)
    assert decoded.a == session.msg1.a and decoded.b == session.msg1.b
    assert decoded.backend is Backend.D4


def test_message2_layout(session, full_param):
    data = session.msg2.to_bytes()
    help_bits = 2 * full_param.n
    assert data[7] == 2
    assert int.from_bytes(data[8 + 2 * full_param.n:12 + 2 * full_param.n], "little") == help_bits
    assert len(data) == 8 + 2 * full_param.n + 4 + help_bits // 8
    decoded = Message2.from_bytes(data, full_param)
    assert decoded.u == session.msg2.u and decoded.r == session.msg2.r


def test_decode_errors(session, full_param):
    data = session.msg1.to_bytes()
    with pytest.raises(BadMagicError):
        Message1.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(BadVersionError):
        Message1.from_bytes(data[:4] + bytes([2]) + data[5:])
    with pytest.raises(MessageTypeError):
        Message2.from_bytes(data)
    with pytest.raises(TruncatedMessageError):
        Message1.from_bytes(data[:6])
    with pytest.raises(TruncatedMessageError):
        Message1.from_bytes(data[:-1])
    with pytest.raises(DecodeError):
        Message1.from_bytes(data + b"\x00")
    with pytest.raises(ParamMismatchError):
        Message1.from_bytes(data, get_param_set("newhope512"))
    with pytest.raises(ParamMismatchError):
        Message1.from_bytes(data[:5] + bytes([99]) + data[6:])
    with pytest.raises(DecodeError):
        Message1.from_bytes(data[:8] + bytes([7]) + data[9:])


def test_message2_help_length_checked(session, full_param):
    data = bytearray(session.msg2.to_bytes())
    offset = 8 + 2 * full_param.n
    data[offset:offset + 4] = (full_param.n).to_bytes(4, "little")
    with pytest.raises(HelpLengthError):
        Message2.from_bytes(bytes(data))
    with pytest.raises(TruncatedMessageError):
        Message2.from_bytes(session.msg2.to_bytes()[:-1])


def test_coefficient_out_of_range_rejected(session):
    data = bytearray(session.msg1.to_bytes())
    data[9:11] = (65535).to_bytes(2, "little")
    with pytest.raises(DecodeError):
        Message1.from_bytes(bytes(data))


# ============================================================================
# Transcripts
# ============================================================================

def test_transcript_json_round_trip(session):
    restored = Transcript.from_json(session.to_json())
    assert restored.alice_state is None
    assert restored.msg1.b == session.msg1.b
    assert restored.alice_key == session.alice_key
    assert restored.bob_key == session.bob_key
    assert restored.config == session.config


def test_transcript_rejects_contradictions(session):
    data = json.loads(session.to_json())
    data["agreed"] = not data["agreed"]
    with pytest.raises(DecodeError, match="contradicts"):
        Transcript.from_dict(data)
    with pytest.raises(DecodeError):
        Transcript.from_dict({"config": {}})
    with pytest.raises(DecodeError):
        Transcript.from_json("{not json")
