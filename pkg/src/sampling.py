"""Seeded samplers for generators, noise and trapdoor building blocks.

Every random draw in the lab goes through ``SeededRng``: a numpy ``Philox``
counter-based generator keyed by a 256-bit seed, a 64-bit stream index and an
optional fork path. Replaying the same (seed, stream_index, path) replays the
draws exactly, which is what the determinism checks of the harness rely on.
"""
import math
import secrets
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.stats import binom

from src.errors import ParameterError
from src.params_ring import CenteredPoly, ParamSet, RingElement

SEED_BITS = 256
SEED_HEX_LENGTH = SEED_BITS // 4

# Stream used when a generator is expanded from a public 32-byte seed.
GENERATOR_EXPANSION_STREAM = 0x6E68


def parse_seed(value: Union[int, str, bytes]) -> int:
    """Normalize a seed given as int, 64 hex characters or 32 bytes."""
    if isinstance(value, bytes):
        if len(value) != SEED_BITS // 8:
            raise ParameterError(f"Seed bytes must be {SEED_BITS // 8} long, got {len(value)}")
        return int.from_bytes(value, "little")
    if isinstance(value, str):
        text = value.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if len(text) != SEED_HEX_LENGTH:
            raise ParameterError(f"Seed must be {SEED_HEX_LENGTH} hex characters, got {len(text)}")
        try:
            return int(text, 16)
        except ValueError as exc:
            raise ParameterError(f"Seed is not hexadecimal: {value!r}") from exc
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        if not 0 <= int(value) < (1 << SEED_BITS):
            raise ParameterError("Seed must lie in [0, 2^256)")
        return int(value)
    raise ParameterError(f"Unsupported seed type: {type(value).__name__}")


def seed_to_hex(seed: int) -> str:
    return f"{seed:0{SEED_HEX_LENGTH}x}"


def random_seed() -> int:
    return secrets.randbits(SEED_BITS)


class SeededRng:
    """Deterministic random stream for one (seed, stream_index, path).

    ``fork(*labels)`` derives an independent child stream; forks never share
    state with their parent, so the order in which children draw is irrelevant.
    """

    def __init__(self, seed: Union[int, str, bytes], stream_index: int = 0, path: Tuple[int, ...] = ()):
        self.seed = parse_seed(seed)
        if not 0 <= stream_index < (1 << 64):
            raise ParameterError("stream_index must be a 64-bit counter")
        self.stream_index = int(stream_index)
        self.path = tuple(int(label) for label in path)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_index,) + self.path)
        self._generator = np.random.Generator(np.random.Philox(sequence))

    def fork(self, *labels: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream_index, self.path + tuple(labels))

    def for_stream(self, stream_index: int) -> "SeededRng":
        return SeededRng(self.seed, stream_index, self.path)

    @property
    def seed_hex(self) -> str:
        return seed_to_hex(self.seed)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._generator.integers(low, high, size=size, dtype=np.int64)

    def bits(self, size) -> np.ndarray:
        return self._generator.integers(0, 2, size=size, dtype=np.int64)

    def choice(self, population: int, size: int) -> np.ndarray:
        """``size`` distinct indices from range(population)."""
        return self._generator.choice(population, size=size, replace=False)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed_hex[:8]}..., stream={self.stream_index}, path={self.path})"


@dataclass(frozen=True)
class NoisePoly:
    """Centered noise polynomial with coefficients bounded by k."""

    poly: CenteredPoly
    k: int

    def __post_init__(self):
        if self.poly.max_abs() > self.k:
            raise ParameterError(f"Noise coefficient exceeds bound {self.k}")

    @property
    def coeffs(self) -> np.ndarray:
        return self.poly.coeffs

    def to_ring(self, param: ParamSet) -> RingElement:
        return self.poly.to_ring(param)

    @classmethod
    def zero(cls, n: int, k: int) -> "NoisePoly":
        return cls(CenteredPoly(np.zeros(n, dtype=np.int64)), k)


def sample_uniform_ring(rng: SeededRng, param: ParamSet) -> RingElement:
    """Uniform element of R_q by rejection on masked fixed-width draws.

    Draws are ``bit_length(q - 1)`` bits wide (14 bits for q = 12289); draws
    >= q are discarded.
    """
    q, n = param.q, param.n
    width = (q - 1).bit_length()
    accepted = []
    needed = n
    while needed > 0:
        draws = rng.integers(0, 1 << width, size=max(2 * needed, 16))
        keep = draws[draws < q][:needed]
        accepted.append(keep)
        needed -= keep.shape[0]
    return RingElement(np.concatenate(accepted), param)


def sample_psi_k(rng: SeededRng, param: ParamSet, k: Optional[int] = None) -> NoisePoly:
    """Centered binomial noise: sum of k differences of fair bits per coefficient."""
    k = param.k_noise if k is None else k
    if k < 0:
        raise ParameterError("k must be non-negative")
    if k == 0:
        return NoisePoly.zero(param.n, 0)
    bits = rng.bits((param.n, 2 * k))
    coeffs = bits[:, :k].sum(axis=1) - bits[:, k:].sum(axis=1)
    return NoisePoly(CenteredPoly(coeffs), k)


def sample_sparse_ternary(rng: SeededRng, n: int, weight: int) -> CenteredPoly:
    """Exactly ``weight`` nonzero +-1 coefficients at uniform distinct positions."""
    if weight < 0 or weight > n:
        raise ParameterError(f"weight must lie in [0, {n}], got {weight}")
    coeffs = np.zeros(n, dtype=np.int64)
    if weight:
        positions = rng.choice(n, weight)
        signs = rng.bits(weight) * 2 - 1
        coeffs[positions] = signs
    return CenteredPoly(coeffs)


def expand_seed(seed: bytes, param: ParamSet) -> RingElement:
    """Deterministically expand a public 32-byte seed into a generator."""
    rng = SeededRng(seed, stream_index=GENERATOR_EXPANSION_STREAM)
    return sample_uniform_ring(rng, param)


def gaussian_weight(x: int, sigma: float) -> float:
    """exp(-x^2 / 2 sigma^2). Reference only; protocol noise is centered binomial."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    return math.exp(-(x * x) / (2.0 * sigma * sigma))


def discrete_gaussian_pmf(sigma: float, tail: float = 12.0) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized Gaussian weights on the integers |x| <= ceil(tail * sigma)."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    bound = int(math.ceil(tail * sigma))
    support = np.arange(-bound, bound + 1)
    weights = np.exp(-(support.astype(float) ** 2) / (2.0 * sigma * sigma))
    return support, weights / weights.sum()


def psi_k_pmf(k: int) -> Dict[int, float]:
    """Exact pmf of the centered binomial: P(x) = C(2k, x + k) / 4^k."""
    if k < 0:
        raise ParameterError("k must be non-negative")
    support = np.arange(-k, k + 1)
    probs = binom.pmf(support + k, 2 * k, 0.5)
    return {int(x): float(p) for x, p in zip(support, probs)}
