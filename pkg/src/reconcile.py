"""Key reconciliation backends.

Two backends turn Bob's ``v`` and Alice's approximation ``w = u*s`` into equal
key bits:

* ``Backend.PEIKERT``: one cross-rounding help bit per coefficient on the
  doubled domain Z_{2q}, one key bit per coefficient.
* ``Backend.D4``: coefficients grouped in fours, decoded to the nearer coset of
  Z^4 inside Z^4 u (Z^4 + 1/2); two help bits per coefficient, one key bit per
  group.

All decisions are exact integer comparisons. Elementwise helpers accept
Python ints or numpy integer arrays.
"""
import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import HelpLengthError, ParameterError
from src.params_ring import ParamSet, RingElement
from src.sampling import SeededRng

IntLike = Union[int, np.ndarray]


class Backend(Enum):
    PEIKERT = "peikert"
    D4 = "d4"

    @property
    def wire_id(self) -> int:
        return 0 if self is Backend.PEIKERT else 1

    @classmethod
    def from_wire_id(cls, wire_id: int) -> "Backend":
        for backend in cls:
            if backend.wire_id == wire_id:
                return backend
        raise ParameterError(f"Unknown backend id: {wire_id}")

    @classmethod
    def parse(cls, value: Union[str, "Backend"]) -> "Backend":
        if isinstance(value, Backend):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as exc:
            raise ParameterError(f"Unknown backend '{value}'. Use 'peikert' or 'd4'") from exc

    def help_length(self, n: int) -> int:
        return n if self is Backend.PEIKERT else 2 * n

    def key_length(self, n: int) -> int:
        return n if self is Backend.PEIKERT else n // 4


def _scalar_or_array(template, values: np.ndarray):
    if isinstance(template, np.ndarray):
        return values
    return int(values)


# ============================================================================
# Bit containers
# ============================================================================

def _bit_array(bits) -> np.ndarray:
    arr = np.array(bits, dtype=np.uint8).reshape(-1)
    if arr.size and arr.max() > 1:
        raise ParameterError("bit strings may only contain 0 and 1")
    arr.setflags(write=False)
    return arr


def pack_bits(bits: np.ndarray) -> bytes:
    """LSB-first packing into bytes."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def unpack_bits(data: bytes, count: int) -> np.ndarray:
    if len(data) * 8 < count:
        raise HelpLengthError(f"{count} bits need {(count + 7) // 8} bytes, got {len(data)}")
    raw = np.frombuffer(data, dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:count]


@dataclass(frozen=True, eq=False)
class HelpBits:
    """Reconciliation hints sent by Bob, tagged with the backend that made them."""

    bits: np.ndarray
    backend: Backend

    def __post_init__(self):
        object.__setattr__(self, "bits", _bit_array(self.bits))

    def __len__(self) -> int:
        return int(self.bits.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, HelpBits):
            return NotImplemented
        return self.backend is other.backend and np.array_equal(self.bits, other.bits)

    __hash__ = None

    def pack(self) -> bytes:
        return pack_bits(self.bits)

    @classmethod
    def unpack(cls, data: bytes, count: int, backend: Backend) -> "HelpBits":
        return cls(unpack_bits(data, count), backend)

    def flipped(self, index: int) -> "HelpBits":
        bits = self.bits.copy()
        bits[index] ^= 1
        return HelpBits(bits, self.backend)

    def d4_offsets(self) -> np.ndarray:
        """Per-coefficient signed quarter offsets in {-2, -1, 0, 1}."""
        if self.backend is not Backend.D4:
            raise ParameterError("Only D4 help bits carry quarter offsets")
        pairs = self.bits.reshape(-1, 2).astype(np.int64)
        raw = pairs[:, 0] | (pairs[:, 1] << 1)
        return np.where(raw >= 2, raw - 4, raw)


@dataclass(frozen=True, eq=False)
class KeyBits:
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", _bit_array(self.bits))

    def __len__(self) -> int:
        return int(self.bits.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, KeyBits):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None

    def hamming_distance(self, other: "KeyBits") -> int:
        if len(self) != len(other):
            raise ParameterError("Keys differ in length")
        return int(np.count_nonzero(self.bits != other.bits))

    def to_hex(self) -> str:
        return pack_bits(self.bits).hex()

    @classmethod
    def from_hex(cls, text: str, count: int) -> "KeyBits":
        return cls(unpack_bits(bytes.fromhex(text), count))


# ============================================================================
# Per-coefficient (Peikert) reconciliation
# ============================================================================

def dbl(w: IntLike, q: int, rng: Optional[SeededRng] = None, deterministic: bool = False) -> IntLike:
    """Randomized doubling 2w - e mod 2q, e in {-1, 0, 1} with odds 1/4, 1/2, 1/4.

    With ``deterministic`` (or no rng) e is always 0.
    """
    values = np.asarray(w, dtype=np.int64)
    if deterministic or rng is None:
        offsets = np.zeros_like(values)
    else:
        pairs = rng.bits(values.shape + (2,))
        offsets = pairs[..., 0] - pairs[..., 1]
    return _scalar_or_array(w, np.mod(2 * values - offsets, 2 * q))


def round_bit(v: IntLike, q: int) -> IntLike:
    """Rounding of v/q to the nearest integer mod 2: 1 iff v in [ceil(q/2), ceil(3q/2))."""
    values = np.asarray(v, dtype=np.int64)
    return _scalar_or_array(v, ((2 * values + q) // (2 * q)) % 2)


def cross_bit(v: IntLike, q: int) -> IntLike:
    """floor(2v / q) mod 2."""
    values = np.asarray(v, dtype=np.int64)
    return _scalar_or_array(v, ((2 * values) // q) % 2)


def _rec_interval(b: np.ndarray, q: int) -> Tuple[np.ndarray, np.ndarray]:
    # I_0 = [0, ceil(q/2) - 1], I_1 = [-floor(q/2), -1], E = [-floor(q/4), floor(q/4) - 1].
    quarter = q // 4
    lo = np.where(b == 0, -quarter, -(q // 2) - quarter)
    hi = np.where(b == 0, (q + 1) // 2 - 1 + quarter - 1, -1 + quarter - 1)
    return lo, hi


def rec_bit(w: IntLike, b: IntLike, q: int) -> IntLike:
    """0 iff w lies in I_b + E modulo 2q, else 1."""
    values = np.asarray(w, dtype=np.int64)
    hints = np.asarray(b, dtype=np.int64)
    lo, hi = _rec_interval(hints, q)
    inside = np.mod(values - lo, 2 * q) <= hi - lo
    return _scalar_or_array(w, np.where(inside, 0, 1))


def peikert_tolerance(q: int) -> int:
    """Closed form of the largest doubled-domain offset rec_bit absorbs."""
    return q // 4 - 1


def scan_rec_tolerance(q: int, limit: Optional[int] = None) -> int:
    """Largest T such that rec_bit(v+d, cross_bit(v)) == round_bit(v) for all v, |d| <= T.

    Exhaustive over the doubled domain; ``limit`` caps the search.
    """
    v = np.arange(2 * q, dtype=np.int64)
    hints = cross_bit(v, q)
    expected = round_bit(v, q)
    limit = q if limit is None else limit
    for delta in range(limit + 1):
        for signed in (delta, -delta):
            if not np.array_equal(rec_bit(np.mod(v + signed, 2 * q), hints, q), expected):
                return delta - 1
    return limit


def helprec_peikert(
    v: RingElement, rng: Optional[SeededRng] = None, deterministic: bool = False
) -> Tuple[HelpBits, KeyBits]:
    q = v.param.q
    doubled = dbl(v.coeffs, q, rng=rng, deterministic=deterministic)
    return HelpBits(cross_bit(doubled, q), Backend.PEIKERT), KeyBits(round_bit(doubled, q))


def rec_peikert(w: RingElement, help_bits: HelpBits) -> KeyBits:
    q, n = w.param.q, w.param.n
    if help_bits.backend is not Backend.PEIKERT:
        raise ParameterError("rec_peikert needs Peikert help bits")
    if len(help_bits) != n:
        raise ParameterError(f"Expected {n} help bits, got {len(help_bits)}")
    doubled = np.mod(2 * w.coeffs, 2 * q)
    return KeyBits(rec_bit(doubled, help_bits.bits.astype(np.int64), q))


# ============================================================================
# D4 geometry
# ============================================================================

@dataclass(frozen=True)
class LatticePoint4:
    """The point half_coords / 2 of R^4; all four coordinates share a parity."""

    half_coords: Tuple[int, int, int, int]

    def __post_init__(self):
        coords = tuple(int(c) for c in self.half_coords)
        if len(coords) != 4:
            raise ParameterError("LatticePoint4 needs four coordinates")
        if len({c % 2 for c in coords}) != 1:
            raise ParameterError("LatticePoint4 coordinates must share one parity")
        object.__setattr__(self, "half_coords", coords)

    @classmethod
    def from_integers(cls, coords: Sequence[int]) -> "LatticePoint4":
        return cls(tuple(2 * int(c) for c in coords))

    @property
    def in_z4(self) -> bool:
        return self.half_coords[0] % 2 == 0

    @property
    def in_d4(self) -> bool:
        return self.in_z4 and (sum(self.half_coords) // 2) % 2 == 0

    def coords(self) -> Tuple[Fraction, ...]:
        return tuple(Fraction(c, 2) for c in self.half_coords)

    def squared_norm(self) -> Fraction:
        return Fraction(sum(c * c for c in self.half_coords), 4)

    def __neg__(self) -> "LatticePoint4":
        return LatticePoint4(tuple(-c for c in self.half_coords))

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.coords()) + ")"


@dataclass(frozen=True)
class RationalPoint4:
    """Exact point numerators / denominator of Q^4."""

    numerators: Tuple[int, int, int, int]
    denominator: int

    def __post_init__(self):
        nums = tuple(int(c) for c in self.numerators)
        if len(nums) != 4:
            raise ParameterError("RationalPoint4 needs four coordinates")
        if int(self.denominator) <= 0:
            raise ParameterError("denominator must be positive")
        object.__setattr__(self, "numerators", nums)
        object.__setattr__(self, "denominator", int(self.denominator))

    @classmethod
    def from_fractions(cls, values: Sequence[Union[Fraction, int, str]]) -> "RationalPoint4":
        fractions = [Fraction(v) for v in values]
        denominator = 1
        for frac in fractions:
            denominator = math.lcm(denominator, frac.denominator)
        return cls(tuple(int(f * denominator) for f in fractions), int(denominator))

    @classmethod
    def parse(cls, text: str) -> "RationalPoint4":
        """Parse "0.6, 0.6, 0.1, 0.1" or "1/2 1/2 0 0"."""
        parts = [p for p in text.replace(",", " ").split() if p]
        if len(parts) != 4:
            raise ParameterError(f"Expected four coordinates, got {len(parts)}")
        try:
            return cls.from_fractions(parts)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"Bad coordinate in {text!r}: {exc}") from exc

    @classmethod
    def from_lattice_point(cls, point: LatticePoint4, scale: Fraction = Fraction(1)) -> "RationalPoint4":
        return cls.from_fractions([c * scale for c in point.coords()])

    def coords(self) -> Tuple[Fraction, ...]:
        return tuple(Fraction(n, self.denominator) for n in self.numerators)

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.coords()) + ")"


def squared_distance(y: RationalPoint4, point: LatticePoint4) -> Fraction:
    total = sum((2 * n - c * y.denominator) ** 2 for n, c in zip(y.numerators, point.half_coords))
    return Fraction(total, 4 * y.denominator * y.denominator)


_NEIGHBOURHOOD = np.array(list(itertools.product(range(-2, 3), repeat=4)), dtype=np.int64)


def d4_decode(y: RationalPoint4) -> LatticePoint4:
    """Nearest point of D4 = {x in Z^4 : sum(x) even}.

    Coordinates round half up; on odd parity the coordinate farthest from its
    rounding (lowest index on ties) moves one step towards y.
    """
    D = y.denominator
    rounded = [(2 * n + D) // (2 * D) for n in y.numerators]
    if sum(rounded) % 2:
        gaps = [abs(n - r * D) for n, r in zip(y.numerators, rounded)]
        worst = gaps.index(max(gaps))
        if y.numerators[worst] < rounded[worst] * D:
            rounded[worst] -= 1
        else:
            rounded[worst] += 1
    return LatticePoint4.from_integers(rounded)


def d4_nearest_bruteforce(y: RationalPoint4) -> List[LatticePoint4]:
    """All D4 points at minimal distance among candidates within +-2 of round(y)."""
    D = y.denominator
    nums = np.array(y.numerators, dtype=np.int64)
    candidates = (2 * nums + D) // (2 * D) + _NEIGHBOURHOOD
    candidates = candidates[candidates.sum(axis=1) % 2 == 0]
    distances = ((nums - candidates * D) ** 2).sum(axis=1)
    return [LatticePoint4.from_integers(c) for c in candidates[distances == distances.min()]]


def voronoi_relevant_vectors() -> FrozenSet[LatticePoint4]:
    """The 24 minimal vectors of D4: permutations of (+-1, +-1, 0, 0)."""
    vectors = set()
    for i, j in itertools.combinations(range(4), 2):
        for si, sj in itertools.product((1, -1), repeat=2):
            coords = [0, 0, 0, 0]
            coords[i], coords[j] = si, sj
            vectors.add(LatticePoint4.from_integers(coords))
    return frozenset(vectors)


class VoronoiRegion(Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


def voronoi_contains(y: RationalPoint4) -> VoronoiRegion:
    """Classify y against the Voronoi cell of the origin in D4 (the 24-cell).

    The largest inner product with a relevant vector is the sum of the two
    largest |y_i|, compared against 1.
    """
    magnitudes = sorted((abs(n) for n in y.numerators), reverse=True)
    top = magnitudes[0] + magnitudes[1]
    if top < y.denominator:
        return VoronoiRegion.INSIDE
    if top == y.denominator:
        return VoronoiRegion.BOUNDARY
    return VoronoiRegion.OUTSIDE


@dataclass(frozen=True)
class D4Decoding:
    point: RationalPoint4
    decoded: LatticePoint4
    squared_distance: Fraction
    nearest: Tuple[LatticePoint4, ...]
    region: VoronoiRegion

    def to_dict(self) -> Dict[str, Any]:
        return {
            "point": [str(c) for c in self.point.coords()],
            "decoded": [str(c) for c in self.decoded.coords()],
            "squared_distance": str(self.squared_distance),
            "nearest": [[str(c) for c in p.coords()] for p in self.nearest],
            "region": self.region.value,
        }


def explain_d4_decode(y: RationalPoint4) -> D4Decoding:
    """Decode y and classify its offset from the decoded point against the 24-cell."""
    decoded = d4_decode(y)
    D = y.denominator
    offset = RationalPoint4(tuple(2 * n - h * D for n, h in zip(y.numerators, decoded.half_coords)), 2 * D)
    return D4Decoding(
        point=y,
        decoded=decoded,
        squared_distance=squared_distance(y, decoded),
        nearest=tuple(sorted(d4_nearest_bruteforce(y), key=lambda p: p.half_coords)),
        region=voronoi_contains(offset),
    )


# ============================================================================
# D4 reconciliation backend
# ============================================================================

HELP_OFFSET_MIN = -2
HELP_OFFSET_MAX = 1


def _coset_decode(numerators: np.ndarray, denominator: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest point of Z^4 u (Z^4 + 1/2) for each row of numerators / denominator.

    Returns (coset bit per row, half coordinates of the chosen point). A tie
    between the two cosets goes to Z^4.
    """
    x = np.asarray(numerators, dtype=np.int64)
    D = int(denominator)
    whole = (2 * x + D) // (2 * D)
    half = 2 * (x // D) + 1
    dist_whole = 4 * ((x - whole * D) ** 2).sum(axis=-1)
    dist_half = ((2 * x - half * D) ** 2).sum(axis=-1)
    use_half = dist_half < dist_whole
    chosen = np.where(use_half[..., None], half, 2 * whole)
    return use_half.astype(np.int64), chosen


def _bob_groups(groups: np.ndarray, q: int) -> Tuple[np.ndarray, np.ndarray]:
    key, centre = _coset_decode(groups, q)
    # Offset y - c to the nearest quarter: floor((8v - 4cq + q) / 2q), saturating.
    offsets = (8 * groups - 4 * centre * q + q) // (2 * q)
    return key, np.clip(offsets, HELP_OFFSET_MIN, HELP_OFFSET_MAX)


def _alice_groups(groups: np.ndarray, offsets: np.ndarray, q: int) -> np.ndarray:
    key, _ = _coset_decode(4 * groups - offsets * q, 4 * q)
    return key


def _offsets_to_bits(offsets: np.ndarray) -> np.ndarray:
    raw = np.mod(offsets.reshape(-1), 4)
    return np.stack((raw & 1, raw >> 1), axis=1).reshape(-1)


def d4_bob(group: Sequence[int], q: int) -> Tuple[HelpBits, int]:
    """Help (8 bits) and key bit for one group of four coefficients mod q."""
    arr = np.asarray(group, dtype=np.int64).reshape(1, 4)
    if arr.min() < 0 or arr.max() >= q:
        raise ParameterError("group coefficients must lie in [0, q)")
    key, offsets = _bob_groups(arr, q)
    return HelpBits(_offsets_to_bits(offsets), Backend.D4), int(key[0])


def d4_alice(group: Sequence[int], help_bits: HelpBits, q: int) -> int:
    if len(help_bits) != 8:
        raise ParameterError("a D4 group carries exactly 8 help bits")
    arr = np.asarray(group, dtype=np.int64).reshape(1, 4)
    return int(_alice_groups(arr, help_bits.d4_offsets().reshape(1, 4), q)[0])


def _grouped(x: RingElement) -> np.ndarray:
    # Rows are the coefficient quadruples (j, j + n/4, j + n/2, j + 3n/4).
    n = x.param.n
    if n % 4:
        raise ParameterError(f"D4 backend needs n divisible by 4, got n={n}")
    return x.coeffs.reshape(4, n // 4).T


def _ungrouped(values: np.ndarray) -> np.ndarray:
    return values.T.reshape(-1)


def helprec_d4(v: RingElement) -> Tuple[HelpBits, KeyBits]:
    key, offsets = _bob_groups(_grouped(v), v.param.q)
    return HelpBits(_offsets_to_bits(_ungrouped(offsets)), Backend.D4), KeyBits(key)


def rec_d4(w: RingElement, help_bits: HelpBits) -> KeyBits:
    n = w.param.n
    if help_bits.backend is not Backend.D4:
        raise ParameterError("rec_d4 needs D4 help bits")
    if len(help_bits) != 2 * n:
        raise ParameterError(f"Expected {2 * n} help bits, got {len(help_bits)}")
    offsets = help_bits.d4_offsets().reshape(4, n // 4).T
    return KeyBits(_alice_groups(_grouped(w), offsets, w.param.q))


def helprec(
    v: RingElement,
    backend: Backend,
    rng: Optional[SeededRng] = None,
    deterministic: bool = False,
) -> Tuple[HelpBits, KeyBits]:
    """Bob's side of reconciliation for the chosen backend."""
    if backend is Backend.PEIKERT:
        return helprec_peikert(v, rng=rng, deterministic=deterministic)
    return helprec_d4(v)


def reconcile(w: RingElement, help_bits: HelpBits) -> KeyBits:
    """Alice's side; the backend is read off the help bits."""
    if help_bits.backend is Backend.PEIKERT:
        return rec_peikert(w, help_bits)
    return rec_d4(w, help_bits)


def guaranteed_noise_gap(param: ParamSet, backend: Backend) -> int:
    """Largest max |v - w| coefficient for which agreement is proved."""
    if backend is Backend.PEIKERT:
        return peikert_tolerance(param.q) // 2 - 1
    # Residual after the quarter help is at most 5/8 in L1; the cell allows 1.
    return (3 * param.q - 1) // 32


@dataclass(frozen=True)
class ToleranceSweepResult:
    bound: int
    trials: int
    mismatches: int

    @property
    def rate(self) -> float:
        return self.mismatches / self.trials if self.trials else 0.0


def d4_tolerance_sweep(q: int, bound: int, trials: int, rng: SeededRng) -> ToleranceSweepResult:
    """Mismatch count of Alice/Bob coset bits for random groups and |delta_i| <= bound."""
    if trials < 1:
        raise ParameterError("trials must be positive")
    groups = rng.integers(0, q, size=(trials, 4))
    deltas = rng.integers(-bound, bound + 1, size=(trials, 4))
    bob_key, offsets = _bob_groups(groups, q)
    alice_key = _alice_groups(np.mod(groups + deltas, q), offsets, q)
    return ToleranceSweepResult(bound, trials, int(np.count_nonzero(bob_key != alice_key)))
