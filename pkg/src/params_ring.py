"""Parameter sets and exact arithmetic in R_q = Z_q[X]/(X^n + 1).

Also hosts the toy cyclic ring Z_q[X]/(X^N - 1) used by the pseudo-inverse
experiments. Coefficients live in canonical ``[0, q)`` form inside
``RingElement``; the centered representatives get their own type
(``CenteredPoly``) so the two are never mixed silently.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from sympy import Poly, isprime, primitive_root, symbols
from sympy.polys.polyerrors import NotInvertible as _SympyNotInvertible

from src.errors import (
    CoefficientRangeError,
    ParameterError,
    TruncatedMessageError,
    UnsupportedParameterError,
)

_X = symbols("X")

# Wire encoding packs one coefficient per little-endian uint16.
MAX_WIRE_MODULUS = 1 << 16


def find_root_of_unity(n: int, q: int) -> Optional[int]:
    """Return the primitive 2n-th root of unity used by the NTT, or None.

    The root is g^((q-1)/2n) mod q where g is the smallest primitive root of q
    (``sympy.primitive_root``). This choice is part of the stable behaviour of
    the lab: transforms, and therefore NTT-domain values, depend on it.
    """
    if n < 1 or q < 3 or not isprime(q) or (q - 1) % (2 * n) != 0:
        return None
    generator = int(primitive_root(q))
    return pow(generator, (q - 1) // (2 * n), q)


class ParamSet(BaseModel):
    """The lab's dial set: ring dimension, modulus, noise and trapdoor prime."""

    model_config = ConfigDict(frozen=True)

    param_id: int
    name: str
    n: int
    q: int
    k_noise: int
    sigma: float
    p_trapdoor: int
    psi: Optional[int] = None

    @model_validator(mode="before")
    @classmethod
    def _fill_root(cls, data):
        if isinstance(data, dict) and data.get("psi") is None:
            try:
                data = dict(data)
                data["psi"] = find_root_of_unity(int(data["n"]), int(data["q"]))
            except (KeyError, TypeError, ValueError):
                pass
        return data

    @model_validator(mode="after")
    def _check_invariants(self):
        if not 0 <= self.param_id <= 255:
            raise ValueError("param_id must fit in one byte")
        if self.n < 1 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.q < 3 or not isprime(self.q):
            raise ValueError(f"q must be a prime >= 3, got {self.q}")
        if self.k_noise < 0:
            raise ValueError("k_noise must be non-negative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not isprime(self.p_trapdoor) or self.p_trapdoor < 4 * self.k_noise + 1:
            raise ValueError(
                f"p_trapdoor must be a prime >= 4*k_noise+1 = {4 * self.k_noise + 1}, "
                f"got {self.p_trapdoor}"
            )
        if self.p_trapdoor == 2:
            raise ValueError("p_trapdoor must be odd")
        if self.psi is not None:
            if pow(self.psi, self.n, self.q) != self.q - 1:
                raise ValueError("psi is not a primitive 2n-th root of unity mod q")
        return self

    @property
    def ntt_supported(self) -> bool:
        return self.psi is not None

    @property
    def half_q(self) -> int:
        """(q - 1) / 2, the largest centered representative."""
        return (self.q - 1) // 2

    def with_noise(self, k_noise: int, p_trapdoor: Optional[int] = None) -> "ParamSet":
        """Copy with a different noise width (and trapdoor prime), re-validated.

        The copy keeps the wire id of its ring but is renamed after what changed,
        e.g. ``newhope1024-k32-p131``.
        """
        values = self.model_dump()
        values["k_noise"] = k_noise
        suffix = f"-k{k_noise}" if k_noise != self.k_noise else ""
        if p_trapdoor is not None and p_trapdoor != self.p_trapdoor:
            suffix += f"-p{p_trapdoor}"
        values["name"] = self.name + suffix
        values["sigma"] = math.sqrt(k_noise / 2) if k_noise > 0 else self.sigma
        if p_trapdoor is not None:
            values["p_trapdoor"] = p_trapdoor
        return ParamSet(**values)


def _make(param_id: int, name: str, n: int, q: int, k_noise: int, p_trapdoor: int) -> ParamSet:
    return ParamSet(
        param_id=param_id,
        name=name,
        n=n,
        q=q,
        k_noise=k_noise,
        sigma=math.sqrt(k_noise / 2),
        p_trapdoor=p_trapdoor,
    )


# Toy sets are first-class: brute-force oracles and hand examples run on them.
PARAM_SETS: Dict[str, ParamSet] = {
    ps.name: ps
    for ps in (
        _make(0, "newhope1024", 1024, 12289, 16, 67),
        _make(1, "newhope512", 512, 12289, 16, 67),
        _make(2, "toy-n1-q17", 1, 17, 1, 5),
        _make(3, "toy-n2-q17", 2, 17, 1, 5),
        _make(4, "toy-n4-q17", 4, 17, 1, 5),
        _make(5, "toy-n8-q97", 8, 97, 1, 5),
        _make(6, "toy-n8-q257", 8, 257, 1, 5),
        _make(7, "toy-n64-q257", 64, 257, 1, 5),
        _make(8, "toy-n4-q19", 4, 19, 1, 5),
    )
}

DEFAULT_PARAM_SET = "newhope1024"


def get_param_set(key: Union[str, int]) -> ParamSet:
    """Look a parameter set up by name or wire id."""
    if isinstance(key, int) or (isinstance(key, str) and key.isdigit()):
        wanted = int(key)
        for ps in PARAM_SETS.values():
            if ps.param_id == wanted:
                return ps
        raise ParameterError(f"Unknown parameter set id: {wanted}")
    if key not in PARAM_SETS:
        raise ParameterError(
            f"Unknown parameter set '{key}'. Available: {', '.join(sorted(PARAM_SETS))}"
        )
    return PARAM_SETS[key]


@dataclass(frozen=True)
class NotInvertible:
    """Value returned when an inverse does not exist."""

    reason: str = ""


def _frozen_int_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.int64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RingElement:
    """An element of R_q with coefficients in canonical [0, q) form."""

    coeffs: np.ndarray
    param: ParamSet

    def __post_init__(self):
        arr = _frozen_int_array(self.coeffs)
        if arr.shape != (self.param.n,):
            raise ParameterError(
                f"RingElement needs {self.param.n} coefficients, got {arr.shape[0]}"
            )
        if arr.size and (arr.min() < 0 or arr.max() >= self.param.q):
            raise ParameterError("RingElement coefficients must lie in [0, q)")
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def from_coeffs(cls, values: Sequence[int], param: ParamSet) -> "RingElement":
        """Build from arbitrary integers, reducing mod q."""
        return cls(np.mod(np.asarray(values, dtype=np.int64), param.q), param)

    @classmethod
    def zero(cls, param: ParamSet) -> "RingElement":
        return cls(np.zeros(param.n, dtype=np.int64), param)

    @classmethod
    def one(cls, param: ParamSet) -> "RingElement":
        coeffs = np.zeros(param.n, dtype=np.int64)
        coeffs[0] = 1
        return cls(coeffs, param)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RingElement):
            return NotImplemented
        return self.param == other.param and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None

    def __add__(self, other: "RingElement") -> "RingElement":
        return ring_add(self, other)

    def __sub__(self, other: "RingElement") -> "RingElement":
        return ring_sub(self, other)

    def __neg__(self) -> "RingElement":
        return RingElement(np.mod(-self.coeffs, self.param.q), self.param)

    def __mul__(self, other: "RingElement") -> "RingElement":
        return poly_mul(self, other)

    def to_list(self) -> List[int]:
        return [int(c) for c in self.coeffs]

    def to_bytes(self) -> bytes:
        return encode_ring(self)

    def __repr__(self) -> str:
        head = ", ".join(str(int(c)) for c in self.coeffs[:8])
        more = ", ..." if self.param.n > 8 else ""
        return f"RingElement([{head}{more}], param={self.param.name})"


@dataclass(frozen=True, eq=False)
class CenteredPoly:
    """Integer polynomial with centered (unbounded) coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen_int_array(self.coeffs))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CenteredPoly):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None

    @property
    def n(self) -> int:
        return int(self.coeffs.shape[0])

    def max_abs(self) -> int:
        return int(np.abs(self.coeffs).max()) if self.coeffs.size else 0

    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.coeffs))

    def to_ring(self, param: ParamSet) -> RingElement:
        if self.n != param.n:
            raise ParameterError(f"Polynomial has {self.n} coefficients, ring needs {param.n}")
        return RingElement.from_coeffs(self.coeffs, param)

    def to_list(self) -> List[int]:
        return [int(c) for c in self.coeffs]


@dataclass(frozen=True, eq=False)
class CyclicRingElement:
    """Element of Z_q[X]/(X^N - 1), the NTRU convolution ring."""

    coeffs: np.ndarray
    N: int
    q: int

    def __post_init__(self):
        arr = _frozen_int_array(self.coeffs)
        if self.N < 1 or arr.shape != (self.N,):
            raise ParameterError(f"CyclicRingElement needs {self.N} coefficients")
        if self.q < 2:
            raise ParameterError("modulus must be at least 2")
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            raise ParameterError("CyclicRingElement coefficients must lie in [0, q)")
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def from_coeffs(cls, values: Sequence[int], N: int, q: int) -> "CyclicRingElement":
        padded = np.zeros(N, dtype=np.int64)
        values = np.asarray(values, dtype=np.int64)
        if values.shape[0] > N:
            raise ParameterError(f"At most {N} coefficients allowed")
        padded[: values.shape[0]] = values
        return cls(np.mod(padded, q), N, q)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CyclicRingElement):
            return NotImplemented
        return (self.N, self.q) == (other.N, other.q) and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None

    def __mul__(self, other: "CyclicRingElement") -> "CyclicRingElement":
        return cyclic_mul(self, other)

    def __add__(self, other: "CyclicRingElement") -> "CyclicRingElement":
        _check_same_cyclic(self, other)
        return CyclicRingElement(np.mod(self.coeffs + other.coeffs, self.q), self.N, self.q)

    def eval_at_one(self) -> int:
        return int(self.coeffs.sum() % self.q)

    def to_list(self) -> List[int]:
        return [int(c) for c in self.coeffs]


def _check_same_param(x: RingElement, y: RingElement) -> None:
    if x.param != y.param:
        raise ParameterError(
            f"Ring elements come from different parameter sets ({x.param.name} vs {y.param.name})"
        )


def _check_same_cyclic(x: CyclicRingElement, y: CyclicRingElement) -> None:
    if (x.N, x.q) != (y.N, y.q):
        raise ParameterError(f"Cyclic ring mismatch: (N={x.N}, q={x.q}) vs (N={y.N}, q={y.q})")


def ring_add(x: RingElement, y: RingElement) -> RingElement:
    _check_same_param(x, y)
    return RingElement(np.mod(x.coeffs + y.coeffs, x.param.q), x.param)


def ring_sub(x: RingElement, y: RingElement) -> RingElement:
    _check_same_param(x, y)
    return RingElement(np.mod(x.coeffs - y.coeffs, x.param.q), x.param)


def ring_mul(x: RingElement, y: RingElement) -> RingElement:
    """Schoolbook negacyclic product, the O(n^2) reference path.

    Coefficients are < 2^16, so every partial sum of n products fits in int64.
    """
    _check_same_param(x, y)
    n, q = x.param.n, x.param.q
    full = np.convolve(x.coeffs, y.coeffs)
    low = full[:n].copy()
    # X^n = -1 folds the upper half back with a sign flip.
    low[: n - 1] -= full[n:]
    return RingElement(np.mod(low, q), x.param)


class _NttTables(NamedTuple):
    psi_pows: np.ndarray
    psi_inv_pows: np.ndarray
    omega_pows: np.ndarray
    omega_inv_pows: np.ndarray
    bitrev: np.ndarray
    n_inv: int


@lru_cache(maxsize=None)
def _ntt_tables(n: int, q: int, psi: int) -> _NttTables:
    psi_inv = pow(psi, -1, q)
    omega = psi * psi % q
    omega_inv = pow(omega, -1, q)
    width = n.bit_length() - 1
    bitrev = np.array(
        [int(format(i, f"0{width}b")[::-1], 2) if width else 0 for i in range(n)],
        dtype=np.int64,
    )
    return _NttTables(
        psi_pows=np.array([pow(psi, i, q) for i in range(n)], dtype=np.int64),
        psi_inv_pows=np.array([pow(psi_inv, i, q) for i in range(n)], dtype=np.int64),
        omega_pows=np.array([pow(omega, i, q) for i in range(n)], dtype=np.int64),
        omega_inv_pows=np.array([pow(omega_inv, i, q) for i in range(n)], dtype=np.int64),
        bitrev=bitrev,
        n_inv=pow(n, -1, q),
    )


def _tables_for(param: ParamSet) -> _NttTables:
    if not param.ntt_supported:
        raise UnsupportedParameterError(
            f"Parameter set '{param.name}' has no NTT: q={param.q} is not 1 mod 2n={2 * param.n}"
        )
    return _ntt_tables(param.n, param.q, param.psi)


def _cyclic_transform(values: np.ndarray, root_pows: np.ndarray, bitrev: np.ndarray, q: int) -> np.ndarray:
    # Iterative radix-2 Cooley-Tukey on bit-reversed input, one numpy pass per stage.
    n = values.shape[0]
    a = values[bitrev]
    length = 2
    while length <= n:
        half = length // 2
        twiddles = root_pows[(n // length) * np.arange(half)]
        blocks = a.reshape(-1, length)
        even = blocks[:, :half]
        odd = blocks[:, half:] * twiddles % q
        a = np.concatenate(((even + odd) % q, (even - odd) % q), axis=1).reshape(n)
        length *= 2
    return a


def forward_ntt(x: RingElement) -> np.ndarray:
    """Evaluate x at psi^(2k+1) for k = 0..n-1 (natural order)."""
    tables = _tables_for(x.param)
    twisted = x.coeffs * tables.psi_pows % x.param.q
    return _cyclic_transform(twisted, tables.omega_pows, tables.bitrev, x.param.q)


def inverse_ntt(values: Sequence[int], param: ParamSet) -> RingElement:
    tables = _tables_for(param)
    q = param.q
    arr = np.mod(np.asarray(values, dtype=np.int64), q)
    if arr.shape != (param.n,):
        raise ParameterError(f"NTT vector needs {param.n} entries")
    y = _cyclic_transform(arr, tables.omega_inv_pows, tables.bitrev, q) * tables.n_inv % q
    return RingElement(y * tables.psi_inv_pows % q, param)


def ntt_mul(x: RingElement, y: RingElement) -> RingElement:
    _check_same_param(x, y)
    product = forward_ntt(x) * forward_ntt(y) % x.param.q
    return inverse_ntt(product, x.param)


def poly_mul(x: RingElement, y: RingElement) -> RingElement:
    """Ring product through the fastest available path."""
    if x.param.ntt_supported:
        return ntt_mul(x, y)
    return ring_mul(x, y)


def poly_inverse_mod(coeffs: Sequence[int], modulus_coeffs: Sequence[int], q: int) -> Optional[List[int]]:
    """Inverse of a polynomial modulo another over GF(q), low-to-high coefficients.

    Returns None when gcd != 1.
    """
    if not any(int(c) % q for c in coeffs):
        return None
    f = Poly([int(c) for c in reversed(list(coeffs))], _X, modulus=q)
    g = Poly([int(c) for c in reversed(list(modulus_coeffs))], _X, modulus=q)
    try:
        inv = f.invert(g)
    except _SympyNotInvertible:
        return None
    out = [int(c) % q for c in reversed(inv.all_coeffs())]
    size = max(len(modulus_coeffs) - 1, 1)
    return (out + [0] * size)[:size]


def ring_inverse(x: RingElement, method: str = "auto") -> Union[RingElement, NotInvertible]:
    """Inverse in R_q, or a NotInvertible value.

    ``method`` is ``"auto"`` (NTT when supported), ``"ntt"`` or ``"euclid"``.
    On the NTT path x is invertible iff none of its evaluations is zero.
    """
    param = x.param
    if method not in ("auto", "ntt", "euclid"):
        raise ParameterError(f"Unknown inversion method: {method}")
    use_ntt = method == "ntt" or (method == "auto" and param.ntt_supported)
    if use_ntt:
        evaluations = forward_ntt(x)
        zeros = np.flatnonzero(evaluations == 0)
        if zeros.size:
            return NotInvertible(f"NTT component {int(zeros[0])} is zero")
        inverted = [pow(int(c), -1, param.q) for c in evaluations]
        return inverse_ntt(inverted, param)

    modulus = [1] + [0] * (param.n - 1) + [1]
    inv = poly_inverse_mod(x.to_list(), modulus, param.q)
    if inv is None:
        return NotInvertible("gcd with X^n + 1 is not 1")
    return RingElement(inv, param)


def scalar_inverse(c: int, q: int) -> int:
    if math.gcd(c, q) != 1:
        raise ParameterError(f"{c} has no inverse modulo {q}")
    return pow(c, -1, q)


def centered_lift(x: RingElement) -> CenteredPoly:
    """Map each coefficient to its representative in [-(q-1)/2, (q-1)/2]."""
    c = x.coeffs
    return CenteredPoly(np.where(c > x.param.half_q, c - x.param.q, c))


def reduce_mod_p_centered(x: CenteredPoly, p: int) -> CenteredPoly:
    if p < 3 or p % 2 == 0:
        raise ParameterError(f"p must be an odd modulus >= 3, got {p}")
    half = (p - 1) // 2
    return CenteredPoly(np.mod(x.coeffs + half, p) - half)


def eval_at_one(x: RingElement) -> int:
    return int(x.coeffs.sum() % x.param.q)


def cyclic_mul(x: CyclicRingElement, y: CyclicRingElement) -> CyclicRingElement:
    _check_same_cyclic(x, y)
    N = x.N
    full = np.convolve(x.coeffs, y.coeffs)
    folded = full[:N].copy()
    folded[: N - 1] += full[N:]
    return CyclicRingElement(np.mod(folded, x.q), N, x.q)


def encode_ring(x: RingElement) -> bytes:
    """Coefficients as 16-bit little-endian unsigned integers in index order."""
    if x.param.q >= MAX_WIRE_MODULUS:
        raise UnsupportedParameterError("Wire encoding needs q < 2^16")
    return x.coeffs.astype("<u2").tobytes()


def decode_ring(data: bytes, param: ParamSet) -> RingElement:
    expected = 2 * param.n
    if len(data) < expected:
        raise TruncatedMessageError(f"Ring element needs {expected} bytes, got {len(data)}")
    coeffs = np.frombuffer(data[:expected], dtype="<u2").astype(np.int64)
    bad = np.flatnonzero(coeffs >= param.q)
    if bad.size:
        index = int(bad[0])
        raise CoefficientRangeError(
            f"Coefficient {index} = {int(coeffs[index])} is not below q = {param.q}"
        )
    return RingElement(coeffs, param)
