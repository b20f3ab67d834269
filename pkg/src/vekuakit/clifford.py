"""Real Clifford algebra Cl(0, n) with bitmask-indexed blades.

A blade ``e_A`` is stored under the integer whose bits are the generators in
``A`` (bit ``i-1`` for ``e_i``), so index 0 is the scalar unit.  Products use a
precomputed sign table; ``e_i e_i = -1`` for every generator.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_DIMENSION = 5


class DimensionError(ValueError):
    """Operands live in algebras of different dimension."""


def popcount(x: int) -> int:
    return bin(x).count("1")


def _reorder_sign(a: int, b: int) -> int:
    # transpositions needed to bring e_A e_B into canonical order
    a >>= 1
    swaps = 0
    while a:
        swaps += popcount(a & b)
        a >>= 1
    return -1 if swaps & 1 else 1


def blade_sign(a: int, b: int) -> int:
    """Sign s with e_A e_B = s e_{A xor B} in Cl(0, n)."""
    s = _reorder_sign(a, b)
    # each shared generator contracts as e_i e_i = -1
    if popcount(a & b) & 1:
        s = -s
    return s


@dataclass(frozen=True)
class BladeTable:
    """Product signs and grade data for Cl(0, n), built once per ``n``."""

    n: int
    sign: np.ndarray          # (2^n, 2^n), entries +-1
    grade: np.ndarray         # (2^n,)
    conj_sign: np.ndarray     # (2^n,), (-1)^{|B|(|B|+1)/2}
    tensor: np.ndarray        # (2^n, 2^n, 2^n), c_C = sum a_A b_B tensor[A, B, C]

    @property
    def size(self) -> int:
        return 1 << self.n

    def result(self, a: int, b: int) -> int:
        return a ^ b


@lru_cache(maxsize=None)
def blade_table(n: int) -> BladeTable:
    if not 1 <= n <= MAX_DIMENSION:
        raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}], got {n}")
    size = 1 << n
    sign = np.empty((size, size), dtype=np.int8)
    tensor = np.zeros((size, size, size))
    for a in range(size):
        for b in range(size):
            s = blade_sign(a, b)
            sign[a, b] = s
            tensor[a, b, a ^ b] = s
    grade = np.array([popcount(a) for a in range(size)])
    conj_sign = np.where((grade * (grade + 1) // 2) % 2 == 0, 1.0, -1.0)
    for arr in (sign, tensor, grade, conj_sign):
        arr.setflags(write=False)
    return BladeTable(n, sign, grade, conj_sign, tensor)


def blade_index(indices: Iterable[int]) -> int:
    """Bitmask of the blade e_{i1} e_{i2} ... (1-based generator labels, distinct)."""
    mask = 0
    for i in indices:
        if i < 1:
            raise ValueError("generator labels start at 1")
        if mask & (1 << (i - 1)):
            raise ValueError(f"repeated generator e_{i}")
        mask |= 1 << (i - 1)
    return mask


def blade_name(mask: int) -> str:
    if mask == 0:
        return "1"
    return "e" + "".join(str(i + 1) for i in range(mask.bit_length()) if mask >> i & 1)


# -- array level: coefficients live on the trailing axis -----------------------

def _dim_of(arr: np.ndarray) -> int:
    size = arr.shape[-1]
    n = size.bit_length() - 1
    if size != 1 << n:
        raise DimensionError(f"trailing axis {size} is not a power of two")
    return n


def geometric_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Broadcast Clifford product of coefficient arrays (trailing axis = blades)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"cannot multiply {a.shape[-1]}- and {b.shape[-1]}-blade arrays")
    tab = blade_table(_dim_of(a))
    return np.einsum("...a,...b,abc->...c", a, b, tab.tensor)


def conjugate_coeffs(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a * blade_table(_dim_of(a)).conj_sign


def left_matrix(a: np.ndarray) -> np.ndarray:
    """Matrices L with ``L @ b == a * b``; shape (..., 2^n, 2^n)."""
    a = np.asarray(a, dtype=float)
    tab = blade_table(_dim_of(a))
    return np.einsum("...a,abc->...cb", a, tab.tensor)


def right_matrix(b: np.ndarray) -> np.ndarray:
    """Matrices R with ``R @ a == a * b``; shape (..., 2^n, 2^n)."""
    b = np.asarray(b, dtype=float)
    tab = blade_table(_dim_of(b))
    return np.einsum("...b,abc->...ca", b, tab.tensor)


def generator_left_matrices(n: int) -> list[np.ndarray]:
    """Signed permutation matrices for left multiplication by e_1, ..., e_n."""
    out = []
    for i in range(n):
        e = np.zeros(1 << n)
        e[1 << i] = 1.0
        out.append(left_matrix(e))
    return out


# -- value type ---------------------------------------------------------------

class Multivector:
    """An element of Cl(0, n): 2^n real coefficients indexed by blade bitmask."""

    __slots__ = ("coeffs", "n")

    def __init__(self, coeffs: Sequence[float] | np.ndarray, n: int | None = None):
        c = np.array(coeffs, dtype=float).reshape(-1)
        dim = _dim_of(c)
        if n is not None and n != dim:
            raise DimensionError(f"{c.size} coefficients do not match n={n}")
        if dim < 1 or dim > MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}], got {dim}")
        if not np.all(np.isfinite(c)):
            raise ValueError("multivector coefficients must be finite")
        self.coeffs = c
        self.n = dim

    @classmethod
    def zero(cls, n: int) -> Multivector:
        return cls(np.zeros(1 << n))

    @classmethod
    def scalar(cls, value: float, n: int) -> Multivector:
        c = np.zeros(1 << n)
        c[0] = value
        return cls(c)

    @classmethod
    def blade(cls, n: int, mask: int | Iterable[int], coeff: float = 1.0) -> Multivector:
        if not isinstance(mask, (int, np.integer)):
            mask = blade_index(mask)
        if mask >= 1 << n:
            raise ValueError(f"blade {mask:b} does not exist for n={n}")
        c = np.zeros(1 << n)
        c[mask] = coeff
        return cls(c)

    @classmethod
    def vector(cls, x: Sequence[float]) -> Multivector:
        x = np.asarray(x, dtype=float)
        c = np.zeros(1 << x.size)
        c[[1 << i for i in range(x.size)]] = x
        return cls(c)

    def _check(self, other: Multivector) -> None:
        if other.n != self.n:
            raise DimensionError(f"dimension mismatch: {self.n} vs {other.n}")

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return mv_multiply(self, other)
        return Multivector(self.coeffs * float(other))

    def __rmul__(self, other):
        return Multivector(self.coeffs * float(other))

    def __truediv__(self, other: float) -> Multivector:
        return Multivector(self.coeffs / float(other))

    def __add__(self, other):
        if isinstance(other, Multivector):
            self._check(other)
            return Multivector(self.coeffs + other.coeffs)
        return self + Multivector.scalar(float(other), self.n)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self) -> Multivector:
        return Multivector(-self.coeffs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Multivector) and other.n == self.n and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.n, self.coeffs.tobytes()))

    def __getitem__(self, mask: int) -> float:
        return float(self.coeffs[mask])

    def allclose(self, other: Multivector, atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def conj(self) -> Multivector:
        return conjugate(self)

    def __repr__(self) -> str:
        terms = [f"{c:+.6g}*{blade_name(i)}" for i, c in enumerate(self.coeffs) if c != 0.0]
        return f"Multivector({' '.join(terms) or '0'}, n={self.n})"


def mv_multiply(a: Multivector, b: Multivector) -> Multivector:
    if a.n != b.n:
        raise DimensionError(f"dimension mismatch: {a.n} vs {b.n}")
    return Multivector(geometric_product(a.coeffs, b.coeffs))


def conjugate(a: Multivector) -> Multivector:
    """Clifford conjugation: conj(e_B) = (-1)^{|B|(|B|+1)/2} e_B."""
    return Multivector(conjugate_coeffs(a.coeffs))


def scalar_part(a: Multivector) -> float:
    return float(a.coeffs[0])


def nonscalar_part(a: Multivector) -> Multivector:
    c = a.coeffs.copy()
    c[0] = 0.0
    return Multivector(c)


def blade_square(n: int, mask: int) -> Multivector:
    """e_B e_B as a multivector (always a scalar +-1)."""
    e = Multivector.blade(n, mask)
    return e * e
