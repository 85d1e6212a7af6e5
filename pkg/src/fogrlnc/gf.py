"""Arithmetic over binary extension fields GF(2^m), 1 <= m <= 8.

Field elements are plain integers in ``[0, 2**m)``. Scalar operations are
exposed as methods on :class:`FieldSpec`; the precomputed ``mul_table`` and
``inv_table`` arrays let callers apply the same arithmetic to whole numpy
vectors with fancy indexing.
"""

from __future__ import annotations

import numpy as np

#: Default reduction polynomial per extension degree (bit i = coefficient of x^i).
DEFAULT_POLYS = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11D,
}


class FieldError(ValueError):
    pass


def _degree(p: int) -> int:
    return p.bit_length() - 1


def _polymod(a: int, b: int) -> int:
    db = _degree(b)
    while a and _degree(a) >= db:
        a ^= b << (_degree(a) - db)
    return a


def is_irreducible(poly: int) -> bool:
    """Trial division by every polynomial of degree 1..deg/2 over GF(2)."""
    d = _degree(poly)
    if d < 1:
        return False
    for divisor in range(2, 1 << (d // 2 + 1)):
        if _polymod(poly, divisor) == 0:
            return False
    return True


def clmul_reduce(a: int, b: int, poly: int) -> int:
    """Carry-less product of ``a`` and ``b`` reduced modulo ``poly``."""
    m = _degree(poly)
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> m & 1:
            a ^= poly
    return result


class FieldSpec:
    """The field GF(2^m) with a fixed reduction polynomial.

    Instances are immutable once built and may be shared freely between
    threads.

    >>> gf = FieldSpec(8)
    >>> hex(gf.mul(0x02, 0x80))
    '0x1d'
    """

    __slots__ = ("m", "poly", "q", "mul_table", "inv_table")

    def __init__(self, m: int, poly: int | None = None):
        if not isinstance(m, (int, np.integer)) or not 1 <= m <= 8:
            raise FieldError(f"extension degree must be in 1..8, got {m!r}")
        m = int(m)
        poly = DEFAULT_POLYS[m] if poly is None else int(poly)
        if _degree(poly) != m:
            raise FieldError(f"polynomial {poly:#x} does not have degree {m}")
        if not is_irreducible(poly):
            raise FieldError(f"polynomial {poly:#x} is reducible over GF(2)")
        q = 1 << m
        table = np.zeros((q, q), dtype=np.uint8)
        for a in range(q):
            for b in range(a, q):
                table[a, b] = table[b, a] = clmul_reduce(a, b, poly)
        inv = np.zeros(q, dtype=np.uint8)
        for a in range(1, q):
            # every nonzero row of a field multiplication table is a permutation
            inv[a] = int(np.flatnonzero(table[a] == 1)[0])
        table.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "poly", poly)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "mul_table", table)
        object.__setattr__(self, "inv_table", inv)

    def __setattr__(self, name, value):
        raise AttributeError("FieldSpec is immutable")

    @classmethod
    def from_order(cls, q: int) -> "FieldSpec":
        """Field with ``q`` elements, ``q`` in {2, 4, ..., 256}."""
        if q < 2 or q & (q - 1) or q > 256:
            raise FieldError(f"field order must be a power of two in 2..256, got {q}")
        return cls(q.bit_length() - 1)

    def __repr__(self) -> str:
        return f"FieldSpec(m={self.m}, poly={self.poly:#x})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FieldSpec) and (self.m, self.poly) == (other.m, other.poly)

    def __hash__(self) -> int:
        return hash((self.m, self.poly))

    def check(self, a: int) -> int:
        if not 0 <= a < self.q:
            raise FieldError(f"{a!r} is not an element of GF({self.q})")
        return a

    def add(self, a: int, b: int) -> int:
        return self.check(a) ^ self.check(b)

    sub = add

    def mul(self, a: int, b: int) -> int:
        return int(self.mul_table[self.check(a), self.check(b)])

    def inv(self, a: int) -> int:
        if self.check(a) == 0:
            raise ZeroDivisionError("no inverse for zero")
        return int(self.inv_table[a])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def scale(self, vec: np.ndarray, c: int) -> np.ndarray:
        """Multiply every symbol of ``vec`` by the scalar ``c``."""
        return self.mul_table[c][vec]
