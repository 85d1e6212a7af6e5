"""
Arithmetic in GF(2^m)
=====================

Every coded symbol is an element of a binary extension field. Addition is
XOR; multiplication is polynomial multiplication modulo an irreducible
polynomial, done here by table lookup.
"""

import numpy as np

from fogrlnc.gf import FieldSpec

F = FieldSpec(8)  # GF(256), polynomial x^8 + x^4 + x^3 + x^2 + 1
print(F)

# addition and subtraction are the same operation
print("0x53 + 0xCA =", hex(F.add(0x53, 0xCA)))

# multiplying by x (i.e. 2) shifts left and reduces on overflow
print("2 * 0x80    =", hex(F.mul(2, 0x80)))

# every nonzero element has an inverse
a = 0x53
print(f"inv({a:#x}) = {F.inv(a):#x};  check: {F.mul(a, F.inv(a))}")

# whole vectors are scaled at once through the multiplication table
vec = np.array([1, 2, 3, 250], dtype=np.uint8)
print("7 * vec =", F.scale(vec, 7))

# smaller fields work the same way
G = FieldSpec.from_order(16)
print("in GF(16): inv(2) =", G.inv(2))
