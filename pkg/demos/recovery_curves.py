"""
Analytic recovery probability
=============================

``recovery_probability(n, K, q)`` is the chance that n random coded packets
span the K-dimensional source space. ``delivery_curve`` folds in an erasure
channel: of N transmissions each is lost with probability ``per``.
"""

from fogrlnc import delivery_curve, recovery_probability

K = 5
print(" n   R(q=2)   R(q=256)")
for n in range(K, K + 8):
    print(f"{n:2d}  {recovery_probability(n, K, 2):.4f}   {recovery_probability(n, K, 256):.4f}")

print("\nN transmissions over a PER 0.4 link, K=5, q=256")
for N in (5, 10, 15, 20, 25):
    print(f"N={N:2d}: {delivery_curve(N, 0.4, K, 256):.4f}")
