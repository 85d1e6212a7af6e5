"""Slow, independent reference implementations used as test oracles.

Nothing here imports fogrlnc: each routine is written from the textbook
definition so the library can be checked against it.
"""

import itertools


def gf_mul(a, b, poly):
    """Shift-and-add multiplication in GF(2)[x] / poly."""
    m = poly.bit_length() - 1
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= poly
    return result


def gf_inv(a, poly):
    """Inverse by exhaustive search."""
    q = 1 << (poly.bit_length() - 1)
    for x in range(1, q):
        if gf_mul(a, x, poly) == 1:
            return x
    raise ZeroDivisionError(a)


def xorshift32(state):
    state ^= (state << 13) & 0xFFFFFFFF
    state ^= state >> 17
    state ^= (state << 5) & 0xFFFFFFFF
    return state


def coding_vector(seed, K, q):
    state = seed or 0x9E3779B9
    out = []
    for _ in range(K):
        state = xorshift32(state)
        out.append(state & (q - 1))
    return out


def rank(rows, poly):
    """Rank of a list of integer rows over GF(2^m) by plain elimination."""
    rows = [list(r) for r in rows]
    r = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        pivot = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = gf_inv(rows[r][c], poly)
        rows[r] = [gf_mul(inv, v, poly) for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [v ^ gf_mul(f, w, poly) for v, w in zip(rows[i], rows[r])]
        r += 1
    return r


def full_rank_fraction(K, n, q, poly):
    """Exact fraction of K x n matrices over GF(q) with rank K (enumeration)."""
    hits = total = 0
    for entries in itertools.product(range(q), repeat=K * n):
        cols = [entries[i * K : (i + 1) * K] for i in range(n)]
        total += 1
        hits += rank(cols, poly) == K
    return hits / total
