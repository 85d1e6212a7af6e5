"""Generation-based random linear network coding.

A source message (generation) of ``K`` packets, each ``L`` field symbols
long, is turned into coded packets ``c = sum_i g_i * s_i``. The coefficients
``g`` are never transmitted: they are regenerated from a 32-bit seed with a
xorshift PRNG shared by encoder and decoder. Decoding is online Gaussian
elimination, one received packet at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gf import FieldSpec

MASK32 = 0xFFFFFFFF
#: Replacement for a zero seed; xorshift has an all-zero fixed point.
ZERO_SEED_REMAP = 0x9E3779B9


class DecodeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# PRNG and coding vectors


def remap_seed(seed: int) -> int:
    seed &= MASK32
    return ZERO_SEED_REMAP if seed == 0 else seed


def prng_next(state: int) -> tuple[int, int]:
    """One xorshift32 (13/17/5) step. Returns ``(new_state, output)``."""
    if state == 0:
        raise ValueError("xorshift state must be nonzero")
    s = state & MASK32
    s ^= (s << 13) & MASK32
    s ^= s >> 17
    s ^= (s << 5) & MASK32
    return s, s


class Prng:
    """Stateful wrapper around :func:`prng_next`."""

    def __init__(self, seed: int):
        self.state = remap_seed(seed)

    def next(self) -> int:
        self.state, out = prng_next(self.state)
        return out


def coding_vector_from_seed(seed: int, K: int, field: FieldSpec) -> np.ndarray:
    """The ``K`` coefficients a packet with this seed was coded with.

    Zero and repeated vectors are legitimate draws and are returned as is.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = Prng(seed)
    mask = field.q - 1
    return np.array([rng.next() & mask for _ in range(K)], dtype=np.uint8)


def coding_vectors(seeds, K: int, field: FieldSpec) -> np.ndarray:
    """Vectorised :func:`coding_vector_from_seed` over an array of seeds.

    Returns an array of shape ``seeds.shape + (K,)``.
    """
    s = np.asarray(seeds, dtype=np.uint32).copy()
    s[s == 0] = ZERO_SEED_REMAP
    out = np.empty(s.shape + (K,), dtype=np.uint8)
    mask = np.uint32(field.q - 1)
    for i in range(K):
        s ^= s << np.uint32(13)
        s ^= s >> np.uint32(17)
        s ^= s << np.uint32(5)
        out[..., i] = s & mask
    return out


# ---------------------------------------------------------------------------
# Symbol packing


def pack_symbols(symbols, m: int) -> bytes:
    """Pack m-bit symbols MSB-first into ``ceil(len * m / 8)`` bytes."""
    sym = np.asarray(symbols, dtype=np.uint8)
    if m == 8:
        return sym.tobytes()
    shifts = np.arange(m - 1, -1, -1, dtype=np.uint8)
    bits = (sym[:, None] >> shifts) & 1
    return np.packbits(bits.ravel()).tobytes()


def unpack_symbols(data: bytes, m: int, count: int | None = None) -> np.ndarray:
    """Inverse of :func:`pack_symbols`.

    Without ``count`` every whole symbol the bytes can hold is returned;
    trailing pad bits are dropped.
    """
    raw = np.frombuffer(bytes(data), dtype=np.uint8)
    if m == 8:
        sym = raw.copy()
    else:
        bits = np.unpackbits(raw)
        n = len(bits) // m
        weights = (1 << np.arange(m - 1, -1, -1)).astype(np.uint8)
        sym = (bits[: n * m].reshape(n, m) * weights).sum(axis=1).astype(np.uint8)
    if count is not None:
        if count > len(sym):
            raise DecodeError(f"need {count} symbols, buffer holds {len(sym)}")
        sym = sym[:count]
    return sym


def payload_bytes(L: int, m: int) -> int:
    return (L * m + 7) // 8


# ---------------------------------------------------------------------------
# Generations and coded packets


@dataclass(eq=False)
class Generation:
    """One source message: ``K`` packets of ``L`` symbols.

    ``byte_length`` is the number of meaningful data bytes; everything after
    it is zero padding added by :func:`segment`.
    """

    message_id: int
    K: int
    L: int
    field: FieldSpec
    packets: np.ndarray
    byte_length: int = 0

    def __post_init__(self):
        if self.K < 1 or self.L < 1:
            raise ValueError("K and L must be >= 1")
        if not 0 <= self.message_id <= MASK32:
            raise ValueError("message_id must fit in 32 bits")
        self.packets = np.asarray(self.packets, dtype=np.uint8)
        if self.packets.shape != (self.K, self.L):
            raise ValueError(f"expected {self.K}x{self.L} packets, got {self.packets.shape}")
        if self.packets.size and int(self.packets.max()) >= self.field.q:
            raise ValueError("packet symbol outside the field")

    @property
    def capacity(self) -> int:
        return generation_capacity(self.K, self.L, self.field)

    def data(self) -> bytes:
        """The original bytes, padding stripped."""
        return desegment(self.packets, self.field, self.byte_length)


def generation_capacity(K: int, L: int, field: FieldSpec) -> int:
    """Whole bytes a ``K x L`` generation over ``field`` can carry."""
    return K * L * field.m // 8


def segment(data: bytes, K: int, L: int, field: FieldSpec, message_id: int = 0) -> Generation:
    """Split ``data`` symbol-wise into a zero-padded ``K x L`` generation."""
    if K < 1 or L < 1:
        raise ValueError("K and L must be >= 1")
    data = bytes(data)
    cap = generation_capacity(K, L, field)
    if len(data) > cap:
        raise ValueError(f"{len(data)} bytes exceed generation capacity of {cap} bytes")
    bits = np.zeros(K * L * field.m, dtype=np.uint8)
    raw = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    bits[: len(raw)] = raw
    weights = (1 << np.arange(field.m - 1, -1, -1)).astype(np.uint8)
    packets = (bits.reshape(K * L, field.m) * weights).sum(axis=1).astype(np.uint8)
    return Generation(message_id, K, L, field, packets.reshape(K, L), len(data))


def desegment(packets, field: FieldSpec, byte_length: int) -> bytes:
    flat = np.asarray(packets, dtype=np.uint8).ravel()
    return pack_symbols(flat, field.m)[:byte_length]


@dataclass(eq=False)
class CodedPacket:
    message_id: int
    seed: int
    payload: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, CodedPacket)
            and self.message_id == other.message_id
            and self.seed == other.seed
            and np.array_equal(self.payload, other.payload)
        )


def combine(vector, packets: np.ndarray, field: FieldSpec) -> np.ndarray:
    """Linear combination ``sum_i vector[i] * packets[i]`` over ``field``."""
    out = np.zeros(packets.shape[1], dtype=np.uint8)
    for g, row in zip(np.asarray(vector, dtype=np.uint8), packets):
        if g:
            out ^= field.mul_table[g][row]
    return out


def encode(gen: Generation, seed: int) -> CodedPacket:
    """Coded packet whose coefficients are drawn from ``seed``.

    The coefficient generator is linear over GF(2): if ``a ^ b ^ c == d`` the
    vector of ``d`` is the sum of the other three. Seeds that are XOR-related,
    such as runs of consecutive integers, therefore yield dependent packets;
    use :func:`fogrlnc.facility.derive_seed` or random seeds.
    """
    seed &= MASK32
    vec = coding_vector_from_seed(seed, gen.K, gen.field)
    return CodedPacket(gen.message_id, seed, combine(vec, gen.packets, gen.field))


# ---------------------------------------------------------------------------
# Decoding


class Decoder:
    """Online Gaussian elimination for one generation.

    Rows are ``[coding vector | payload]`` and are kept in reduced row
    echelon form after every ingest, indexed by pivot column. Not safe for
    concurrent mutation.
    """

    def __init__(self, K: int, L: int, field: FieldSpec, message_id: int | None = None):
        if K < 1 or L < 0:
            raise ValueError("K must be >= 1 and L >= 0")
        self.K = K
        self.L = L
        self.field = field
        self.message_id = message_id
        self.rows: dict[int, np.ndarray] = {}

    @property
    def rank(self) -> int:
        return len(self.rows)

    @property
    def complete(self) -> bool:
        return len(self.rows) == self.K

    def ingest(self, pkt: CodedPacket) -> bool:
        """Add a coded packet; True if it raised the rank."""
        if self.message_id is not None and pkt.message_id != self.message_id:
            raise DecodeError(
                f"packet for message {pkt.message_id} fed to decoder of message {self.message_id}"
            )
        if len(pkt.payload) != self.L:
            raise DecodeError(f"payload has {len(pkt.payload)} symbols, expected {self.L}")
        vec = coding_vector_from_seed(pkt.seed, self.K, self.field)
        return self.ingest_row(vec, pkt.payload)

    def ingest_row(self, vector, payload=None) -> bool:
        """Add an explicit ``(coding vector, payload)`` row."""
        row = np.zeros(self.K + self.L, dtype=np.uint8)
        row[: self.K] = vector
        if self.L:
            row[self.K :] = payload
        if self.complete:
            return False
        mul = self.field.mul_table
        for col, pivot_row in self.rows.items():
            c = row[col]
            if c:
                row ^= mul[c][pivot_row]
        nz = np.flatnonzero(row[: self.K])
        if nz.size == 0:
            return False
        col = int(nz[0])
        row = mul[self.field.inv_table[row[col]]][row]
        for other, other_row in self.rows.items():
            c = other_row[col]
            if c:
                other_row ^= mul[c][row]
        self.rows[col] = row
        return True

    def recover(self) -> np.ndarray | None:
        """The ``K x L`` source packets, or None while rank < K."""
        if not self.complete:
            return None
        return np.stack([self.rows[i][self.K :] for i in range(self.K)])


# ---------------------------------------------------------------------------
# Batched rank tracking (Monte Carlo)


def rank_trajectory(vectors: np.ndarray, field: FieldSpec, mask: np.ndarray | None = None) -> np.ndarray:
    """Rank after each column for a batch of coding-vector sequences.

    ``vectors`` has shape ``(B, n, K)``; row ``b`` is the sequence of coding
    vectors offered to decoder ``b``. ``mask[b, j]`` False means vector ``j``
    was erased. Returns int16 ranks of shape ``(B, n)``.
    """
    vectors = np.asarray(vectors, dtype=np.uint8)
    B, n, K = vectors.shape
    if mask is None:
        mask = np.ones((B, n), dtype=bool)
    mul, inv = field.mul_table, field.inv_table
    basis = np.zeros((B, K, K), dtype=np.uint8)
    has_pivot = np.zeros((B, K), dtype=bool)
    rank = np.zeros(B, dtype=np.int16)
    out = np.empty((B, n), dtype=np.int16)
    for j in range(n):
        idx = np.flatnonzero(mask[:, j] & (rank < K))
        if idx.size:
            v = vectors[idx, j, :].copy()
            bas = basis[idx]
            hp = has_pivot[idx]
            for c in range(K):
                coef = np.where(hp[:, c], v[:, c], 0).astype(np.uint8)
                v ^= mul[coef[:, None], bas[:, c, :]]
            nonzero = v != 0
            new = nonzero.any(axis=1)
            if new.any():
                v = v[new]
                first = nonzero[new].argmax(axis=1)
                scale = inv[v[np.arange(len(v)), first]]
                v = mul[scale[:, None], v]
                rows = idx[new]
                basis[rows, first, :] = v
                has_pivot[rows, first] = True
                rank[rows] += 1
        out[:, j] = rank
    return out


# ---------------------------------------------------------------------------
# Analytic recovery probability


def _check_order(q: int) -> None:
    if q < 2 or q & (q - 1):
        raise ValueError(f"q must be a power of two, got {q}")


def recovery_probability(n: int, K: int, q: int) -> float:
    """Probability that ``n`` uniformly random coded packets have rank ``K``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    _check_order(q)
    if n < K:
        return 0.0
    p = 1.0
    for t in range(K):
        p *= 1.0 - float(q) ** -(n - t)
    return p


def delivery_curve(N: int, per: float, K: int, q: int) -> float:
    """Recovery probability after ``N`` transmissions over an erasure channel.

    Each transmission is lost independently with probability ``per``.
    """
    if not 0.0 <= per <= 1.0:
        raise ValueError("per must lie in [0, 1]")
    if N < 0:
        raise ValueError("N must be >= 0")
    total = 0.0
    for n in range(K, N + 1):
        total += math.comb(N, n) * (1.0 - per) ** n * per ** (N - n) * recovery_probability(n, K, q)
    return total
