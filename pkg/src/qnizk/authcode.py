"""Trap-based authentication code over a concatenated Steane code.

Encoded states stay symbolic: a handle carries the logical statevector and
the key, and measurement outcomes are sampled from the factorized law
(logical outcome, uniform codeword, independent trap outcomes, permutation,
pad) instead of a 2^(2Np) physical vector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .quantum import CliffordOp, Statevector, bits_to_index, index_to_bits, reduced_density

TRAP_SYMBOLS = ("0", "+", "+y")
TRAP_VECTORS = (
    np.array([1, 0], dtype=complex),
    np.array([1, 1], dtype=complex) / np.sqrt(2),
    np.array([1, 1j], dtype=complex) / np.sqrt(2),
)
MAX_LEVEL = 3


class AuthCodeError(ValueError):
    pass


# ---------------------------------------------------------------- Steane code tables

def hamming_parity_check() -> np.ndarray:
    """3x7 parity check whose column j is the binary expansion of j+1."""
    return np.array([[(j + 1) >> (2 - i) & 1 for j in range(7)] for i in range(3)], dtype=np.uint8)


def hamming_codewords() -> np.ndarray:
    hpc = hamming_parity_check()
    words = np.array(list(itertools.product((0, 1), repeat=7)), dtype=np.uint8)
    return words[(words @ hpc.T % 2 == 0).all(axis=1)]


def _key(word: np.ndarray) -> bytes:
    return np.packbits(np.asarray(word, dtype=np.uint8)).tobytes() + bytes([len(word) % 256])


@dataclass(frozen=True, eq=False)
class SteaneCode:
    """Classical codeword tables D0/D1 (each of size 8^level) and the transversal map."""

    level: int
    D0: np.ndarray = field(repr=False)
    D1: np.ndarray = field(repr=False)
    _lookup: dict = field(repr=False, default_factory=dict)

    @property
    def N(self) -> int:
        return 7**self.level

    def codeword_bit(self, word: Sequence[int]) -> int | None:
        """0 or 1 for valid codewords, None otherwise."""
        return self._lookup.get(_key(np.asarray(word, dtype=np.uint8)))

    def sample(self, bit: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        table = self.D1 if bit else self.D0
        if size is None:
            return table[int(rng.integers(len(table)))].copy()
        return table[rng.integers(len(table), size=size)]

    def logical_action(self, c: CliffordOp) -> CliffordOp:
        """Logical operation induced by applying ``c`` transversally.

        Transversal H, X, Z and CNOT act as themselves; transversal S acts as
        S^dag at odd levels, so a word over these gates maps to its complex
        conjugate there. At even levels the map is the identity.
        """
        return c if self.level % 2 == 0 else c.conjugate()

    def transversal_for(self, logical: CliffordOp) -> CliffordOp:
        """Physical Clifford whose transversal application implements ``logical``."""
        return self.logical_action(logical)  # the map is an involution

    def decode_x_errors(self, pattern: Sequence[int]) -> int:
        """Ideal decoder on a bit-flip pattern: 1 iff it leaves a logical X after correction."""
        return _recursive_flip(np.asarray(pattern, dtype=np.uint8), self.level)

    def decode_z_errors(self, pattern: Sequence[int]) -> int:
        # The base code is self-dual, so phase flips decode like bit flips.
        return _recursive_flip(np.asarray(pattern, dtype=np.uint8), self.level)


def _hamming_correct(block: np.ndarray) -> int:
    """Correct up to one flip in a 7-bit pattern; return the logical flip bit."""
    hpc = hamming_parity_check()
    s = bits_to_index(hpc @ block % 2)
    fixed = block.copy()
    if s:
        fixed[s - 1] ^= 1
    return int(fixed.sum() % 2)


def _recursive_flip(pattern: np.ndarray, level: int) -> int:
    if level == 1:
        return _hamming_correct(pattern)
    n = len(pattern) // 7
    return _hamming_correct(np.array([_recursive_flip(pattern[j * n:(j + 1) * n], level - 1) for j in range(7)]))


@lru_cache(maxsize=None)
def steane_tables(level: int) -> SteaneCode:
    """D0/D1 of size 8^level each.

    Level 1 splits the Hamming [7,4] code by weight parity. Level t repeats a
    single level-(t-1) logical-zero codeword c in every block and XORs block j
    with the all-ones word whenever bit j of an outer level-1 codeword is set.
    All-ones is a logical-one word at every level, so the blocks stay valid.
    """
    if level < 1:
        raise AuthCodeError("level must be >= 1")
    if level > MAX_LEVEL:
        raise AuthCodeError(f"tables are only materialized for level <= {MAX_LEVEL}")
    words = hamming_codewords()
    base = {0: words[words.sum(axis=1) % 2 == 0], 1: words[words.sum(axis=1) % 2 == 1]}
    d = {0: base[0], 1: base[1]}
    for _ in range(level - 1):
        inner0 = d[0]
        width = inner0.shape[1]
        ones = np.ones(width, dtype=np.uint8)
        new = {}
        for b in (0, 1):
            rows = [np.concatenate([c ^ (ones * wj) for wj in w]) for w in base[b] for c in inner0]
            new[b] = np.array(rows, dtype=np.uint8)
        d = new
    lookup = {_key(w): b for b in (0, 1) for w in d[b]}
    for arr in d.values():
        arr.setflags(write=False)
    return SteaneCode(level, d[0], d[1], lookup)


# ---------------------------------------------------------------- keys

def perm_bits(two_n: int) -> int:
    return max(1, int(np.ceil(np.log2(two_n))))


@dataclass(frozen=True, eq=False)
class EncodingKey:
    level: int
    traps: np.ndarray  # (p, N) values in {0,1,2} for 0, +, +y
    perm: np.ndarray   # (2N,) physical position of pre-permutation slot j
    a: np.ndarray      # (p, 2N)
    b: np.ndarray      # (p, 2N)

    def __post_init__(self):
        N = 7**self.level
        p = self.traps.shape[0]
        if self.traps.shape != (p, N) or self.a.shape != (p, 2 * N) or self.b.shape != (p, 2 * N):
            raise AuthCodeError("key arrays have inconsistent shapes")
        if sorted(self.perm.tolist()) != list(range(2 * N)):
            raise AuthCodeError("perm is not a permutation of 0..2N-1")
        for arr in (self.traps, self.perm, self.a, self.b):
            arr.setflags(write=False)

    @property
    def N(self) -> int:
        return 7**self.level

    @property
    def p(self) -> int:
        return self.traps.shape[0]

    def with_pads(self, a: np.ndarray, b: np.ndarray) -> "EncodingKey":
        return replace(self, a=np.asarray(a, dtype=np.uint8), b=np.asarray(b, dtype=np.uint8))

    def shifted(self, da: np.ndarray, db: np.ndarray) -> "EncodingKey":
        return self.with_pads(self.a ^ da, self.b ^ db)

    def to_bits(self) -> np.ndarray:
        """Flat payload: traps (2 bits each), perm entries, a, b."""
        t = np.stack([(self.traps >> 1) & 1, self.traps & 1], axis=-1).reshape(-1)
        w = perm_bits(2 * self.N)
        pbits = ((self.perm[:, None] >> np.arange(w - 1, -1, -1)) & 1).reshape(-1)
        return np.concatenate([t, pbits, self.a.reshape(-1), self.b.reshape(-1)]).astype(np.uint8)

    @classmethod
    def payload_width(cls, level: int, p: int) -> int:
        N = 7**level
        return 2 * N * p + 2 * N * perm_bits(2 * N) + 4 * N * p

    @classmethod
    def from_bits(cls, bits: np.ndarray, level: int, p: int) -> "EncodingKey":
        N = 7**level
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size != cls.payload_width(level, p):
            raise AuthCodeError("payload width does not match key geometry")
        o = 0
        t = bits[o:o + 2 * N * p].reshape(p, N, 2)
        o += 2 * N * p
        traps = (t[..., 0] << 1 | t[..., 1]).astype(np.uint8)
        if (traps > 2).any():
            raise AuthCodeError("invalid trap symbol")
        w = perm_bits(2 * N)
        pb = bits[o:o + 2 * N * w].reshape(2 * N, w).astype(np.int64)
        o += 2 * N * w
        perm = (pb * (1 << np.arange(w - 1, -1, -1))).sum(axis=1)
        a = bits[o:o + 2 * N * p].reshape(p, 2 * N)
        o += 2 * N * p
        b = bits[o:o + 2 * N * p].reshape(p, 2 * N)
        return cls(level, traps, perm.astype(np.int64), a.copy(), b.copy())

    def to_dict(self) -> dict:
        from .serialize import bits_to_hex
        return {
            "level": self.level,
            "traps": ["".join(str(v) for v in row) for row in self.traps.tolist()],
            "trap_symbols": [[TRAP_SYMBOLS[v] for v in row] for row in self.traps.tolist()],
            "perm": self.perm.tolist(),
            "a": [bits_to_hex(r) for r in self.a],
            "b": [bits_to_hex(r) for r in self.b],
        }

    def same_as(self, other: "EncodingKey") -> bool:
        return (self.level == other.level and np.array_equal(self.traps, other.traps)
                and np.array_equal(self.perm, other.perm) and np.array_equal(self.a, other.a)
                and np.array_equal(self.b, other.b))


def keygen(p: int, code: SteaneCode, rng: np.random.Generator) -> EncodingKey:
    if p < 1:
        raise AuthCodeError("need at least one logical qubit")
    N = code.N
    traps = rng.integers(0, 3, size=(p, N)).astype(np.uint8)
    perm = rng.permutation(2 * N).astype(np.int64)
    a = rng.integers(0, 2, size=(p, 2 * N)).astype(np.uint8)
    b = rng.integers(0, 2, size=(p, 2 * N)).astype(np.uint8)
    return EncodingKey(code.level, traps, perm, a, b)


def permute(block: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Move slot j of ``block`` (last axis) to physical position perm[j]."""
    out = np.empty_like(block)
    out[..., perm] = block
    return out


def unpermute(block: np.ndarray, perm: np.ndarray) -> np.ndarray:
    return block[..., perm]


# ---------------------------------------------------------------- handles

@dataclass(frozen=True, eq=False)
class EncodedStateHandle:
    """Symbolic E(rho): logical statevector plus the key that encodes it."""

    logical_state: Statevector
    key: EncodingKey
    code: SteaneCode

    @property
    def physical_width(self) -> int:
        return 2 * self.code.N * self.key.p


def encode(logical: Statevector, key: EncodingKey, code: SteaneCode) -> EncodedStateHandle:
    if logical.num_qubits != key.p:
        raise AuthCodeError(f"key covers {key.p} logical qubits, state has {logical.num_qubits}")
    if key.level != code.level:
        raise AuthCodeError("key and code levels differ")
    return EncodedStateHandle(logical, key, code)


@dataclass(frozen=True)
class PauliFrameState:
    """Result of Dec when the decoding key differs from the encoding key only in its pads.

    The code qubits hold the logical state hit by X^x_err Z^z_err (shape (p, N)).
    """

    logical_state: Statevector
    x_err: np.ndarray
    z_err: np.ndarray


def decode(handle: EncodedStateHandle, key: EncodingKey) -> Statevector | PauliFrameState:
    """Dec_{pi,a,b} on a symbolic handle: un-pad, un-permute, drop traps."""
    hk = handle.key
    if hk.p != key.p or hk.level != key.level:
        raise AuthCodeError("key geometry does not match handle")
    if not np.array_equal(hk.perm, key.perm):
        raise AuthCodeError("symbolic decoding under a different permutation is not supported")
    dx = unpermute(hk.a ^ key.a, key.perm)[:, : key.N]
    dz = unpermute(hk.b ^ key.b, key.perm)[:, : key.N]
    if not dx.any() and not dz.any():
        return handle.logical_state
    return PauliFrameState(handle.logical_state, dx, dz)


@dataclass(frozen=True)
class ClassicalDecode:
    bit: int | None
    p: np.ndarray
    q: np.ndarray


def decode_classical(u: np.ndarray, pad_x: np.ndarray, perm: np.ndarray, code: SteaneCode) -> ClassicalDecode:
    """Un-XOR the X pad, un-permute, split p||q, look p up in D0/D1."""
    w = unpermute(np.asarray(u, dtype=np.uint8) ^ pad_x, perm)
    p, q = w[: code.N], w[code.N:]
    return ClassicalDecode(code.codeword_bit(p), p, q)


# ---------------------------------------------------------------- pad push-through

@dataclass(frozen=True)
class PadPushResult:
    e: np.ndarray  # (k, 2N)
    f: np.ndarray
    alpha_exp: int  # alpha = i**alpha_exp

    @property
    def alpha(self) -> complex:
        return 1j**self.alpha_exp


def pad_pushthrough(a: np.ndarray, b: np.ndarray, c: CliffordOp,
                    d_prime: tuple[np.ndarray, np.ndarray] | None = None) -> PadPushResult:
    """Strings e, f, alpha with C^{(x)2N} X^a Z^b = alpha X^e Z^f C^{(x)2N}.

    ``a`` and ``b`` have shape (k, 2N); row i is the pad of the i-th touched
    block and column l is one transversal position.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.uint8))
    b = np.atleast_2d(np.asarray(b, dtype=np.uint8))
    if d_prime is not None:
        a = a ^ np.atleast_2d(d_prime[0])
        b = b ^ np.atleast_2d(d_prime[1])
    k, width = a.shape
    if k != c.num_qubits or b.shape != a.shape:
        raise AuthCodeError("pad shape does not match the Clifford")
    e = np.zeros_like(a)
    f = np.zeros_like(b)
    alpha = 0
    weights = 1 << np.arange(k - 1, -1, -1)
    xs = (a.T.astype(np.int64) * weights).sum(axis=1)
    zs = (b.T.astype(np.int64) * weights).sum(axis=1)
    for pos in range(width):
        ph, xo, zo = c.conjugate_packed((0, int(xs[pos]), int(zs[pos])))
        alpha += ph
        e[:, pos] = index_to_bits(xo, k)
        f[:, pos] = index_to_bits(zo, k)
    return PadPushResult(e, f, alpha % 4)


# ---------------------------------------------------------------- measurement

@dataclass(frozen=True)
class MeasurementRecord:
    blocks: tuple[int, ...]  # touched logical qubit indices, in term-support order
    z: np.ndarray            # (k, 2N)

    def to_dict(self) -> dict:
        from .serialize import bits_to_hex
        return {"blocks": list(self.blocks), "z": [bits_to_hex(r) for r in self.z]}


@lru_cache(maxsize=4096)
def _trap_distribution(matrix_bytes: bytes, k: int, trap_tuple: tuple[int, ...]) -> np.ndarray:
    u = np.frombuffer(matrix_bytes, dtype=complex).reshape(2**k, 2**k)
    vec = TRAP_VECTORS[trap_tuple[0]]
    for s in trap_tuple[1:]:
        vec = np.kron(vec, TRAP_VECTORS[s])
    p = np.abs(u @ vec) ** 2
    p[p < 1e-12] = 0
    return p / p.sum()


def trap_outcome_distribution(c_phys: CliffordOp, trap_tuple: Sequence[int]) -> np.ndarray:
    """|<q|C|t>|^2 over q for one transversal trap position."""
    return _trap_distribution(c_phys.matrix.tobytes(), c_phys.num_qubits, tuple(int(t) for t in trap_tuple))


def measure_encoded(handle: EncodedStateHandle, support: Sequence[int], logical_clifford: CliffordOp,
                    rng: np.random.Generator) -> MeasurementRecord:
    """Sample the outcome of applying C transversally to the touched blocks and measuring.

    ``logical_clifford`` is the operation the measurement should realize on
    the logical qubits; the physical gate is chosen through the code's
    transversal map.
    """
    support = tuple(int(s) for s in support)
    key, code = handle.key, handle.code
    if any(s < 0 or s >= key.p for s in support):
        raise AuthCodeError("term support lies outside the encoded register")
    k, N = len(support), code.N
    c_phys = code.transversal_for(logical_clifford)
    logical = code.logical_action(c_phys)
    rho = reduced_density(handle.logical_state, list(support))
    rot = logical.matrix @ rho.matrix @ logical.matrix.conj().T
    probs = np.clip(np.real(np.diag(rot)), 0, None)
    probs /= probs.sum()
    bits = index_to_bits(int(rng.choice(probs.size, p=probs)), k)

    w = np.zeros((k, 2 * N), dtype=np.uint8)
    for i, bit in enumerate(bits):
        w[i, :N] = code.sample(bit, rng)
    traps = key.traps[list(support)]  # (k, N)
    for j in range(N):
        dist = trap_outcome_distribution(c_phys, traps[:, j])
        w[:, N + j] = index_to_bits(int(rng.choice(dist.size, p=dist)), k)
    u = permute(w, key.perm)
    push = pad_pushthrough(key.a[list(support)], key.b[list(support)], c_phys)
    return MeasurementRecord(support, u ^ push.e)


def encoded_distribution(handle: EncodedStateHandle, support: Sequence[int],
                         logical_clifford: CliffordOp) -> dict[bytes, float]:
    """Exact outcome law of measure_encoded (small cases only), keyed by z bytes."""
    support = tuple(int(s) for s in support)
    key, code = handle.key, handle.code
    k, N = len(support), code.N
    c_phys = code.transversal_for(logical_clifford)
    logical = code.logical_action(c_phys)
    rho = reduced_density(handle.logical_state, list(support))
    probs = np.clip(np.real(np.diag(logical.matrix @ rho.matrix @ logical.matrix.conj().T)), 0, None)
    push = pad_pushthrough(key.a[list(support)], key.b[list(support)], c_phys)
    traps = key.traps[list(support)]
    trap_dists = [trap_outcome_distribution(c_phys, traps[:, j]) for j in range(N)]
    trap_supports = [np.flatnonzero(d) for d in trap_dists]
    out: dict[bytes, float] = {}
    for li, pl in enumerate(probs):
        if pl < 1e-12:
            continue
        lbits = index_to_bits(li, k)
        tables = [code.D1 if bt else code.D0 for bt in lbits]
        for cws in itertools.product(*tables):
            for qs in itertools.product(*trap_supports):
                pq = np.prod([trap_dists[j][q] for j, q in enumerate(qs)])
                w = np.zeros((k, 2 * N), dtype=np.uint8)
                for i in range(k):
                    w[i, :N] = cws[i]
                for j, q in enumerate(qs):
                    w[:, N + j] = index_to_bits(int(q), k)
                z = permute(w, key.perm) ^ push.e
                kz = z.tobytes()
                out[kz] = out.get(kz, 0.0) + pl * pq / np.prod([len(t) for t in tables])
    return out
