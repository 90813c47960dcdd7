"""Regev-style bit commitments with a gadget trapdoor for extraction.

Public key A (m x n) = [Abar ; G - R Abar] where G stacks base-beta gadget
rows. With the trapdoor R, R * top + bottom = G s + small, which decodes s
coordinate by coordinate. Errors are uniform on [-B, B].
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..serialize import hex_to_ints, ints_to_hex


class CommitmentError(ValueError):
    pass


@dataclass(frozen=True)
class LweParams:
    n_lwe: int = 8
    m_lwe: int = 32
    q: int = 3329
    bound: int = 1
    digits: int = 2
    strengthened: bool = False

    @property
    def m_bar(self) -> int:
        return self.m_lwe - self.n_lwe * self.digits

    @property
    def base(self) -> int:
        return int(np.ceil(self.q ** (1 / self.digits)))

    @property
    def half(self) -> int:
        return self.q // 2

    @property
    def gadget_noise(self) -> int:
        """Worst-case |R e_top + e_bottom| for ternary R."""
        return (self.m_bar + 1) * self.bound

    def validate(self) -> None:
        if self.m_lwe < self.n_lwe:
            raise CommitmentError("m_lwe must be at least n_lwe")
        if self.q < 3 or any(self.q % p == 0 for p in range(2, int(self.q**0.5) + 1)):
            raise CommitmentError("q must be prime")
        if not 0 < self.bound < self.q / 8:
            raise CommitmentError("error bound must lie in (0, q/8)")
        if self.m_bar < 1:
            raise CommitmentError("m_lwe too small for the gadget")
        if self.m_lwe * self.bound >= self.q / 4:
            raise CommitmentError("decryption noise m*B must stay below q/4")
        powers = self.base ** np.arange(self.digits)
        deltas = np.arange(1, self.q)
        sep = np.abs(centered(np.outer(deltas, powers), self.q)).max(axis=1).min()
        if sep <= 2 * self.gadget_noise:
            raise CommitmentError("gadget is not uniquely decodable at this noise level")
        if self.strengthened and (self.m_lwe + 1) * self.bound >= self.q / 4:
            raise CommitmentError("strengthened trapdoor noise too large")


def centered(v, q: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64) % q
    return np.where(v > q // 2, v - q, v)


def _gadget(params: LweParams) -> np.ndarray:
    n, k, beta = params.n_lwe, params.digits, params.base
    g = np.zeros((n * k, n), dtype=np.int64)
    for i in range(n):
        for j in range(k):
            g[i * k + j, i] = beta**j
    return g % params.q


@dataclass(frozen=True, eq=False)
class ComPublicKey:
    params: LweParams
    A: np.ndarray
    A2: np.ndarray | None = None

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.A.astype(np.int64).tobytes())
        if self.A2 is not None:
            h.update(self.A2.astype(np.int64).tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        p = self.params
        out = {"n_lwe": p.n_lwe, "m_lwe": p.m_lwe, "q": p.q, "bound": p.bound,
               "digits": p.digits, "strengthened": p.strengthened, "A": ints_to_hex(self.A)}
        if self.A2 is not None:
            out["A2"] = ints_to_hex(self.A2)
        return out


@dataclass(frozen=True, eq=False)
class ComSecretKey:
    R: np.ndarray
    R2: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class ComKeyPair:
    pk: ComPublicKey
    sk: ComSecretKey


def com_gen(params: LweParams, rng: np.random.Generator) -> ComKeyPair:
    params.validate()
    q, n, mb = params.q, params.n_lwe, params.m_bar
    abar = rng.integers(0, q, size=(mb, n))
    r = rng.integers(-1, 2, size=(n * params.digits, mb))
    bottom = (_gadget(params) - r @ abar) % q
    a = np.vstack([abar, bottom]).astype(np.int64)
    a2 = r2 = None
    if params.strengthened:
        m = params.m_lwe
        abar2 = rng.integers(0, q, size=(m, m))
        r2 = rng.integers(-1, 2, size=(m, m))
        a2 = np.vstack([abar2, (params.half * np.eye(m, dtype=np.int64) - r2 @ abar2) % q]).astype(np.int64)
    return ComKeyPair(ComPublicKey(params, a, a2), ComSecretKey(r, r2))


@dataclass(frozen=True, eq=False)
class CommitRandomness:
    """Per-bit columns: S (n x L), E (m x L), W (m x L), E2 (2m x L) or None."""

    S: np.ndarray
    E: np.ndarray
    W: np.ndarray
    E2: np.ndarray | None = None

    def column(self, j: int) -> "CommitRandomness":
        return CommitRandomness(self.S[:, [j]], self.E[:, [j]], self.W[:, [j]],
                                None if self.E2 is None else self.E2[:, [j]])

    def to_dict(self) -> dict:
        d = {"S": ints_to_hex(self.S, np.int16), "E": ints_to_hex(self.E, np.int16),
             "W": ints_to_hex(self.W, np.int16), "shape": list(self.S.shape) + [self.E.shape[0]]}
        if self.E2 is not None:
            d["E2"] = ints_to_hex(self.E2, np.int16)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CommitRandomness":
        n, L, m = d["shape"]
        e2 = hex_to_ints(d["E2"], np.int16).reshape(-1, L) if "E2" in d else None
        return cls(hex_to_ints(d["S"], np.int16).reshape(n, L), hex_to_ints(d["E"], np.int16).reshape(m, L),
                   hex_to_ints(d["W"], np.int16).reshape(m, L), e2)


def expand_randomness(params: LweParams, seed: bytes | int, nbits: int) -> CommitRandomness:
    """Deterministic expansion of a commitment seed into per-bit (s, e, w[, e'])."""
    if isinstance(seed, (bytes, bytearray)):
        seed = int.from_bytes(hashlib.sha256(bytes(seed)).digest(), "big")
    g = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    n, m, q, bd = params.n_lwe, params.m_lwe, params.q, params.bound
    s = g.integers(0, q, size=(n, nbits))
    e = g.integers(-bd, bd + 1, size=(m, nbits))
    w = g.integers(0, 2, size=(m, nbits))
    e2 = g.integers(-bd, bd + 1, size=(2 * m, nbits)) if params.strengthened else None
    return CommitRandomness(s, e, w, e2)


@dataclass(frozen=True, eq=False)
class Commitment:
    """z0 = A is the public key itself; per bit j: z1[:, j], z2[j], z3[j] (and z4[:, j])."""

    z1: np.ndarray
    z2: np.ndarray
    z3: np.ndarray
    z4: np.ndarray | None = None

    @property
    def nbits(self) -> int:
        return self.z3.size

    def select(self, idx: Sequence[int]) -> "Commitment":
        idx = list(idx)
        return Commitment(self.z1[:, idx], self.z2[idx], self.z3[idx], None if self.z4 is None else self.z4[:, idx])

    def same_as(self, other: "Commitment") -> bool:
        pairs = [(self.z1, other.z1), (self.z2, other.z2), (self.z3, other.z3)]
        if (self.z4 is None) != (other.z4 is None):
            return False
        if self.z4 is not None:
            pairs.append((self.z4, other.z4))
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in pairs)

    def to_dict(self) -> dict:
        d = {"nbits": self.nbits, "z1": ints_to_hex(self.z1), "z2": ints_to_hex(self.z2), "z3": ints_to_hex(self.z3)}
        if self.z4 is not None:
            d["z4"] = ints_to_hex(self.z4)
        return d

    @classmethod
    def from_dict(cls, d: dict, params: LweParams) -> "Commitment":
        L = int(d["nbits"])
        z4 = hex_to_ints(d["z4"]).reshape(-1, L) if "z4" in d else None
        return cls(hex_to_ints(d["z1"]).reshape(params.m_lwe, L), hex_to_ints(d["z2"]).reshape(L, params.n_lwe),
                   hex_to_ints(d["z3"]), z4)


def _commit_with(pk: ComPublicKey, bits: np.ndarray, rnd: CommitRandomness) -> Commitment:
    p = pk.params
    q = p.q
    z1 = (pk.A @ rnd.S + rnd.E) % q
    z2 = (rnd.W.T @ pk.A) % q
    z3 = ((rnd.W * z1).sum(axis=0) + bits * p.half) % q
    z4 = None
    if p.strengthened:
        if pk.A2 is None or rnd.E2 is None:
            raise CommitmentError("strengthened commitment needs A2 and e'")
        z4 = (pk.A2 @ rnd.W + rnd.E2) % q
    return Commitment(z1, z2, z3, z4)


def com_commit(pk: ComPublicKey, payload: Sequence[int], s: bytes | int | CommitRandomness) -> Commitment:
    bits = np.asarray(payload, dtype=np.int64).reshape(-1)
    rnd = s if isinstance(s, CommitRandomness) else expand_randomness(pk.params, s, bits.size)
    if rnd.S.shape[1] != bits.size:
        raise CommitmentError("randomness width does not match payload")
    return _commit_with(pk, bits, rnd)


def _bounded(rnd: CommitRandomness, params: LweParams) -> bool:
    ok = np.abs(rnd.E).max(initial=0) <= params.bound and set(np.unique(rnd.W)) <= {0, 1}
    if rnd.E2 is not None:
        ok = ok and np.abs(rnd.E2).max(initial=0) <= params.bound
    return bool(ok)


def com_verify(pk: ComPublicKey, z: Commitment, payload: Sequence[int], s) -> int:
    try:
        bits = np.asarray(payload, dtype=np.int64).reshape(-1)
        rnd = s if isinstance(s, CommitRandomness) else expand_randomness(pk.params, s, bits.size)
        if not set(np.unique(bits)) <= {0, 1} or not _bounded(rnd, pk.params):
            return 0
        return int(_commit_with(pk, bits, rnd).same_as(z))
    except (ValueError, TypeError, CommitmentError):
        return 0


def _invert(params: LweParams, r: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Recover S (n x L) from B = A S + E with the gadget trapdoor, or None."""
    q, n, k, mb = params.q, params.n_lwe, params.digits, params.m_bar
    v = (r @ b[:mb] + b[mb:]) % q  # (n k) x L
    L = b.shape[1]
    noise = params.gadget_noise
    powers = params.base ** np.arange(k)
    offs = np.arange(-noise, noise + 1)
    s = np.zeros((n, L), dtype=np.int64)
    for i in range(n):
        rows = v[i * k:(i + 1) * k]                     # k x L
        cand = (rows[0][None, :] - offs[:, None]) % q   # C x L
        err = centered(rows[None, :, :] - powers[None, :, None] * cand[:, None, :], q)
        worst = np.abs(err).max(axis=1)                 # C x L
        best = worst.argmin(axis=0)
        if (worst[best, np.arange(L)] > noise).any():
            return None
        s[i] = cand[best, np.arange(L)]
    return s


@dataclass(frozen=True)
class RecoverResult:
    ok: bool
    payload: np.ndarray | None = None
    randomness: CommitRandomness | None = None
    reason: str = ""


def com_recover(pk: ComPublicKey, sk: ComSecretKey, z: Commitment) -> RecoverResult:
    p = pk.params
    q = p.q
    try:
        s = _invert(p, sk.R, pk.A, z.z1)
    except (ValueError, IndexError) as exc:
        return RecoverResult(False, reason=f"malformed commitment: {exc}")
    if s is None:
        return RecoverResult(False, reason="trapdoor inversion failed")
    e = centered(z.z1 - pk.A @ s, q)
    if np.abs(e).max(initial=0) > p.bound:
        return RecoverResult(False, reason="error term out of bound")
    val = centered(z.z3 - np.einsum("ln,nl->l", z.z2, s), q)
    payload = (np.abs(val) > q // 4).astype(np.int64)
    rnd = None
    if p.strengthened and z.z4 is not None and sk.R2 is not None:
        m = p.m_lwe
        v = centered(sk.R2 @ z.z4[:m] + z.z4[m:], q)
        w = (np.abs(v) > q // 4).astype(np.int64)
        e2 = centered(z.z4 - pk.A2 @ w, q)
        rnd = CommitRandomness(s, e, w, e2)
        if not _bounded(rnd, p) or not _commit_with(pk, payload, rnd).same_as(z):
            return RecoverResult(False, reason="recovered randomness does not reproduce the commitment")
    return RecoverResult(True, payload, rnd)


def bits_of_int(v: int, width: int) -> np.ndarray:
    return np.array([(v >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def int_of_bits(bits) -> int:
    out = 0
    for b in np.asarray(bits).reshape(-1):
        out = (out << 1) | int(b)
    return out
