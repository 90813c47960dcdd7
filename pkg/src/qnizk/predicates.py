"""Acceptance predicates over measured strings: R_r, the instance check, Q and the hybrid Q'."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .authcode import TRAP_VECTORS, EncodingKey, SteaneCode, pad_pushthrough, unpermute
from .hamiltonian import CliffordHamiltonian, extended_term
from .quantum import CliffordOp, bits_to_index

AMPLITUDE_FLOOR = 1e-9


class PredicateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PredicateContext:
    hamiltonian: CliffordHamiltonian
    x: tuple[int, ...]
    code: SteaneCode
    _challenges: dict = field(default_factory=dict, repr=False)

    @property
    def m(self) -> int:
        return self.hamiltonian.m

    @property
    def n(self) -> int:
        return self.hamiltonian.registers.n_instance

    def challenge(self, r: int) -> tuple[tuple[int, ...], CliffordOp]:
        """Touched logical qubits and the physical Clifford applied for challenge r."""
        hit = self._challenges.get(r)
        if hit is None:
            term = extended_term(self.hamiltonian, r, self.x)
            hit = self._challenges[r] = (tuple(term.support), self.code.transversal_for(term.clifford), term.clifford)
        return hit[0], hit[1]

    def logical_challenge(self, r: int) -> tuple[tuple[int, ...], CliffordOp]:
        """Support and the logical Clifford C_r (before the transversal map)."""
        self.challenge(r)
        hit = self._challenges[r]
        return hit[0], hit[2]


@lru_cache(maxsize=4096)
def _trap_amplitudes(matrix_bytes: bytes, k: int, trap_tuple: tuple[int, ...]) -> np.ndarray:
    u = np.frombuffer(matrix_bytes, dtype=complex).reshape(2**k, 2**k)
    vec = TRAP_VECTORS[trap_tuple[0]]
    for s in trap_tuple[1:]:
        vec = np.kron(vec, TRAP_VECTORS[s])
    return u @ vec


def traps_consistent(c_phys: CliffordOp, traps: np.ndarray, q: np.ndarray) -> bool:
    """<q|C^{(x)N}|t> != 0, checked position by position. traps, q have shape (k, N)."""
    mb = c_phys.matrix.tobytes()
    k = c_phys.num_qubits
    for j in range(traps.shape[1]):
        amp = _trap_amplitudes(mb, k, tuple(int(v) for v in traps[:, j]))
        if abs(amp[bits_to_index(q[:, j])]) <= AMPLITUDE_FLOOR:
            return False
    return True


def _split(u: np.ndarray, perm: np.ndarray, code: SteaneCode) -> tuple[list[int | None], np.ndarray]:
    w = unpermute(u, perm)
    bits = [code.codeword_bit(row[: code.N]) for row in w]
    return bits, w[:, code.N:]


def _as_blocks(u, k: int, two_n: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.uint8)
    if u.size != k * two_n:
        raise PredicateError(f"measured string has {u.size} bits, expected {k * two_n}")
    return u.reshape(k, two_n)


def eval_R(r: int, traps: np.ndarray, perm: np.ndarray, u, ctx: PredicateContext) -> int:
    """R_r on a pad-free measured string u (k blocks of 2N bits in support order)."""
    support, c_phys = ctx.challenge(r)
    u = _as_blocks(u, len(support), 2 * ctx.code.N)
    bits, q = _split(u, perm, ctx.code)
    t = np.asarray(traps)[list(support)]
    if r <= ctx.m:
        cond1 = all(b is not None for b in bits) and any(b == 1 for b in bits)
    else:
        clock_ok = bits[0] == 1
        inst_ok = all(b == xi for b, xi in zip(bits[1:], ctx.x))
        cond1 = clock_ok or inst_ok
    return int(cond1 and traps_consistent(c_phys, t, q))


def slice_teleport(d: np.ndarray, p: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """d = (x_1..x_{2Np}, y_1..y_{2Np}) -> per-block (a', b') of shape (p, 2N)."""
    d = np.asarray(d, dtype=np.uint8)
    if d.size != 4 * N * p:
        raise PredicateError(f"teleport record has {d.size} bits, expected {4 * N * p}")
    return d[: 2 * N * p].reshape(p, 2 * N), d[2 * N * p:].reshape(p, 2 * N)


def eval_Q(key: EncodingKey, r: int, z, d, ctx: PredicateContext) -> int:
    support, c_phys = ctx.challenge(r)
    a_t, b_t = slice_teleport(d, key.p, key.N)
    idx = list(support)
    push = pad_pushthrough(key.a[idx] ^ a_t[idx], key.b[idx] ^ b_t[idx], c_phys)
    u = _as_blocks(z, len(idx), 2 * key.N) ^ push.e
    return eval_R(r, key.traps, key.perm, u, ctx)


def eval_Qtilde(key: EncodingKey, r: int, u, ctx: PredicateContext) -> int:
    """The pre-existing predicate for r <= m: pads (a, b) only, computed independently of slicing."""
    if not 1 <= r <= ctx.m:
        raise PredicateError("this predicate is defined for r <= m only")
    support, c_phys = ctx.challenge(r)
    push = pad_pushthrough(key.a[list(support)], key.b[list(support)], c_phys)
    return eval_R(r, key.traps, key.perm, _as_blocks(u, len(support), 2 * key.N) ^ push.e, ctx)


def eval_Qprime(key: EncodingKey, r: int, u, ctx: PredicateContext) -> int:
    """Hybrid predicate with per-bit instance checks: r in 1..m+n."""
    m, n = ctx.m, ctx.n
    if not 1 <= r <= m + n:
        raise PredicateError(f"challenge {r} outside 1..{m + n}")
    if r <= m:
        return eval_Qtilde(key, r, u, ctx)
    i = r - m  # 1-based instance bit
    support, _ = ctx.challenge(m + 1)
    blocks = _as_blocks(u, len(support), 2 * key.N) ^ key.a[list(support)]
    bits, q = _split(blocks, key.perm, ctx.code)
    cond1 = bits[0] == 1 or bits[i] == ctx.x[i - 1]
    t = key.traps[list(support)]
    return int(cond1 and traps_consistent(CliffordOp.identity(len(support)), t, q))


def touched_blocks(ctx: PredicateContext, r: int) -> Sequence[int]:
    return ctx.challenge(r)[0]
