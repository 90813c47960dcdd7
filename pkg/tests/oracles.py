"""Independent brute-force references. Nothing here imports the sampling code paths."""

from __future__ import annotations

import itertools

import numpy as np

SQ2 = 1 / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_TRAPS = {
    0: np.array([1, 0], dtype=complex),
    1: np.array([SQ2, SQ2], dtype=complex),
    2: np.array([SQ2, 1j * SQ2], dtype=complex),
}

# Generator matrix of the [7,4] Hamming code in the ordering whose parity
# check columns are 1..7 in binary.
HAMMING_G = np.array([
    [1, 1, 1, 0, 0, 0, 0],
    [1, 0, 0, 1, 1, 0, 0],
    [0, 1, 0, 1, 0, 1, 0],
    [1, 1, 0, 1, 0, 0, 1],
], dtype=np.uint8)


def hamming_words() -> list[tuple[int, ...]]:
    out = set()
    for m in itertools.product((0, 1), repeat=4):
        out.add(tuple(int(v) for v in np.array(m) @ HAMMING_G % 2))
    return sorted(out)


def steane_logical(bit: int) -> np.ndarray:
    v = np.zeros(2**7, dtype=complex)
    for w in hamming_words():
        if sum(w) % 2 == bit:
            v[int("".join(map(str, w)), 2)] = 1
    return v / np.linalg.norm(v)


def _apply_1q(psi: np.ndarray, n: int, u: np.ndarray, q: int) -> np.ndarray:
    t = np.moveaxis(psi.reshape([2] * n), q, 0)
    t = np.tensordot(u, t, axes=(1, 0))
    return np.moveaxis(t, 0, q).reshape(-1)


def physical_distribution(alpha: complex, beta: complex, traps, perm, a, b, c_phys: np.ndarray) -> np.ndarray:
    """Outcome law over 14-bit strings for one Steane (t=1) block plus seven traps.

    Encode, append traps, permute (slot j moves to position perm[j]), pad with
    X^a Z^b, apply the single-qubit Clifford on every qubit, measure.
    """
    code = alpha * steane_logical(0) + beta * steane_logical(1)
    trap_vec = np.array([1], dtype=complex)
    for s in traps:
        trap_vec = np.kron(trap_vec, _TRAPS[int(s)])
    psi = np.kron(code, trap_vec).reshape([2] * 14)
    inv = np.argsort(perm)  # physical position l holds slot inv[l]
    psi = np.transpose(psi, inv).reshape(-1)
    for q in range(14):
        if b[q]:
            psi = _apply_1q(psi, 14, _Z, q)
        if a[q]:
            psi = _apply_1q(psi, 14, _X, q)
        psi = _apply_1q(psi, 14, c_phys, q)
    return np.abs(psi) ** 2


def kitaev_local_projector(t: int, T: int, gate_u: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Propagation projector on (clock_{t-1}?, clock_t, clock_{t+1}?, d1, d2) by explicit outer products.

    Built from the unary time states |t-1> and |t> restricted to the local
    clock window, independent of any Clifford decomposition.
    """
    window = ([t - 1] if t > 1 else []) + [t] + ([t + 1] if t < T else [])

    def clock_ket(time: int) -> np.ndarray:
        bits = [1 if pos <= time else 0 for pos in window]
        v = np.zeros(2 ** len(window))
        v[int("".join(map(str, bits)), 2)] = 1
        return v

    prev, cur = clock_ket(t - 1), clock_ket(t)
    eye4 = np.eye(4)
    op = 0.5 * (np.kron(np.outer(prev, prev), eye4) + np.kron(np.outer(cur, cur), eye4))
    op = op - 0.5 * (np.kron(np.outer(cur, prev), gate_u) + np.kron(np.outer(prev, cur), gate_u.conj().T))
    return op, [f"clock{p}" for p in window] + ["d1", "d2"]


def empirical(samples) -> dict:
    out: dict = {}
    for s in samples:
        out[s] = out.get(s, 0) + 1
    n = len(samples)
    return {k: v / n for k, v in out.items()}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


_CP = np.diag([1, 1, 1, 1j]).astype(complex)
_H1 = np.array([[1, 1], [1, -1]], dtype=complex) * SQ2
_GATES = {"CP": _CP, "HH": np.kron(_H1, _H1)}


def _op_on(n: int, ops: dict[int, np.ndarray]) -> np.ndarray:
    """Tensor product of single-qubit operators (identity elsewhere), qubit 0 leftmost."""
    out = np.array([[1]], dtype=complex)
    for q in range(n):
        out = np.kron(out, ops.get(q, np.eye(2)))
    return out


def _two_qubit_on(n: int, u: np.ndarray, q1: int, q2: int) -> np.ndarray:
    """Embed a 4x4 gate by summing over its matrix units."""
    proj = [np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]]),
            np.array([[0, 0], [1, 0]]), np.array([[0, 0], [0, 1]])]
    units = {(0, 0): proj[0], (0, 1): proj[1], (1, 0): proj[2], (1, 1): proj[3]}
    out = np.zeros((2**n, 2**n), dtype=complex)
    for r in range(4):
        for c in range(4):
            if u[r, c] == 0:
                continue
            a = units[(r >> 1, c >> 1)]
            b = units[(r & 1, c & 1)]
            out += u[r, c] * _op_on(n, {q1: a, q2: b})
    return out


def kitaev_hamiltonian(circuit: dict) -> np.ndarray:
    """Textbook Feynman-Kitaev Hamiltonian with a unary clock, built from scratch.

    Qubit order: clock_1..clock_T, then instance, witness, ancilla. Clock
    qubit t reads 1 iff the time is at least t. Accept means output qubit 1.
    """
    gates = circuit["gates"]
    T = len(gates)
    D = circuit["n_instance"] + circuit["c_witness"] + circuit["m_ancilla"]
    n = T + D
    p0, p1 = np.diag([1, 0]).astype(complex), np.diag([0, 1]).astype(complex)
    h = np.zeros((2**n, 2**n), dtype=complex)
    first_anc = T + circuit["n_instance"] + circuit["c_witness"]
    for a in range(first_anc, n):
        h += _op_on(n, {0: p0, a: p1})
    h += _op_on(n, {T - 1: p1, T: p0})
    for t in range(1, T):
        h += _op_on(n, {t - 1: p0, t: p1})
    for t, g in enumerate(gates, start=1):
        window: dict[int, np.ndarray] = {}
        if t > 1:
            window[t - 2] = p1
        if t < T:
            window[t] = p0
        c = t - 1
        u = _two_qubit_on(n, _GATES[g["kind"]], T + g["targets"][0], T + g["targets"][1])
        frame = _op_on(n, window)
        at_prev = frame @ _op_on(n, {c: p0})
        at_cur = frame @ _op_on(n, {c: p1})
        step = _op_on(n, {c: np.array([[0, 0], [1, 0]], dtype=complex)}) @ frame @ u
        h += 0.5 * (at_prev + at_cur) - 0.5 * (step + step.conj().T)
    return h


_TRUTH = {"AND": (0, 0, 0, 1), "OR": (0, 1, 1, 1), "XOR": (0, 1, 1, 0), "NAND": (1, 1, 1, 0)}


def eval_gates(bits, gates, outputs) -> list[int]:
    """Straight-line boolean program via truth tables; NOT ignores its second operand."""
    wires = [int(b) for b in bits]
    for op, i, j in gates:
        wires.append(1 - wires[i] if op == "NOT" else _TRUTH[op][2 * wires[i] + wires[j]])
    return [wires[o] for o in outputs]
