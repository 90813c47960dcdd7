"""Circuit to 5-local Clifford Hamiltonian reduction with a unary clock.

Global qubit layout: ``T`` clock qubits first (clock_1 is qubit 0), then the
instance, witness and ancilla registers. Gate targets in a circuit refer to
data indices (0 = first instance qubit, or first witness qubit when there is
no instance).

Each propagation step t is emitted as a small group of rank-one Clifford
terms whose sum is the Kitaev propagation projector for that step. A single
term cannot do it: the Kitaev projector is a stabilizer projector only when
the gate is a Pauli, and neither gate kind is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .quantum import (
    GATES, CliffordOp, DensityMatrix, Statevector, apply_unitary, embed, index_to_bits, reduced_density,
)

GATE_KINDS = ("CP", "HH")


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, int]

    @property
    def unitary(self) -> np.ndarray:
        return GATES[self.kind]


@dataclass(frozen=True)
class VerifierCircuit:
    n_instance: int
    c_witness: int
    m_ancilla: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if not self.gates:
            raise CircuitError("circuit has no gates (T = 0)")
        if self.n_instance + self.c_witness < 1:
            raise CircuitError("circuit needs at least one input qubit")
        w = self.width
        for i, g in enumerate(self.gates):
            if g.kind not in GATE_KINDS:
                raise CircuitError(f"gates[{i}].kind: {g.kind!r} is not one of {GATE_KINDS}")
            if len(g.targets) != 2 or len(set(g.targets)) != 2:
                raise CircuitError(f"gates[{i}].targets: need two distinct qubits, got {g.targets}")
            if any(q < 0 or q >= w for q in g.targets):
                raise CircuitError(f"gates[{i}].targets: {g.targets} out of range for {w} data qubits")

    @property
    def T(self) -> int:
        return len(self.gates)

    @property
    def n_input(self) -> int:
        return self.n_instance + self.c_witness

    @property
    def width(self) -> int:
        return self.n_input + self.m_ancilla

    @property
    def output_qubit(self) -> int:
        return 0

    @classmethod
    def from_dict(cls, data: dict) -> "VerifierCircuit":
        try:
            gates = tuple(Gate(str(g["kind"]), tuple(int(q) for q in g["targets"])) for g in data["gates"])
            return cls(int(data["n_instance"]), int(data["c_witness"]), int(data["m_ancilla"]), gates)
        except (KeyError, TypeError) as exc:
            raise CircuitError(f"malformed circuit description: missing or invalid field {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "VerifierCircuit":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise CircuitError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "n_instance": self.n_instance,
            "c_witness": self.c_witness,
            "m_ancilla": self.m_ancilla,
            "gates": [{"kind": g.kind, "targets": list(g.targets)} for g in self.gates],
        }

    def run(self, state, upto: int | None = None):
        """Apply U_upto ... U_1 to a data-register state."""
        for g in self.gates[: self.T if upto is None else upto]:
            state = apply_unitary(state, g.unitary, g.targets)
        return state

    def acceptance_probability(self, rho_input: DensityMatrix) -> float:
        """Probability the output qubit reads 1 when run on rho_input with zeroed ancillas."""
        rho = rho_input
        if self.m_ancilla:
            rho = rho.tensor(DensityMatrix.from_bits([0] * self.m_ancilla))
        out = reduced_density(self.run(rho), [self.output_qubit])
        return float(np.real(out.matrix[1, 1]))


@dataclass(frozen=True)
class Registers:
    T: int
    n_instance: int
    c_witness: int
    m_ancilla: int

    def clock(self, t: int) -> int:
        """Global index of clock_t, t in 1..T."""
        return t - 1

    @property
    def data_offset(self) -> int:
        return self.T

    @property
    def instance(self) -> list[int]:
        return list(range(self.T, self.T + self.n_instance))

    @property
    def witness(self) -> list[int]:
        s = self.T + self.n_instance
        return list(range(s, s + self.c_witness))

    @property
    def ancilla(self) -> list[int]:
        s = self.T + self.n_instance + self.c_witness
        return list(range(s, s + self.m_ancilla))

    @property
    def inputs(self) -> list[int]:
        return self.instance + self.witness

    @property
    def num_qubits(self) -> int:
        return self.T + self.n_instance + self.c_witness + self.m_ancilla

    def to_dict(self) -> dict:
        return {
            "clock": list(range(self.T)), "instance": self.instance,
            "witness": self.witness, "ancilla": self.ancilla,
        }


@dataclass(frozen=True, eq=False)
class CliffordTerm:
    """Projector clifford^dag |0^k><0^k| clifford on ``support`` (k = len(support))."""

    label: str
    clifford: CliffordOp
    support: tuple[int, ...]
    step: int | None = None

    @property
    def k(self) -> int:
        return len(self.support)

    def local_projector(self) -> np.ndarray:
        c = self.clifford.matrix
        return np.outer(c.conj()[0], c[0])  # C^dag |0><0| C

    def rejection_projector(self) -> np.ndarray:
        return self.local_projector()

    def projector(self, num_qubits: int) -> np.ndarray:
        return embed(self.local_projector(), self.support, num_qubits)

    def to_dict(self) -> dict:
        m = self.clifford.matrix
        return {
            "label": self.label, "support": list(self.support), "step": self.step,
            "clifford": [[[float(v.real), float(v.imag)] for v in row] for row in m],
        }


@dataclass(frozen=True, eq=False)
class InstanceCheckTerm:
    """The extra challenge r = m+1: clock_1 together with the instance register, C = I."""

    x: tuple[int, ...]
    support: tuple[int, ...]
    label: str = "instance"

    @property
    def k(self) -> int:
        return len(self.support)

    @property
    def clifford(self) -> CliffordOp:
        return CliffordOp.identity(self.k)

    def local_projector(self) -> np.ndarray:
        """|0><0|_clock1 (I - |x><x|) + (I - |0><0|)_clock1, as written in the protocol definition."""
        n = len(self.x)
        px = np.zeros((2**n, 2**n), dtype=complex)
        ix = int("".join(map(str, self.x)) or "0", 2)
        px[ix, ix] = 1
        p0 = np.diag([1, 0]).astype(complex)
        p1 = np.diag([0, 1]).astype(complex)
        return np.kron(p0, np.eye(2**n) - px) + np.kron(p1, np.eye(2**n))

    def rejection_projector(self) -> np.ndarray:
        """Subspace on which the instance-check predicate rejects: clock at time 0, wrong instance."""
        n = len(self.x)
        px = np.zeros((2**n, 2**n), dtype=complex)
        ix = int("".join(map(str, self.x)) or "0", 2)
        px[ix, ix] = 1
        return np.kron(np.diag([1, 0]).astype(complex), np.eye(2**n) - px)

    def projector(self, num_qubits: int) -> np.ndarray:
        return embed(self.local_projector(), self.support, num_qubits)


Term = CliffordTerm | InstanceCheckTerm


@dataclass(frozen=True, eq=False)
class CliffordHamiltonian:
    circuit: VerifierCircuit
    registers: Registers
    terms: tuple[CliffordTerm, ...]

    @property
    def num_qubits(self) -> int:
        return self.registers.num_qubits

    @property
    def m(self) -> int:
        return len(self.terms)

    def by_label(self, label: str) -> list[CliffordTerm]:
        return [t for t in self.terms if t.label == label]

    def prop_groups(self) -> dict[int, list[CliffordTerm]]:
        groups: dict[int, list[CliffordTerm]] = {}
        for t in self.by_label("prop"):
            groups.setdefault(t.step, []).append(t)
        return groups

    def dense(self) -> np.ndarray:
        n = self.num_qubits
        return sum(t.projector(n) for t in self.terms)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.dense())

    def to_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits, "T": self.registers.T,
            "registers": self.registers.to_dict(), "circuit": self.circuit.to_dict(),
            "terms": [t.to_dict() for t in self.terms],
        }


# ---------------------------------------------------------------- term construction

def _rank_one_term(label: str, support: Sequence[int], prep: list[tuple[str, list[int]]], step=None) -> CliffordTerm:
    """Term projecting onto prep|0^k> (prep words use local indices into ``support``)."""
    k = len(support)
    v = CliffordOp.from_word(k, prep)
    return CliffordTerm(label, CliffordOp(k, v.matrix.conj().T, f"{label}{'' if step is None else step}"),
                        tuple(support), step)


# Data-pair preparations (local indices: c = clock_t, d1, d2) whose projector sum
# equals (I - W)/2 with W = |1><0|_c (x) U + h.c.
_CP_PIECES: list[tuple[bool, list[tuple[str, list[int]]]]] = [
    # (uses d2, prep word)
    (False, [("X", ["c"]), ("H", ["c"])]),                                   # |->|0>
    (True, [("X", ["c"]), ("H", ["c"]), ("X", ["d1"])]),                     # |->|10>
    (True, [("H", ["c"]), ("SDG", ["c"]), ("X", ["d1"]), ("X", ["d2"])]),    # |-i>|11>
]
_BELL = [("H", ["d1"]), ("CNOT", ["d1", "d2"])]  # |ab> -> Bell state
_HH_PIECES: list[tuple[bool, list[tuple[str, list[int]]]]] = [
    (True, [("X", ["c"]), ("H", ["c"])] + _BELL),                                          # |->Phi+
    (True, [("H", ["c"]), ("X", ["d1"]), ("X", ["d2"])] + _BELL),                         # |+>Psi-
    (True, [("X", ["c"]), ("H", ["c"]), ("X", ["d1"]), ("CNOT", ["c", "d1"]),
            ("CNOT", ["c", "d2"])] + _BELL),                                               # (|0>Phi- - |1>Psi+)/sqrt2
    (True, [("X", ["c"]), ("H", ["c"]), ("X", ["d2"]), ("CNOT", ["c", "d1"]),
            ("CNOT", ["c", "d2"])] + _BELL),                                               # (|0>Psi+ - |1>Phi-)/sqrt2
]


def _prop_terms(regs: Registers, t: int, gate: Gate) -> list[CliffordTerm]:
    T = regs.T
    names: list[str] = []
    globals_: list[int] = []
    clock_prep: list[tuple[str, list[str]]] = []
    if t > 1:
        names.append("prev")
        globals_.append(regs.clock(t - 1))
        clock_prep.append(("X", ["prev"]))
    names.append("c")
    globals_.append(regs.clock(t))
    if t < T:
        names.append("next")
        globals_.append(regs.clock(t + 1))
    g1, g2 = (regs.data_offset + q for q in gate.targets)
    pieces = _CP_PIECES if gate.kind == "CP" else _HH_PIECES
    out = []
    for uses_d2, word in pieces:
        local = names + ["d1"] + (["d2"] if uses_d2 else [])
        support = globals_ + [g1] + ([g2] if uses_d2 else [])
        idx = {nm: i for i, nm in enumerate(local)}
        prep = [(gname, [idx[q] for q in qs]) for gname, qs in clock_prep + word]
        out.append(_rank_one_term("prop", support, prep, step=t))
    return out


def reduce_circuit(u: VerifierCircuit) -> CliffordHamiltonian:
    regs = Registers(u.T, u.n_instance, u.c_witness, u.m_ancilla)
    if regs.num_qubits > 30:
        raise CircuitError("circuit too large for the desk-scale reduction")
    terms: list[CliffordTerm] = []
    for a in regs.ancilla:
        terms.append(_rank_one_term("in", [regs.clock(1), a], [("X", [1])]))
    out_q = regs.data_offset + u.output_qubit
    terms.append(_rank_one_term("out", [regs.clock(u.T), out_q], [("X", [0])]))
    for t, g in enumerate(u.gates, start=1):
        terms.extend(_prop_terms(regs, t, g))
    for t in range(1, u.T):
        terms.append(_rank_one_term("clock", [regs.clock(t), regs.clock(t + 1)], [("X", [1])]))
    return CliffordHamiltonian(u, regs, tuple(terms))


def kitaev_prop_projector(regs: Registers, t: int, gate: Gate) -> np.ndarray:
    """Textbook 3-clock-qubit propagation projector for step t as a dense matrix."""
    n = regs.num_qubits
    c = regs.clock(t)
    g1, g2 = (regs.data_offset + q for q in gate.targets)
    ket10 = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
    fwd = embed(np.kron(ket10, gate.unitary), [c, g1, g2], n)
    op = 0.5 * (np.eye(2**n) - fwd - fwd.conj().T)
    if t > 1:
        op = embed(np.diag([0, 1]).astype(complex), [regs.clock(t - 1)], n) @ op
    if t < regs.T:
        op = embed(np.diag([1, 0]).astype(complex), [regs.clock(t + 1)], n) @ op
    return op


# ---------------------------------------------------------------- states and energies

@dataclass(frozen=True)
class HistoryState:
    state: Statevector
    T: int
    registers: Registers = field(repr=False)


def unary_index(t: int, T: int) -> int:
    return ((1 << t) - 1) << (T - t)


def history_state(u: VerifierCircuit, x: Sequence[int] | str, witness: Statevector) -> HistoryState:
    x = [int(b) for b in x]
    if len(x) != u.n_instance:
        raise CircuitError(f"instance has {len(x)} bits, circuit expects {u.n_instance}")
    if witness.num_qubits != u.c_witness:
        raise CircuitError(f"witness has {witness.num_qubits} qubits, circuit expects {u.c_witness}")
    data = Statevector.from_bits(x).tensor(witness) if x else witness
    if u.m_ancilla:
        data = data.tensor(Statevector.zeros(u.m_ancilla))
    T, D = u.T, u.width
    amps = np.zeros(2 ** (T + D), dtype=complex)
    phi = data
    for t in range(T + 1):
        if t:
            g = u.gates[t - 1]
            phi = apply_unitary(phi, g.unitary, g.targets)
        ci = unary_index(t, T)
        amps[ci << D: (ci + 1) << D] = phi.amplitudes / np.sqrt(T + 1)
    regs = Registers(T, u.n_instance, u.c_witness, u.m_ancilla)
    return HistoryState(Statevector(T + D, amps), T, regs)


def term_energy(term: Term, state) -> float:
    rho = reduced_density(state, list(term.support))
    return float(np.real(np.trace(term.local_projector() @ rho.matrix)))


def energy(h, rho) -> float:
    """Tr(H rho) for a full Hamiltonian, a single term, or a list of terms."""
    if isinstance(rho, HistoryState):
        rho = rho.state
    terms = h.terms if isinstance(h, CliffordHamiltonian) else (h if isinstance(h, (list, tuple)) else [h])
    n = rho.num_qubits
    for t in terms:
        if max(t.support) >= n:
            raise CircuitError("term support exceeds state size")
    return float(sum(term_energy(t, rho) for t in terms))


def extended_term(h: CliffordHamiltonian, r: int, x: Sequence[int] | str) -> Term:
    """Challenge r in 1..m+1: the r-th term, or the instance check for r = m+1."""
    if not 1 <= r <= h.m + 1:
        raise CircuitError(f"challenge {r} outside 1..{h.m + 1}")
    if r <= h.m:
        return h.terms[r - 1]
    x = tuple(int(b) for b in x)
    if len(x) != h.registers.n_instance:
        raise CircuitError("instance length mismatch")
    return InstanceCheckTerm(x, tuple([h.registers.clock(1)] + h.registers.instance))


def rejection_energy(h: CliffordHamiltonian, x, rho) -> float:
    """Expected rejection of a consistent encoding of rho under the protocol's challenge law.

    Challenges r <= m have weight 1/(m+n) each and the instance check has
    weight n/(m+n).
    """
    m, n = h.m, h.registers.n_instance
    total = sum(term_energy(t, rho) for t in h.terms)
    if n:
        inst = extended_term(h, m + 1, x)
        red = reduced_density(rho, list(inst.support))
        total += n * float(np.real(np.trace(inst.rejection_projector() @ red.matrix)))
    return total / (m + n)


def witness_map_tau(u: VerifierCircuit, rho) -> DensityMatrix:
    """Measure the clock; undo the computation on valid times, else output |0^n>."""
    if isinstance(rho, HistoryState):
        rho = rho.state
    if isinstance(rho, Statevector):
        rho = rho.density()
    T, D = u.T, u.width
    n_in = u.n_input
    if rho.num_qubits != T + D:
        raise CircuitError("state size does not match circuit")
    m = rho.matrix
    out = np.zeros((2**n_in, 2**n_in), dtype=complex)
    valid = {unary_index(t, T): t for t in range(T + 1)}
    zero_in = np.zeros((2**n_in, 2**n_in), dtype=complex)
    zero_in[0, 0] = 1
    for ci in range(2**T):
        block = m[ci << D: (ci + 1) << D, ci << D: (ci + 1) << D]
        p = float(np.real(np.trace(block)))
        if p < 1e-15:
            continue
        t = valid.get(ci)
        if t is None:
            out += p * zero_in
            continue
        st = DensityMatrix(D, block / p)
        for g in reversed(u.gates[:t]):
            st = apply_unitary(st, g.unitary.conj().T, g.targets)
        out += p * reduced_density(st, list(range(n_in))).matrix
    return DensityMatrix(n_in, (out + out.conj().T) / 2)


# ---------------------------------------------------------------- spectral report

def acceptance_operator(u: VerifierCircuit, x: Sequence[int] | str) -> np.ndarray:
    """Witness-space operator M with Tr(M w) = acceptance on |x> (x) w (x) |0..0>."""
    x = [int(b) for b in x]
    c, width = u.c_witness, u.width
    cols = []
    for j in range(2**c):
        out = u.run(Statevector.from_bits(x + list(index_to_bits(j, c)) + [0] * u.m_ancilla)).amplitudes
        cols.append(out[2 ** (width - 1):])  # output qubit (data 0) reads 1
    v = np.stack(cols, axis=1)
    return v.conj().T @ v


def max_acceptance(u: VerifierCircuit, x: Sequence[int] | str) -> float:
    return float(np.linalg.eigvalsh(acceptance_operator(u, x))[-1])


@dataclass(frozen=True)
class SpectrumReport:
    num_qubits: int
    term_counts: dict
    min_eigenvalue: float | None
    max_eigenvalue: float | None
    max_acceptance: float
    history_energy_bound: float
    verdict: str

    def to_dict(self) -> dict:
        return {"num_qubits": self.num_qubits, "term_counts": dict(self.term_counts),
                "min_eigenvalue": self.min_eigenvalue, "max_eigenvalue": self.max_eigenvalue,
                "max_acceptance": self.max_acceptance, "history_energy_bound": self.history_energy_bound,
                "verdict": self.verdict}


def instance_dense(h: CliffordHamiltonian, x: Sequence[int] | str) -> np.ndarray:
    """H plus the rejecting part of the instance check, so the ground space fixes the instance to x."""
    dense = h.dense()
    if h.registers.n_instance:
        inst = extended_term(h, h.m + 1, x)
        dense = dense + embed(inst.rejection_projector(), inst.support, h.num_qubits)
    return dense


def spectrum_report(h: CliffordHamiltonian, x: Sequence[int] | str, max_qubits: int = 12,
                    tol: float = 1e-9) -> SpectrumReport:
    """Term counts, extreme eigenvalues and the ground-energy check.

    The check: the ground energy never exceeds the best witness's history
    energy (1 - p*)/(T+1), and when p* <= 1/2 it is strictly positive.
    Verdicts are "ok", "violated" or "skipped" (too many qubits).
    """
    counts: dict[str, int] = {}
    for t in h.terms:
        counts[t.label] = counts.get(t.label, 0) + 1
    counts["prop_groups"] = len(h.prop_groups())
    counts["total"] = h.m
    u = h.circuit
    p_star = max_acceptance(u, x)
    bound = (1 - p_star) / (u.T + 1)
    if h.num_qubits > max_qubits:
        return SpectrumReport(h.num_qubits, counts, None, None, p_star, bound, "skipped")
    ev = np.linalg.eigvalsh(instance_dense(h, x))
    lo, hi = float(ev[0]), float(ev[-1])
    ok = lo <= bound + tol and (p_star > 0.5 or lo > tol)
    return SpectrumReport(h.num_qubits, counts, lo, hi, p_star, bound, "ok" if ok else "violated")
