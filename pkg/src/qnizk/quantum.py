"""Small-register exact linear algebra plus Pauli/Clifford bookkeeping.

Conventions: qubit 0 is the most significant bit of a basis index. A Pauli
string is ``i**phase_exp * X^x Z^z`` with all X factors written to the left
of all Z factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

ATOL = 1e-9
PSD_FLOOR = 1e-7
MAX_QUBITS = 14


class QuantumError(ValueError):
    pass


class NotCliffordError(QuantumError):
    pass


# ---------------------------------------------------------------- gates

_S2 = 1 / np.sqrt(2)
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) * _S2
S = np.diag([1, 1j]).astype(complex)
SDG = S.conj()
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
LAMBDA_P = np.diag([1, 1, 1, 1j]).astype(complex)  # controlled phase
HH = np.kron(H, H)

GATES: dict[str, np.ndarray] = {
    "I": I2, "X": X, "Y": Y, "Z": Z, "H": H, "S": S, "SDG": SDG,
    "CNOT": CNOT, "CZ": CZ, "SWAP": SWAP, "CP": LAMBDA_P, "HH": HH,
}


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats, np.eye(1, dtype=complex))


# ---------------------------------------------------------------- tensor kernels

def _apply_to_axes(tensor: np.ndarray, n: int, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply ``u`` to the qubit axes ``targets`` of a (2,)*n + rest tensor."""
    k = len(targets)
    t = np.moveaxis(tensor, list(targets), list(range(k)))
    shp = t.shape
    t = (u @ t.reshape(2**k, -1)).reshape(shp)
    return np.moveaxis(t, list(range(k)), list(targets))


def _check_targets(n: int, targets: Sequence[int], dim: int) -> list[int]:
    targets = [int(q) for q in targets]
    if len(set(targets)) != len(targets):
        raise QuantumError(f"duplicate targets {targets}")
    if any(q < 0 or q >= n for q in targets):
        raise QuantumError(f"targets {targets} out of range for {n} qubits")
    if dim != 2 ** len(targets):
        raise QuantumError(f"operator of dimension {dim} does not fit {len(targets)} targets")
    return targets


def embed(u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Dense 2^n x 2^n matrix of ``u`` acting on ``targets``."""
    targets = _check_targets(n, targets, u.shape[0])
    eye = np.eye(2**n, dtype=complex).reshape([2] * n + [2**n])
    return _apply_to_axes(eye, n, u, targets).reshape(2**n, 2**n)


# ---------------------------------------------------------------- states

@dataclass(frozen=True)
class Statevector:
    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.num_qubits:
            raise QuantumError("amplitude vector length is not 2**num_qubits")
        if self.num_qubits > MAX_QUBITS:
            raise QuantumError(f"{self.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit limit")
        if abs(np.linalg.norm(amps) - 1) > ATOL:
            raise QuantumError("statevector is not normalized")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | str) -> "Statevector":
        bits = [int(b) for b in bits]
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int("".join(map(str, bits)) or "0", 2)] = 1
        return cls(len(bits), amps)

    @classmethod
    def zeros(cls, n: int) -> "Statevector":
        return cls.from_bits([0] * n)

    @classmethod
    def normalized(cls, amps: np.ndarray) -> "Statevector":
        amps = np.asarray(amps, dtype=complex)
        return cls(int(np.log2(amps.size)), amps / np.linalg.norm(amps))

    def tensor(self, other: "Statevector") -> "Statevector":
        return Statevector(self.num_qubits + other.num_qubits, np.kron(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))

    def fidelity(self, other: "Statevector") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


@dataclass(frozen=True)
class DensityMatrix:
    num_qubits: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = 2**self.num_qubits
        if m.shape != (d, d):
            raise QuantumError("density matrix shape does not match num_qubits")
        if not np.allclose(m, m.conj().T, atol=ATOL):
            raise QuantumError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1) > ATOL:
            raise QuantumError(f"density matrix trace {np.trace(m).real} != 1")
        if d <= 1024 and np.linalg.eigvalsh(m).min() < -PSD_FLOOR:
            raise QuantumError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | str) -> "DensityMatrix":
        return Statevector.from_bits(bits).density()

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        return cls(n, np.eye(2**n, dtype=complex) / 2**n)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(self.num_qubits + other.num_qubits, np.kron(self.matrix, other.matrix))

    def trace_distance(self, other: "DensityMatrix") -> float:
        return float(0.5 * np.abs(np.linalg.eigvalsh(self.matrix - other.matrix)).sum())

    def expectation(self, op: np.ndarray) -> float:
        return float(np.real(np.trace(op @ self.matrix)))


State = Statevector | DensityMatrix


def apply_unitary(state: State, op, targets: Sequence[int]) -> State:
    """Apply ``op`` (CliffordOp or dense unitary) to ``targets`` of ``state``."""
    u = op.matrix if isinstance(op, CliffordOp) else np.asarray(op, dtype=complex)
    n = state.num_qubits
    targets = _check_targets(n, targets, u.shape[0])
    if isinstance(state, Statevector):
        t = _apply_to_axes(state.amplitudes.reshape([2] * n), n, u, targets)
        return Statevector(n, t.reshape(-1))
    t = state.matrix.reshape([2] * (2 * n))
    t = _apply_to_axes(t, 2 * n, u, targets)
    t = _apply_to_axes(t, 2 * n, u.conj(), [q + n for q in targets])
    return DensityMatrix(n, t.reshape(2**n, 2**n))


def reduced_density(state: State, keep: Sequence[int]) -> DensityMatrix:
    """Partial trace onto ``keep`` (output qubit order follows ``keep``)."""
    keep = [int(q) for q in keep]
    n = state.num_qubits
    if not keep:
        raise QuantumError("keep set is empty")
    _check_targets(n, keep, 2 ** len(keep))
    rest = [q for q in range(n) if q not in keep]
    k = len(keep)
    if isinstance(state, Statevector):
        psi = np.transpose(state.amplitudes.reshape([2] * n), keep + rest).reshape(2**k, -1)
        rho = psi @ psi.conj().T
    else:
        t = state.matrix.reshape([2] * (2 * n))
        t = np.transpose(t, keep + rest + [n + q for q in keep] + [n + q for q in rest])
        t = t.reshape(2**k, 2 ** (n - k), 2**k, 2 ** (n - k))
        rho = np.einsum("ajbj->ab", t)
    return DensityMatrix(k, (rho + rho.conj().T) / 2)


def probabilities(state: State) -> np.ndarray:
    if isinstance(state, Statevector):
        p = np.abs(state.amplitudes) ** 2
    else:
        p = np.clip(np.real(np.diag(state.matrix)), 0, None)
    return p / p.sum()


def index_to_bits(index: int, n: int) -> tuple[int, ...]:
    return tuple((index >> (n - 1 - j)) & 1 for j in range(n))


def bits_to_index(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def measure_computational(
    rho: State, rng: np.random.Generator, qubits: Sequence[int] | None = None
) -> tuple[tuple[int, ...], float]:
    """Sample computational-basis outcome bits and return their Born probability."""
    if qubits is not None:
        rho = reduced_density(rho, qubits)
    p = probabilities(rho)
    idx = int(rng.choice(p.size, p=p))
    return index_to_bits(idx, rho.num_qubits), float(p[idx])


# ---------------------------------------------------------------- Pauli algebra

def _popcount(v: int) -> int:
    return bin(v).count("1")


def _mul(a: tuple[int, int, int], b: tuple[int, int, int]) -> tuple[int, int, int]:
    """(i^p1 X^x1 Z^z1)(i^p2 X^x2 Z^z2) on integer bitmasks."""
    p1, x1, z1 = a
    p2, x2, z2 = b
    return ((p1 + p2 + 2 * _popcount(z1 & x2)) % 4, x1 ^ x2, z1 ^ z2)


@dataclass(frozen=True)
class PauliString:
    x: tuple[int, ...]
    z: tuple[int, ...]
    phase_exp: int = 0  # overall phase i**phase_exp

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise QuantumError("x and z masks differ in length")
        object.__setattr__(self, "x", tuple(int(b) & 1 for b in self.x))
        object.__setattr__(self, "z", tuple(int(b) & 1 for b in self.z))
        object.__setattr__(self, "phase_exp", int(self.phase_exp) % 4)

    @property
    def num_qubits(self) -> int:
        return len(self.x)

    @property
    def phase(self) -> complex:
        return 1j**self.phase_exp

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """'XIZY' style label; Y is stored as i*XZ."""
        x = [c in "XY" for c in label]
        z = [c in "ZY" for c in label]
        return cls(tuple(x), tuple(z), label.count("Y"))

    def _packed(self) -> tuple[int, int, int]:
        return (self.phase_exp, bits_to_index(self.x), bits_to_index(self.z))

    @classmethod
    def _unpack(cls, packed: tuple[int, int, int], n: int) -> "PauliString":
        p, x, z = packed
        return cls(index_to_bits(x, n), index_to_bits(z, n), p)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return PauliString._unpack(_mul(self._packed(), other._packed()), self.num_qubits)

    def matrix(self) -> np.ndarray:
        xs = kron_all([X if b else I2 for b in self.x])
        zs = kron_all([Z if b else I2 for b in self.z])
        return self.phase * (xs @ zs)


def pauli_decompose(m: np.ndarray) -> PauliString:
    """Write ``m`` as a phased Pauli string; raise NotCliffordError if impossible."""
    d = m.shape[0]
    n = int(np.log2(d))
    col = m[:, 0]
    x = int(np.argmax(np.abs(col)))
    coeff = col[x]
    exp = int(np.round(np.angle(coeff) / (np.pi / 2))) % 4
    if abs(abs(coeff) - 1) > 1e-6 or abs(coeff - 1j**exp) > 1e-6:
        raise NotCliffordError("operator is not a phased Pauli")
    z = 0
    for j in range(n):
        b = 1 << (n - 1 - j)
        if abs(m[x ^ b, b] / coeff + 1) < 1e-6:
            z |= b
    p = PauliString(index_to_bits(x, n), index_to_bits(z, n), exp)
    if not np.allclose(p.matrix(), m, atol=1e-6):
        raise NotCliffordError("operator is not a phased Pauli")
    return p


@dataclass(frozen=True, eq=False)
class CliffordOp:
    """Dense Clifford unitary together with its action on Pauli generators."""

    num_qubits: int
    matrix: np.ndarray = field(repr=False)
    name: str = ""

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=complex)
        if u.shape != (2**self.num_qubits,) * 2:
            raise QuantumError("matrix shape does not match num_qubits")
        if not np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=ATOL):
            raise QuantumError("matrix is not unitary")
        u.setflags(write=False)
        object.__setattr__(self, "matrix", u)
        n = self.num_qubits
        images_x, images_z = [], []
        for j in range(n):
            for label, sink in (("X", images_x), ("Z", images_z)):
                g = PauliString.from_label("I" * j + label + "I" * (n - j - 1))
                sink.append(pauli_decompose(u @ g.matrix() @ u.conj().T)._packed())
        object.__setattr__(self, "_images", (tuple(images_x), tuple(images_z)))
        object.__setattr__(self, "_cache", {})

    @classmethod
    def from_word(cls, n: int, word: Sequence[tuple[str, Sequence[int]]], name: str = "") -> "CliffordOp":
        """Compose gates in time order: word[0] is applied first."""
        u = np.eye(2**n, dtype=complex)
        for gate, qubits in word:
            u = embed(GATES[gate], qubits, n) @ u
        return cls(n, u, name)

    @classmethod
    def identity(cls, n: int) -> "CliffordOp":
        return cls(n, np.eye(2**n, dtype=complex), "I")

    def _derived(self, tag: str, build) -> "CliffordOp":
        hit = self._cache.get(tag)
        if hit is None:
            hit = build()
            hit._cache[tag] = self  # both maps are involutions
            self._cache[tag] = hit
        return hit

    def dagger(self) -> "CliffordOp":
        return self._derived("dagger", lambda: CliffordOp(self.num_qubits, self.matrix.conj().T, self.name + "^dag"))

    def conjugate(self) -> "CliffordOp":
        """Entrywise complex conjugate (still Clifford)."""
        return self._derived("conj", lambda: CliffordOp(self.num_qubits, self.matrix.conj(), self.name + "^*"))

    def symplectic_matrix(self) -> np.ndarray:
        """GF(2) matrix M with (x', z') = M (x, z) for the Pauli part."""
        n = self.num_qubits
        m = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        for col, (_, xb, zb) in enumerate(self._images[0] + self._images[1]):
            m[:n, col] = index_to_bits(xb, n)
            m[n:, col] = index_to_bits(zb, n)
        return m

    def conjugate_packed(self, packed: tuple[int, int, int]) -> tuple[int, int, int]:
        hit = self._cache.get(packed)
        if hit is not None:
            return hit
        p, xm, zm = packed
        n = self.num_qubits
        acc = (p, 0, 0)
        for j in range(n):
            if (xm >> (n - 1 - j)) & 1:
                acc = _mul(acc, self._images[0][j])
        for j in range(n):
            if (zm >> (n - 1 - j)) & 1:
                acc = _mul(acc, self._images[1][j])
        self._cache[packed] = acc
        return acc


def pauli_conjugate(c: CliffordOp, p: PauliString) -> PauliString:
    """Return P' with C P = P' C (equivalently P' = C P C^dagger)."""
    if c.num_qubits != p.num_qubits:
        raise QuantumError("Clifford and Pauli sizes differ")
    return PauliString._unpack(c.conjugate_packed(p._packed()), p.num_qubits)


def is_clifford(u: np.ndarray) -> bool:
    try:
        CliffordOp(int(np.log2(u.shape[0])), u)
    except NotCliffordError:
        return False
    return True
