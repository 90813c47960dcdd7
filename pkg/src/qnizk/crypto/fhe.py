"""Transparent reference FHE: ciphertexts carry the plaintext, a nonce and a key tag.

Eval applies the circuit and appends to the history; Refresh discards the
history and draws a fresh nonce, so its output law depends only on
(key, plaintext). The interface is shaped so a real levelled scheme could
sit behind it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

NONCE_BYTES = 16


class FheError(ValueError):
    pass


@dataclass(frozen=True)
class FhePublicKey:
    key_tag: bytes

    def to_dict(self) -> dict:
        return {"key_tag": self.key_tag.hex()}


@dataclass(frozen=True)
class FheSecretKey:
    key_tag: bytes


@dataclass(frozen=True)
class FheKeyPair:
    pk: FhePublicKey
    sk: FheSecretKey


@dataclass(frozen=True)
class Ciphertext:
    key_tag: bytes
    nonce: bytes
    width: int
    payload: bytes | None  # None encodes an encrypted failure symbol
    history: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"key_tag": self.key_tag.hex(), "nonce": self.nonce.hex(), "width": self.width,
                "payload": None if self.payload is None else self.payload.hex(), "history": list(self.history)}

    @classmethod
    def from_dict(cls, d: dict) -> "Ciphertext":
        payload = None if d["payload"] is None else bytes.fromhex(d["payload"])
        return cls(bytes.fromhex(d["key_tag"]), bytes.fromhex(d["nonce"]), int(d["width"]), payload,
                   tuple(d.get("history", ())))


def fhe_gen(rng: np.random.Generator) -> FheKeyPair:
    tag = rng.bytes(16)
    return FheKeyPair(FhePublicKey(tag), FheSecretKey(tag))


def _as_payload(plaintext) -> tuple[int, bytes | None]:
    if plaintext is None:
        return 0, None
    if isinstance(plaintext, (bytes, bytearray)):
        return 8 * len(plaintext), bytes(plaintext)
    bits = np.asarray(plaintext, dtype=np.uint8).reshape(-1)
    if bits.size and bits.max() > 1:
        raise FheError("bit plaintext must be 0/1")
    return int(bits.size), np.packbits(bits).tobytes()


def fhe_enc(pk: FhePublicKey, plaintext, rng: np.random.Generator) -> Ciphertext:
    width, payload = _as_payload(plaintext)
    return Ciphertext(pk.key_tag, rng.bytes(NONCE_BYTES), width, payload)


def _check_key(tag: bytes, ct: Ciphertext) -> None:
    if ct.key_tag != tag:
        raise FheError("ciphertext was produced under a different key")


def fhe_dec(sk: FheSecretKey, ct: Ciphertext) -> bytes | None:
    _check_key(sk.key_tag, ct)
    return ct.payload


def fhe_dec_bits(sk: FheSecretKey, ct: Ciphertext) -> np.ndarray | None:
    raw = fhe_dec(sk, ct)
    if raw is None:
        return None
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[: ct.width].copy()


class FheCircuit:
    """Something Eval can apply: a name, an optional input width, and a plaintext map."""

    name: str
    in_width: int | None

    def apply(self, width: int, payload: bytes) -> tuple[int, bytes | None]:
        raise NotImplementedError


@dataclass(frozen=True)
class ByteCircuit(FheCircuit):
    """Wraps a bytes -> bytes|None function (the protocol's predicate-and-prove circuit)."""

    name: str
    fn: Callable[[bytes], bytes | None] = field(repr=False)
    in_width: int | None = None

    def apply(self, width, payload):
        out = self.fn(payload)
        return (0, None) if out is None else (8 * len(out), out)


_OPS = {
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
    "NAND": lambda a, b: 1 - (a & b),
    "NOT": lambda a, b: 1 - a,
}


@dataclass(frozen=True)
class BooleanCircuit(FheCircuit):
    """Gates (op, i, j) append one wire each; wires 0..in_width-1 are inputs."""

    in_width: int
    gates: tuple[tuple[str, int, int], ...]
    outputs: tuple[int, ...]
    name: str = "boolean"

    def __post_init__(self):
        wires = self.in_width
        for op, i, j in self.gates:
            if op not in _OPS or not (0 <= i < wires and 0 <= j < wires):
                raise FheError(f"bad gate {(op, i, j)}")
            wires += 1
        if any(not 0 <= o < wires for o in self.outputs):
            raise FheError("output wire out of range")

    @property
    def depth(self) -> int:
        level = [0] * self.in_width
        for op, i, j in self.gates:
            level.append(1 + max(level[i], level[j]))
        return max((level[o] for o in self.outputs), default=0)

    def evaluate(self, bits) -> np.ndarray:
        wires = [int(v) for v in np.asarray(bits, dtype=np.uint8).reshape(-1)]
        if len(wires) != self.in_width:
            raise FheError(f"circuit expects {self.in_width} input bits, got {len(wires)}")
        for op, i, j in self.gates:
            wires.append(_OPS[op](wires[i], wires[j]))
        return np.array([wires[o] for o in self.outputs], dtype=np.uint8)

    def apply(self, width, payload):
        bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:width]
        out = self.evaluate(bits)
        return int(out.size), np.packbits(out).tobytes()

    @classmethod
    def identity(cls, width: int) -> "BooleanCircuit":
        return cls(width, (), tuple(range(width)), "identity")

    @classmethod
    def xor_constant(cls, const) -> "BooleanCircuit":
        const = [int(c) for c in const]
        w = len(const)
        gates = []
        # constant one wire built as NOT(x0 XOR x0)
        gates.append(("XOR", 0, 0))
        one = w
        gates.append(("NOT", one, one))
        one = w + 1
        outs = []
        for i, c in enumerate(const):
            if c:
                gates.append(("XOR", i, one))
                outs.append(w + len(gates) - 1)
            else:
                outs.append(i)
        return cls(w, tuple(gates), tuple(outs), "xor-const")


def random_circuit(width: int, n_gates: int, n_out: int, rng: np.random.Generator,
                   max_depth: int = 8) -> BooleanCircuit:
    """Random circuit whose depth stays within ``max_depth``."""
    ops = list(_OPS)
    level = [0] * width
    gates = []
    while len(gates) < n_gates:
        op = ops[int(rng.integers(len(ops)))]
        i, j = (int(v) for v in rng.integers(0, len(level), size=2))
        d = 1 + max(level[i], level[j])
        if d > max_depth:
            continue
        gates.append((op, i, j))
        level.append(d)
    total = width + n_gates
    outs = tuple(int(v) for v in rng.choice(total, size=n_out, replace=False))
    return BooleanCircuit(width, tuple(gates), outs, f"random-{n_gates}")


def fhe_eval(pk: FhePublicKey, circuit: FheCircuit, ct: Ciphertext) -> Ciphertext:
    _check_key(pk.key_tag, ct)
    if ct.payload is not None and circuit.in_width is not None and ct.width != circuit.in_width:
        raise FheError(f"circuit width {circuit.in_width} does not match ciphertext width {ct.width}")
    nonce = hashlib.sha256(ct.nonce + circuit.name.encode()).digest()[:NONCE_BYTES]
    if ct.payload is None:
        width, payload = 0, None
    else:
        width, payload = circuit.apply(ct.width, ct.payload)
    return Ciphertext(pk.key_tag, nonce, width, payload, ct.history + (circuit.name,))


def fhe_refresh(pk: FhePublicKey, ct: Ciphertext, rng: np.random.Generator) -> Ciphertext:
    _check_key(pk.key_tag, ct)
    return Ciphertext(pk.key_tag, rng.bytes(NONCE_BYTES), ct.width, ct.payload, ())
