"""Setup, verifier, prover and the session driver.

EPR pairs are simulated lazily by ``EprChannel``: whichever party acts on them
first sees a uniformly random record, and the second action is drawn from the
exact conditional law. The honest session follows the protocol order (verifier
measures during preprocessing, prover teleports afterwards).
"""

from __future__ import annotations

import copy
import hashlib
import json
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .authcode import (EncodedStateHandle, EncodingKey, MeasurementRecord, SteaneCode, encode, keygen,
                       measure_encoded, steane_tables)
from .config import ProtocolParams, RepetitionConfig
from .crypto.commitment import (ComPublicKey, ComSecretKey, Commitment, bits_of_int, com_commit, com_gen,
                                com_verify)
from .crypto.fhe import ByteCircuit, Ciphertext, FheKeyPair, FhePublicKey, fhe_dec, fhe_enc, fhe_eval, fhe_gen, fhe_refresh
from .crypto.nizk import AttestationBackend, AttestationCrs, AttestationStatement, NizkRefusal
from .hamiltonian import CliffordHamiltonian, VerifierCircuit, history_state, reduce_circuit
from .predicates import PredicateContext, PredicateError, eval_Q, slice_teleport
from .quantum import CliffordOp, Statevector, bits_to_index, index_to_bits
from .serialize import SCHEMA_VERSION, bits_to_hex, canonical_json, hex_to_bits

BACKEND = AttestationBackend()
Q_RELATION = "qma/Q"
FIXTURE_DIR = Path(__file__).parent / "fixtures"


class ProtocolOrderError(RuntimeError):
    """An implementation acted out of turn."""


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**62))


def _child(rng: np.random.Generator) -> np.random.Generator:
    return np.random.default_rng(_seed(rng))


# ------------------------------------------------------------------ context

@dataclass(frozen=True, eq=False)
class ProtocolContext:
    circuit: VerifierCircuit
    hamiltonian: CliffordHamiltonian
    x: tuple[int, ...]
    code: SteaneCode

    @classmethod
    def build(cls, circuit: VerifierCircuit, x: Sequence[int] | str, level: int = 1) -> "ProtocolContext":
        x = tuple(int(b) for b in x)
        if len(x) != circuit.n_instance:
            raise ValueError(f"instance has {len(x)} bits, circuit expects {circuit.n_instance}")
        return cls(circuit, reduce_circuit(circuit), x, steane_tables(level))

    @cached_property
    def predicates(self) -> PredicateContext:
        return PredicateContext(self.hamiltonian, self.x, self.code)

    @property
    def p(self) -> int:
        return self.hamiltonian.num_qubits

    @property
    def m(self) -> int:
        return self.hamiltonian.m

    @property
    def n(self) -> int:
        return self.hamiltonian.registers.n_instance

    @property
    def N(self) -> int:
        return self.code.N

    @property
    def d_bits(self) -> int:
        return 4 * self.N * self.p

    @cached_property
    def ctx_id(self) -> str:
        blob = canonical_json({"circuit": self.circuit.to_dict(), "x": list(self.x), "level": self.code.level})
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def challenge(self, r: int) -> tuple[tuple[int, ...], CliffordOp]:
        """Touched logical qubits and the logical Clifford measured for challenge r."""
        return self.predicates.logical_challenge(r)


def load_fixture(name_or_path: str | Path) -> tuple[VerifierCircuit, dict]:
    """A bundled fixture by name, or a circuit file. Returns the circuit and its defaults."""
    path = Path(name_or_path)
    if not path.suffix and not path.exists():
        path = FIXTURE_DIR / f"{name_or_path}.json"
    circuit = VerifierCircuit.load(path)
    data = json.loads(path.read_text())
    return circuit, dict(data.get("defaults", {}))


# ------------------------------------------------------------------ setup

@dataclass(frozen=True, eq=False)
class Crs:
    gamma: AttestationCrs
    pk_P: ComPublicKey
    pk_V: ComPublicKey

    def to_dict(self) -> dict:
        return {"gamma": self.gamma.to_dict(), "pk_P": self.pk_P.to_dict(), "pk_V": self.pk_V.to_dict()}


@dataclass(frozen=True, eq=False)
class CrsTrapdoors:
    sk_P: ComSecretKey
    sk_V: ComSecretKey
    nizk: Any = None


def setup_crs_with_trapdoors(params: ProtocolParams, rng: np.random.Generator,
                             simulate_nizk: bool = False) -> tuple[Crs, CrsTrapdoors]:
    g_rng, p_rng, v_rng = _child(rng), _child(rng), _child(rng)
    if simulate_nizk:
        gamma, td = BACKEND.sim_setup(g_rng)
    else:
        gamma, td = BACKEND.setup(g_rng), None
    kp_P = com_gen(params.lwe, p_rng)
    kp_V = com_gen(params.lwe, v_rng)
    return Crs(gamma, kp_P.pk, kp_V.pk), CrsTrapdoors(kp_P.sk, kp_V.sk, td)


def setup_crs(params: ProtocolParams, rng: np.random.Generator) -> Crs:
    return setup_crs_with_trapdoors(params, rng)[0]


# ------------------------------------------------------------------ EPR pairs

class EprChannel:
    """2Np EPR pairs shared by the prover and the verifier."""

    def __init__(self, p: int, code: SteaneCode):
        self.p, self.code = p, code
        self._held: EncodedStateHandle | None = None
        self._measured: tuple[tuple[int, ...], CliffordOp, MeasurementRecord] | None = None
        self._teleported = False

    @property
    def num_pairs(self) -> int:
        return 2 * self.code.N * self.p

    @property
    def teleported(self) -> bool:
        return self._teleported

    def measure(self, support: Sequence[int], logical: CliffordOp, rng: np.random.Generator) -> MeasurementRecord:
        """Verifier's measurement of its halves of the touched blocks."""
        if self._measured is not None:
            raise ProtocolOrderError("verifier halves were already measured")
        support = tuple(int(s) for s in support)
        if self._held is not None:
            rec = measure_encoded(self._held, support, logical, rng)
        else:
            z = rng.integers(0, 2, size=(len(support), 2 * self.code.N)).astype(np.uint8)
            rec = MeasurementRecord(support, z)
        self._measured = (support, logical, rec)
        return rec

    def teleport(self, handle: EncodedStateHandle, rng: np.random.Generator) -> np.ndarray:
        """Bell-measure the prover's encoded state against its halves; returns the true record d."""
        if self._teleported:
            raise ProtocolOrderError("state already teleported through this channel")
        key = handle.key
        if key.p != self.p or key.level != self.code.level:
            raise ProtocolOrderError("teleported state does not fit the channel")
        self._teleported = True
        p, two_n = self.p, 2 * self.code.N
        if self._measured is None:
            d = rng.integers(0, 2, size=2 * p * two_n).astype(np.uint8)
            at, bt = slice_teleport(d, p, self.code.N)
            self._held = EncodedStateHandle(handle.logical_state, key.shifted(at, bt), handle.code)
            return d
        support, logical, rec = self._measured
        idx = list(support)
        k = len(idx)
        zero = np.zeros((p, two_n), dtype=np.uint8)
        bare = EncodedStateHandle(handle.logical_state, key.with_pads(zero, zero), handle.code)
        w = measure_encoded(bare, support, logical, rng).z  # permuted, pad-free outcome
        target = rec.z ^ w
        inv = self.code.transversal_for(logical).dagger()
        pad_a = np.zeros((k, two_n), dtype=np.uint8)
        pad_b = np.zeros((k, two_n), dtype=np.uint8)
        free = rng.integers(0, 2**k, size=two_n)
        for pos in range(two_n):
            _, xi, zi = inv.conjugate_packed((0, bits_to_index(target[:, pos]), int(free[pos])))
            pad_a[:, pos] = index_to_bits(xi, k)
            pad_b[:, pos] = index_to_bits(zi, k)
        at = rng.integers(0, 2, size=(p, two_n)).astype(np.uint8)
        bt = rng.integers(0, 2, size=(p, two_n)).astype(np.uint8)
        at[idx] = pad_a ^ key.a[idx]
        bt[idx] = pad_b ^ key.b[idx]
        self._held = EncodedStateHandle(handle.logical_state, key.shifted(at, bt), handle.code)
        return np.concatenate([at.reshape(-1), bt.reshape(-1)])

    def held_state(self) -> EncodedStateHandle | None:
        """The verifier-side registers after teleportation (extractor access)."""
        return self._held


# ------------------------------------------------------------------ messages

@dataclass(frozen=True, eq=False)
class VerifierState:
    r: int
    r_prime: int
    s_V: int
    z: MeasurementRecord
    fhe: FheKeyPair
    sigma: Commitment


@dataclass(frozen=True, eq=False)
class PreprocessingMessage:
    pk_E: FhePublicKey
    epr: EprChannel
    sigma: Commitment
    alpha: Ciphertext

    def to_dict(self) -> dict:
        return {"pk_E": self.pk_E.to_dict(), "epr_pairs": self.epr.num_pairs,
                "sigma": self.sigma.to_dict(), "alpha": self.alpha.to_dict()}


@dataclass(frozen=True, eq=False)
class ProverMessage:
    d: np.ndarray
    sigma_keys: Commitment
    proof_ct: Ciphertext

    def to_dict(self) -> dict:
        return {"d": bits_to_hex(self.d), "sigma_keys": self.sigma_keys.to_dict(), "proof_ct": self.proof_ct.to_dict()}


def collapse_challenge(r_prime: int, m: int) -> int:
    return r_prime if r_prime <= m else m + 1


def record_from_dict(d: dict) -> MeasurementRecord:
    return MeasurementRecord(tuple(int(b) for b in d["blocks"]), np.stack([hex_to_bits(s) for s in d["z"]]))


def encode_alpha(r: int, s_V: int, z: MeasurementRecord) -> bytes:
    return canonical_json({"r": int(r), "s_V": int(s_V), "z": z.to_dict()}).encode()


def decode_alpha(raw: bytes) -> tuple[int, int, MeasurementRecord]:
    body = json.loads(raw)
    return int(body["r"]), int(body["s_V"]), record_from_dict(body["z"])


# ------------------------------------------------------------------ verifier

def verifier_preprocess(crs: Crs, ctx: ProtocolContext, params: ProtocolParams, epr: EprChannel,
                        rng: np.random.Generator, r_prime: int | None = None) -> tuple[VerifierState, PreprocessingMessage]:
    m, n = ctx.m, ctx.n
    if r_prime is None:
        r_prime = int(rng.integers(1, m + n + 1))
    r = collapse_challenge(r_prime, m)
    s_V = _seed(rng)
    sigma = com_commit(crs.pk_V, bits_of_int(r, params.challenge_bits), s_V)
    fhe = fhe_gen(rng)
    support, logical = ctx.challenge(r)
    z = epr.measure(support, logical, rng)
    alpha = fhe_enc(fhe.pk, encode_alpha(r, s_V, z), rng)
    return VerifierState(r, r_prime, s_V, z, fhe, sigma), PreprocessingMessage(fhe.pk, epr, sigma, alpha)


def build_statement(ctx: ProtocolContext, pk_P: ComPublicKey, sigma_keys: Commitment, r: int,
                    z: MeasurementRecord, d: np.ndarray) -> AttestationStatement:
    return AttestationStatement(Q_RELATION, {
        "context": ctx.ctx_id, "pk_P": pk_P.fingerprint(), "sigma_keys": sigma_keys.to_dict(),
        "r": int(r), "z": z.to_dict(), "d": bits_to_hex(d), "x": list(ctx.x),
    })


def q_relation(ctx: ProtocolContext, pk_P: ComPublicKey) -> Callable[[dict, Any], bool]:
    """The NP relation: sigma_keys opens to a key under which Q accepts (r, z, d)."""

    def check(public: dict, witness) -> bool:
        key, s_P = witness
        try:
            sig = Commitment.from_dict(public["sigma_keys"], pk_P.params)
            z = record_from_dict(public["z"]).z
            d = hex_to_bits(public["d"])
            if not com_verify(pk_P, sig, key.to_bits(), s_P):
                return False
            return eval_Q(key, int(public["r"]), z, d, ctx.predicates) == 1
        except (KeyError, ValueError, PredicateError):
            return False

    return check


def verifier_decide(crs: Crs, ctx: ProtocolContext, state: VerifierState, msg: ProverMessage) -> int:
    try:
        d = np.asarray(msg.d, dtype=np.uint8)
        if d.size != ctx.d_bits:
            return 0
        out = fhe_dec(state.fhe.sk, msg.proof_ct)
        if out is None:
            return 0
        body = json.loads(out)
        if not np.array_equal(hex_to_bits(body["d"]), d):
            return 0
        stmt = build_statement(ctx, crs.pk_P, msg.sigma_keys, state.r, state.z, d)
        return BACKEND.verify(crs.gamma, stmt, body["proof"])
    except (ValueError, KeyError, TypeError):
        return 0


# ------------------------------------------------------------------ prover

def prover_circuit(crs: Crs, ctx: ProtocolContext, params: ProtocolParams, sigma: Commitment,
                   sigma_keys: Commitment, d: np.ndarray,
                   prove: Callable[[AttestationStatement, int, MeasurementRecord], dict | None]) -> ByteCircuit:
    """The circuit evaluated under encryption: opening check on sigma, then prove (or fail)."""

    def fn(plain: bytes) -> bytes | None:
        try:
            r, s_V, z = decode_alpha(plain)
        except (ValueError, KeyError, TypeError):
            return None
        if not 1 <= r <= ctx.m + 1 or r >= 2**params.challenge_bits:
            return None
        if not com_verify(crs.pk_V, sigma, bits_of_int(r, params.challenge_bits), s_V):
            return None
        stmt = build_statement(ctx, crs.pk_P, sigma_keys, r, z, d)
        proof = prove(stmt, r, z)
        if proof is None:
            return None
        return canonical_json({"d": bits_to_hex(d), "proof": proof}).encode()

    return ByteCircuit("prover-step", fn)


def prover_teleport(ctx: ProtocolContext, state: Statevector, epr: EprChannel,
                    rng: np.random.Generator) -> tuple[EncodingKey, np.ndarray]:
    key = keygen(ctx.p, ctx.code, rng)
    d = epr.teleport(encode(state, key, ctx.code), rng)
    return key, d


def respond_with_key(crs: Crs, ctx: ProtocolContext, params: ProtocolParams, pre: PreprocessingMessage,
                     key: EncodingKey, d: np.ndarray, rng: np.random.Generator,
                     s_P: int | None = None) -> ProverMessage:
    s_P = _seed(rng) if s_P is None else s_P
    sigma_keys = com_commit(crs.pk_P, key.to_bits(), s_P)
    check = q_relation(ctx, crs.pk_P)

    def prove(stmt, r, z):
        try:
            return BACKEND.prove(crs.gamma, stmt, (key, s_P), check=check)
        except NizkRefusal:
            return None

    circ = prover_circuit(crs, ctx, params, pre.sigma, sigma_keys, d, prove)
    ct = fhe_refresh(pre.pk_E, fhe_eval(pre.pk_E, circ, pre.alpha), rng)
    return ProverMessage(np.asarray(d, dtype=np.uint8), sigma_keys, ct)


def prover_respond(crs: Crs, ctx: ProtocolContext, params: ProtocolParams, pre: PreprocessingMessage,
                   witness: Statevector, rng: np.random.Generator) -> ProverMessage:
    """Honest prover end to end: history state, encode, teleport, commit, evaluate, refresh."""
    state = history_state(ctx.circuit, ctx.x, witness).state
    key, d = prover_teleport(ctx, state, pre.epr, rng)
    return respond_with_key(crs, ctx, params, pre, key, d, rng)


# ------------------------------------------------------------------ machines

class ProverMachine(ABC):
    """Interactive prover: load() acts on the EPR halves, respond() sends the message."""

    name = "prover"

    def fresh(self) -> "ProverMachine":
        return copy.copy(self)

    @abstractmethod
    def load(self, crs: Crs, ctx: ProtocolContext, params: ProtocolParams, pre: PreprocessingMessage,
             rng: np.random.Generator) -> None: ...

    @abstractmethod
    def respond(self, crs: Crs, ctx: ProtocolContext, params: ProtocolParams, pre: PreprocessingMessage,
                rng: np.random.Generator) -> ProverMessage: ...


class HonestProver(ProverMachine):
    name = "honest"

    def __init__(self, witness: Statevector):
        self.witness = witness
        self.key: EncodingKey | None = None
        self.d: np.ndarray | None = None
        self.s_P: int | None = None

    def logical_state(self, ctx: ProtocolContext) -> Statevector:
        return history_state(ctx.circuit, ctx.x, self.witness).state

    def teleport_record(self, true_d: np.ndarray) -> np.ndarray:
        return true_d

    def load(self, crs, ctx, params, pre, rng):
        self.key, true_d = prover_teleport(ctx, self.logical_state(ctx), pre.epr, rng)
        self.d = self.teleport_record(true_d)

    def respond(self, crs, ctx, params, pre, rng):
        if self.key is None:
            raise ProtocolOrderError("respond() called before load()")
        self.s_P = _seed(rng)
        return respond_with_key(crs, ctx, params, pre, self.key, self.d, rng, s_P=self.s_P)


class VerifierMachine(ABC):
    name = "verifier"

    def fresh(self) -> "VerifierMachine":
        return copy.copy(self)

    @abstractmethod
    def preprocess(self, crs: Crs, ctx: ProtocolContext, params: ProtocolParams, epr: EprChannel,
                   rng: np.random.Generator) -> tuple[Any, PreprocessingMessage]: ...

    @abstractmethod
    def decide(self, crs: Crs, ctx: ProtocolContext, state: Any, msg: ProverMessage) -> int: ...


class HonestVerifier(VerifierMachine):
    name = "honest"

    def __init__(self, fixed_r: int | None = None):
        self.fixed_r = fixed_r

    def preprocess(self, crs, ctx, params, epr, rng):
        r_prime = None
        if self.fixed_r is not None:
            r_prime = self.fixed_r if self.fixed_r <= ctx.m else ctx.m + 1
        return verifier_preprocess(crs, ctx, params, epr, rng, r_prime=r_prime)

    def decide(self, crs, ctx, state, msg):
        return verifier_decide(crs, ctx, state, msg)


# ------------------------------------------------------------------ sessions

@dataclass(eq=False)
class CopyResult:
    decision: int
    r: int | None
    transcript: dict
    crs: Crs = field(repr=False)
    pre: PreprocessingMessage = field(repr=False)
    msg: ProverMessage = field(repr=False)
    prover: ProverMachine = field(repr=False)
    verifier_state: Any = field(repr=False)


@dataclass(eq=False)
class SessionResult:
    decision: int
    rounds: list[list[CopyResult]]
    transcript: dict
    seconds: float = 0.0

    def to_json(self) -> str:
        return canonical_json(self.transcript)

    @property
    def copies(self) -> list[CopyResult]:
        return [c for rnd in self.rounds for c in rnd]


def run_copy(prover: ProverMachine, verifier: VerifierMachine, ctx: ProtocolContext, params: ProtocolParams,
             seq: np.random.SeedSequence) -> CopyResult:
    s_crs, s_v, s_p = seq.spawn(3)
    crs = setup_crs(params, np.random.default_rng(s_crs))
    rng_v, rng_p = np.random.default_rng(s_v), np.random.default_rng(s_p)
    epr = EprChannel(ctx.p, ctx.code)
    vstate, pre = verifier.preprocess(crs, ctx, params, epr, rng_v)
    prover.load(crs, ctx, params, pre, rng_p)
    if not epr.teleported:
        raise ProtocolOrderError(f"prover {prover.name!r} never used its EPR halves")
    msg = prover.respond(crs, ctx, params, pre, rng_p)
    decision = int(verifier.decide(crs, ctx, vstate, msg))
    transcript = {"crs": crs.to_dict(), "preprocessing": pre.to_dict(), "prover": msg.to_dict(), "decision": decision}
    return CopyResult(decision, getattr(vstate, "r", None), transcript, crs, pre, msg, prover, vstate)


SEED_DERIVATION = "SeedSequence(base).spawn(n_seq)[round].spawn(k)[copy].spawn(3) -> (crs, verifier, prover)"


def run_session(prover: ProverMachine, verifier: VerifierMachine, ctx: ProtocolContext,
                params: ProtocolParams | None = None, repetition: RepetitionConfig | None = None,
                seed: int = 0, meta: dict | None = None) -> SessionResult:
    """k parallel copies per round (accept iff all accept), n_seq rounds in sequence."""
    params = params or ProtocolParams(steane_level=ctx.code.level)
    repetition = repetition or RepetitionConfig()
    t0 = time.perf_counter()
    rounds: list[list[CopyResult]] = []
    for round_seq in np.random.SeedSequence(seed).spawn(repetition.n_seq):
        rounds.append([run_copy(prover.fresh(), verifier.fresh(), ctx, params, cs)
                       for cs in round_seq.spawn(repetition.k)])
    decision = int(all(c.decision for rnd in rounds for c in rnd))
    transcript = {
        "version": SCHEMA_VERSION,
        "context": ctx.ctx_id,
        "x": list(ctx.x),
        "steane_level": ctx.code.level,
        "prover": prover.name,
        "verifier": verifier.name,
        "repetition": {"k": repetition.k, "n_seq": repetition.n_seq},
        "seeds": {"base": int(seed), "derivation": SEED_DERIVATION},
        "rounds": [{"copies": [c.transcript for c in rnd], "decision": int(all(c.decision for c in rnd))}
                   for rnd in rounds],
        "decision": decision,
    }
    if meta:
        transcript["config"] = meta
    return SessionResult(decision, rounds, transcript, time.perf_counter() - t0)
