"""Knowledge extractors, the zero-knowledge simulator, the decode channel and canned adversaries."""

from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .authcode import (AuthCodeError, EncodingKey, MeasurementRecord, PauliFrameState, decode,
                       hamming_codewords, hamming_parity_check, steane_tables)
from .config import ProtocolParams
from .crypto.commitment import Commitment, bits_of_int, com_commit, com_recover, com_verify, int_of_bits
from .crypto.fhe import fhe_enc, fhe_eval, fhe_gen, fhe_refresh
from .crypto.nizk import AttestationStatement, NizkRefusal
from .hamiltonian import (CircuitError, CliffordHamiltonian, energy, history_state, rejection_energy,
                          witness_map_tau)
from .predicates import eval_Q, slice_teleport
from .protocol import (BACKEND, SEED_DERIVATION, CopyResult, Crs, CrsTrapdoors, EprChannel, HonestProver,
                       PreprocessingMessage, ProtocolContext, ProverMachine, ProverMessage, SessionResult,
                       VerifierMachine, _seed, collapse_challenge, encode_alpha, prover_circuit, prover_teleport,
                       setup_crs_with_trapdoors, verifier_decide, verifier_preprocess)
from .quantum import GATES, DensityMatrix, Statevector, apply_unitary, embed, index_to_bits, reduced_density
from .serialize import SCHEMA_VERSION, bits_to_hex, canonical_json, hex_to_bits

OPENING_RELATION = "qma/opening"


# ------------------------------------------------------------------ adversaries

class WitnesslessProver(HonestProver):
    """A1: follows the protocol but encodes |0...0> instead of a history state."""

    name = "A1"

    def __init__(self):
        super().__init__(Statevector.from_bits([0]))

    def logical_state(self, ctx):
        return Statevector.zeros(ctx.p)


class WrongInstanceProver(HonestProver):
    """A2: an honest history state for the complemented instance.

    Without an explicit witness it uses the basis witness the circuit accepts
    best on the wrong instance.
    """

    name = "A2"

    def __init__(self, witness: Statevector | None = None):
        super().__init__(witness)

    def logical_state(self, ctx):
        wrong = tuple(1 - b for b in ctx.x)
        w = self.witness if self.witness is not None else best_basis_witness(ctx.circuit, wrong)
        return history_state(ctx.circuit, wrong, w).state


def best_basis_witness(circuit, x) -> Statevector:
    c = circuit.c_witness
    best, best_p = None, -1.0
    for i in range(2**c):
        w = index_to_bits(i, c)
        p = circuit.acceptance_probability(DensityMatrix.from_bits(list(x) + list(w)))
        if p > best_p + 1e-12:
            best, best_p = w, p
    return Statevector.from_bits(best)


class GuessingProver(HonestProver):
    """A3: prepares the state that passes one chosen challenge with certainty."""

    name = "A3"

    def __init__(self, target_r: int):
        super().__init__(Statevector.from_bits([0]))
        self.target_r = target_r

    def logical_state(self, ctx):
        return build_simulated_witness(ctx.hamiltonian, ctx.x, self.target_r).state


class TamperingProver(HonestProver):
    """A4: honest state, but reports a teleport record with some bits flipped."""

    name = "A4"

    def __init__(self, witness: Statevector, flips: tuple[int, ...] = (0,)):
        super().__init__(witness)
        self.flips = tuple(flips)

    def teleport_record(self, true_d):
        d = np.array(true_d, dtype=np.uint8)
        d[list(self.flips)] ^= 1
        return d


class GarbageCommitmentProver(HonestProver):
    """Sends a key commitment whose error terms are out of range."""

    name = "garbage-commitment"

    def respond(self, crs, ctx, params, pre, rng):
        msg = super().respond(crs, ctx, params, pre, rng)
        z1 = msg.sigma_keys.z1.copy()
        z1[:, :] = rng.integers(0, crs.pk_P.params.q, size=z1.shape)
        bad = type(msg.sigma_keys)(z1, msg.sigma_keys.z2, msg.sigma_keys.z3, msg.sigma_keys.z4)
        return ProverMessage(msg.d, bad, msg.proof_ct)


class BrokenPokProver(HonestProver):
    """Cannot produce the proof of knowledge of its commitment opening."""

    name = "broken-pok"
    pok_ok = False


ADVERSARIES = {
    "A1": lambda witness, ctx: WitnesslessProver(),
    "A2": lambda witness, ctx: WrongInstanceProver(),
    "A3": lambda witness, ctx: GuessingProver(1),
    "A4": lambda witness, ctx: TamperingProver(witness),
}


# ------------------------------------------------------------------ oracle access

class ProverOracle:
    """Black-box access to a prover: invoke a round, undo it, read the message register.

    The internal register is a private snapshot stack; callers never see the
    machine itself.
    """

    def __init__(self, machine: ProverMachine):
        self._machine = machine.fresh()
        self._stack: list[ProverMachine] = []
        self.message: Any = None

    @property
    def name(self) -> str:
        return self._machine.name

    def invoke(self, round_no: int, *args) -> Any:
        self._stack.append(copy.deepcopy(self._machine))
        if round_no == 1:
            self._machine.load(*args)
            self.message = None
        elif round_no == 2:
            self.message = self._machine.respond(*args)
        elif round_no == 0:
            self.message = poqk_first_message(self._machine, *args)
        else:
            raise ValueError(f"prover has no round {round_no}")
        return self.message

    def inverse_invoke(self) -> None:
        if not self._stack:
            raise RuntimeError("nothing to undo")
        self._machine = self._stack.pop()
        self.message = None


# ------------------------------------------------------------------ decode channel

def _steane_vectors() -> tuple[np.ndarray, np.ndarray]:
    words = hamming_codewords()
    v = [np.zeros(128, dtype=complex), np.zeros(128, dtype=complex)]
    for w in words:
        v[int(w.sum() % 2)][int("".join(map(str, w)), 2)] = 1
    return v[0] / np.linalg.norm(v[0]), v[1] / np.linalg.norm(v[1])


def steane_encode_dense(psi: Statevector) -> Statevector:
    if psi.num_qubits != 1:
        raise ValueError("dense Steane encoding takes one qubit")
    z0, z1 = _steane_vectors()
    a, b = psi.amplitudes
    return Statevector(7, a * z0 + b * z1)


def _syndrome_kraus() -> list[np.ndarray]:
    hpc = hamming_parity_check()
    z0, z1 = _steane_vectors()
    iso = np.stack([z0, z1])  # 2 x 128, rows are <0_L| and <1_L|
    x, z = GATES["X"], GATES["Z"]
    eye = np.eye(128, dtype=complex)
    ops = []
    for sx in range(8):      # outcome of Z-type checks: locates an X error
        for sz in range(8):  # outcome of X-type checks: locates a Z error
            proj = eye.copy()
            for i in range(3):
                qs = [j for j in range(7) if hpc[i, j]]
                zs = embed(np.kron(np.kron(z, z), np.kron(z, z)), qs, 7)
                xs = embed(np.kron(np.kron(x, x), np.kron(x, x)), qs, 7)
                sign_z = -1 if (sx >> (2 - i)) & 1 else 1
                sign_x = -1 if (sz >> (2 - i)) & 1 else 1
                proj = proj @ (eye + sign_z * zs) / 2 @ (eye + sign_x * xs) / 2
            corr = eye
            if sx:
                corr = embed(x, [sx - 1], 7) @ corr
            if sz:
                corr = embed(z, [sz - 1], 7) @ corr
            ops.append(iso.conj() @ corr @ proj)
    return ops


_KRAUS: list[np.ndarray] | None = None


def phi_decode_dense(rho: DensityMatrix | Statevector) -> DensityMatrix:
    """Ideal Steane decoder on a 7-qubit state: measure syndromes, correct, unencode."""
    global _KRAUS
    if _KRAUS is None:
        _KRAUS = _syndrome_kraus()
    if isinstance(rho, Statevector):
        rho = rho.density()
    if rho.num_qubits != 7:
        raise ValueError("dense decoder takes 7 qubits")
    out = sum(k @ rho.matrix @ k.conj().T for k in _KRAUS)
    return DensityMatrix(1, out / np.real(np.trace(out)))


def phi_decode(decoded: Statevector | PauliFrameState, level: int) -> Statevector:
    """Apply the ideal decoder blockwise after Dec.

    Dec already removed traps and pads; what remains is the logical state,
    possibly behind a physical Pauli frame on the code qubits. The decoder
    maps each block's frame to its residual logical Pauli.
    """
    if isinstance(decoded, Statevector):
        return decoded
    code = steane_tables(level)
    state = decoded.logical_state
    for i in range(state.num_qubits):
        if code.decode_x_errors(decoded.x_err[i]):
            state = apply_unitary(state, GATES["X"], [i])
        if code.decode_z_errors(decoded.z_err[i]):
            state = apply_unitary(state, GATES["Z"], [i])
    return state


# ------------------------------------------------------------------ extraction

@dataclass
class ExtractedWitness:
    state: DensityMatrix | None
    quality: float = 0.0
    energy: float = float("nan")
    raw_energy: float = float("nan")
    reason: str = ""
    seed: int | None = None
    extractor: str = "aoqk"
    logical_state: Statevector | None = field(default=None, repr=False)

    @property
    def bot(self) -> bool:
        return self.state is None

    def to_dict(self) -> dict:
        ok = not self.bot
        return {
            "success": ok, "bot": self.bot,
            "energy": self.energy if ok else None, "raw_energy": self.raw_energy if ok else None,
            "quality": self.quality if ok else None,
            "acceptance_probability": (1 - self.energy) if ok else None,
            "reason": self.reason, "extractor": self.extractor, "seeds": {"base": self.seed},
        }


def witness_quality(ctx: ProtocolContext, tau: DensityMatrix) -> float:
    """Acceptance of the verifying circuit on |x> with the witness part of tau."""
    u = ctx.circuit
    n = u.n_instance
    wit = tau if n == 0 else _trace_out_front(tau, n)
    rho = DensityMatrix.from_bits(list(ctx.x)).tensor(wit) if n else wit
    return u.acceptance_probability(rho)


def _trace_out_front(rho: DensityMatrix, n: int) -> DensityMatrix:
    return reduced_density(rho, list(range(n, rho.num_qubits)))


def _finish(ctx: ProtocolContext, logical: Statevector, seed, extractor: str) -> ExtractedWitness:
    h = ctx.hamiltonian
    tau = witness_map_tau(ctx.circuit, logical)
    return ExtractedWitness(
        state=logical.density(), quality=witness_quality(ctx, tau),
        energy=rejection_energy(h, ctx.x, logical), raw_energy=energy(h, logical),
        seed=seed, extractor=extractor, logical_state=logical)


def _decode_held(ctx: ProtocolContext, epr: EprChannel, key: EncodingKey, d) -> Statevector:
    held = epr.held_state()
    if held is None:
        raise AuthCodeError("prover never teleported a state")
    a_t, b_t = slice_teleport(np.asarray(d, dtype=np.uint8), ctx.p, ctx.N)
    return phi_decode(decode(held, key.shifted(a_t, b_t)), ctx.code.level)


def _extractor_preprocess(crs: Crs, ctx: ProtocolContext, params: ProtocolParams, epr: EprChannel,
                          rng: np.random.Generator) -> PreprocessingMessage:
    """Honest-looking first message that leaves the EPR halves unmeasured."""
    r = collapse_challenge(int(rng.integers(1, ctx.m + ctx.n + 1)), ctx.m)
    s_V = _seed(rng)
    sigma = com_commit(crs.pk_V, bits_of_int(r, params.challenge_bits), s_V)
    fhe = fhe_gen(rng)
    support, _ = ctx.challenge(r)
    dummy = MeasurementRecord(support, np.zeros((len(support), 2 * ctx.N), dtype=np.uint8))
    return PreprocessingMessage(fhe.pk, epr, sigma, fhe_enc(fhe.pk, encode_alpha(r, s_V, dummy), rng))


def extract_aoqk(prover: ProverMachine, ctx: ProtocolContext, params: ProtocolParams | None = None,
                 seed: int = 0) -> ExtractedWitness:
    """Recover the encoding key from the prover's commitment and decode the teleported state."""
    params = params or ProtocolParams(steane_level=ctx.code.level)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    crs, td = setup_crs_with_trapdoors(params, rng)
    epr = EprChannel(ctx.p, ctx.code)
    pre = _extractor_preprocess(crs, ctx, params, epr, rng)
    oracle = ProverOracle(prover)
    prng = np.random.default_rng(_seed(rng))
    oracle.invoke(1, crs, ctx, params, pre, prng)
    msg: ProverMessage = oracle.invoke(2, crs, ctx, params, pre, prng)
    rec = com_recover(crs.pk_P, td.sk_P, msg.sigma_keys)
    if not rec.ok:
        return ExtractedWitness(None, reason=f"commitment recovery failed: {rec.reason}", seed=seed)
    try:
        key = EncodingKey.from_bits(rec.payload, ctx.code.level, ctx.p)
        logical = _decode_held(ctx, epr, key, msg.d)
    except (AuthCodeError, ValueError) as exc:
        return ExtractedWitness(None, reason=f"malformed opening: {exc}", seed=seed)
    return _finish(ctx, logical, seed, "aoqk")


@dataclass(frozen=True, eq=False)
class PoqkMessage:
    d: np.ndarray
    sigma_keys: Any
    pok: dict | None


def _opening_check(pk):
    def check(public, witness):
        bits, s = witness
        return bool(com_verify(pk, Commitment.from_dict(public["sigma_keys"], pk.params), bits, s))
    return check


def poqk_first_message(prover: ProverMachine, crs: Crs, ctx: ProtocolContext, params: ProtocolParams,
                       epr: EprChannel, rng: np.random.Generator) -> PoqkMessage:
    """First message of the proof-of-knowledge variant: state, key commitment, proof of opening."""
    if not isinstance(prover, HonestProver):
        raise TypeError("this prover does not speak the proof-of-knowledge variant")
    key, true_d = prover_teleport(ctx, prover.logical_state(ctx), epr, rng)
    d = prover.teleport_record(true_d)
    s_P = _seed(rng)
    bits = key.to_bits()
    sigma_keys = com_commit(crs.pk_P, bits, s_P)
    stmt = AttestationStatement(OPENING_RELATION, {"pk_P": crs.pk_P.fingerprint(), "sigma_keys": sigma_keys.to_dict()})
    witness = (bits, s_P) if getattr(prover, "pok_ok", True) else (bits ^ 1, s_P)
    seal = canonical_json({"bits": bits_to_hex(witness[0]), "s": int(witness[1])}).encode()
    try:
        pok = BACKEND.prove(crs.gamma, stmt, witness, seal=seal, check=_opening_check(crs.pk_P))
    except NizkRefusal:
        pok = None
    return PoqkMessage(np.asarray(d, dtype=np.uint8), sigma_keys, pok)


def extract_poqk(prover: ProverMachine, ctx: ProtocolContext, params: ProtocolParams | None = None,
                 seed: int = 0) -> ExtractedWitness:
    """Extract through the proof of knowledge of the key opening instead of a trapdoor."""
    params = params or ProtocolParams(steane_level=ctx.code.level)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    crs, _ = setup_crs_with_trapdoors(params, rng)
    epr = EprChannel(ctx.p, ctx.code)
    oracle = ProverOracle(prover)
    msg: PoqkMessage = oracle.invoke(0, crs, ctx, params, epr, np.random.default_rng(_seed(rng)))
    stmt = AttestationStatement(OPENING_RELATION, {"pk_P": crs.pk_P.fingerprint(), "sigma_keys": msg.sigma_keys.to_dict()})
    if msg.pok is None or not BACKEND.verify(crs.gamma, stmt, msg.pok):
        return ExtractedWitness(None, reason="proof of knowledge rejected", seed=seed, extractor="poqk")
    raw = BACKEND.extract(crs.gamma, msg.pok)
    try:
        body = json.loads(raw)
        bits, s = hex_to_bits(body["bits"]), int(body["s"])
    except (ValueError, KeyError, TypeError):
        return ExtractedWitness(None, reason="extracted opening unreadable", seed=seed, extractor="poqk")
    if not com_verify(crs.pk_P, msg.sigma_keys, bits, s):
        return ExtractedWitness(None, reason="extracted opening does not match the commitment", seed=seed,
                                extractor="poqk")
    try:
        key = EncodingKey.from_bits(bits, ctx.code.level, ctx.p)
        logical = _decode_held(ctx, epr, key, msg.d)
    except (AuthCodeError, ValueError) as exc:
        return ExtractedWitness(None, reason=f"malformed opening: {exc}", seed=seed, extractor="poqk")
    return _finish(ctx, logical, seed, "poqk")


# ------------------------------------------------------------------ simulated witness

@dataclass(frozen=True)
class SimulatedWitness:
    r: int
    state: Statevector


def build_simulated_witness(h: CliffordHamiltonian, x, r: int) -> SimulatedWitness:
    """A state that passes challenge r with certainty.

    r <= m: C^dag |0..01> on the term's support, zeros elsewhere, so the
    rank-one projector annihilates it. r = m+1: clock_1 = 0, instance = x.
    """
    if not 1 <= r <= h.m + 1:
        raise CircuitError(f"challenge {r} outside 1..{h.m + 1}")
    x = tuple(int(b) for b in x)
    p = h.num_qubits
    state = Statevector.zeros(p)
    if r <= h.m:
        term = h.terms[r - 1]
        k = term.k
        prep = term.clifford.matrix.conj().T @ embed(GATES["X"], [k - 1], k)
        state = apply_unitary(state, prep, list(term.support))
    else:
        for q, b in zip(h.registers.instance, x):
            if b:
                state = apply_unitary(state, GATES["X"], [q])
    return SimulatedWitness(r, state)


# ------------------------------------------------------------------ simulator

FIXED_KEY_SEED = 0


def fixed_key(ctx: ProtocolContext) -> EncodingKey:
    """Trivial key (trap |0>, identity permutation, zero pads) the simulator commits to."""
    N, p = ctx.N, ctx.p
    z = np.zeros((p, 2 * N), dtype=np.uint8)
    return EncodingKey(ctx.code.level, np.zeros((p, N), dtype=np.uint8), np.arange(2 * N), z, z.copy())


class SimulatedProver(ProverMachine):
    """Plays the prover with the crs trapdoors and no witness."""

    name = "simulator"

    def __init__(self, trapdoors: CrsTrapdoors):
        self._td = trapdoors
        self.key: EncodingKey | None = None
        self.d = None
        self.r: int | None = None

    def load(self, crs, ctx, params, pre, rng):
        rec = com_recover(crs.pk_V, self._td.sk_V, pre.sigma)
        self.r = int_of_bits(rec.payload) if rec.ok else None
        r = self.r if self.r is not None and 1 <= self.r <= ctx.m + 1 else ctx.m + 1
        state = build_simulated_witness(ctx.hamiltonian, ctx.x, r).state
        self.key, self.d = prover_teleport(ctx, state, pre.epr, rng)

    def respond(self, crs, ctx, params, pre, rng):
        s_P = _seed(rng)
        sigma_keys = com_commit(crs.pk_P, fixed_key(ctx).to_bits(), s_P)
        key, d, td = self.key, self.d, self._td.nizk

        def prove(stmt, r, z):
            try:
                if eval_Q(key, r, z.z, d, ctx.predicates) != 1:
                    return None
            except ValueError:
                return None
            return BACKEND.sim_prove(crs.gamma, td, stmt)

        circ = prover_circuit(crs, ctx, params, pre.sigma, sigma_keys, d, prove)
        ct = fhe_refresh(pre.pk_E, fhe_eval(pre.pk_E, circ, pre.alpha), rng)
        return ProverMessage(np.asarray(d, dtype=np.uint8), sigma_keys, ct)


def zk_simulate(verifier: VerifierMachine, ctx: ProtocolContext, params: ProtocolParams | None = None,
                seed: int = 0) -> SessionResult:
    """Simulated session against ``verifier``; takes no witness by construction."""
    params = params or ProtocolParams(steane_level=ctx.code.level)
    t0 = time.perf_counter()
    (cs,) = np.random.SeedSequence(seed).spawn(1)
    (cs,) = cs.spawn(1)
    s_crs, s_v, s_p = cs.spawn(3)
    crs, td = setup_crs_with_trapdoors(params, np.random.default_rng(s_crs), simulate_nizk=True)
    rng_v, rng_p = np.random.default_rng(s_v), np.random.default_rng(s_p)
    verifier = verifier.fresh()
    sim = SimulatedProver(td)
    epr = EprChannel(ctx.p, ctx.code)
    vstate, pre = verifier.preprocess(crs, ctx, params, epr, rng_v)
    sim.load(crs, ctx, params, pre, rng_p)
    msg = sim.respond(crs, ctx, params, pre, rng_p)
    decision = int(verifier.decide(crs, ctx, vstate, msg))
    copy_t = {"crs": crs.to_dict(), "preprocessing": pre.to_dict(), "prover": msg.to_dict(), "decision": decision}
    result = CopyResult(decision, getattr(vstate, "r", None), copy_t, crs, pre, msg, sim, vstate)
    transcript = {
        "version": SCHEMA_VERSION, "context": ctx.ctx_id, "x": list(ctx.x), "steane_level": ctx.code.level,
        "prover": sim.name, "verifier": verifier.name, "repetition": {"k": 1, "n_seq": 1},
        "seeds": {"base": int(seed), "derivation": SEED_DERIVATION},
        "rounds": [{"copies": [copy_t], "decision": decision}], "decision": decision,
    }
    return SessionResult(decision, [[result]], transcript, time.perf_counter() - t0)


class MismatchedVerifier(VerifierMachine):
    """Commits to one challenge but encrypts a different one."""

    name = "mismatched"

    def preprocess(self, crs, ctx, params, epr, rng):
        state, pre = verifier_preprocess(crs, ctx, params, epr, rng)
        other = state.r % (ctx.m + 1) + 1
        alpha = fhe_enc(pre.pk_E, encode_alpha(other, state.s_V, state.z), rng)
        return state, PreprocessingMessage(pre.pk_E, pre.epr, pre.sigma, alpha)

    def decide(self, crs, ctx, state, msg):
        return verifier_decide(crs, ctx, state, msg)


def schema_of(obj) -> Any:
    """Shape of a transcript: keys, container lengths and bitstring widths, not values."""
    if isinstance(obj, dict):
        return {k: schema_of(v) for k, v in sorted(obj.items())}
    if isinstance(obj, list):
        return ["list", len(obj), schema_of(obj[0]) if obj else None]
    if isinstance(obj, str):
        head, _, tail = obj.partition(":")
        if tail and head.isdigit():
            return ("bits", int(head))
        return "str"
    if isinstance(obj, bool):
        return "bool"
    if isinstance(obj, int):
        return "int"
    if obj is None:
        return "null"
    return type(obj).__name__
