"""NIZK-for-NP backends.

attestation: the proof is a MAC over the statement, issued only after the
relation is checked against the witness. It stands in for a real argument so
the homomorphically evaluated prover circuit stays small. Simulation with the
trapdoor yields exactly the same tag.

hamiltonicity: Blum's protocol repeated in parallel and made non-interactive
with a keyed hash (SHA-256 normally, a programmable table in simulation).
"""

from __future__ import annotations

import hashlib
import hmac
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..serialize import canonical_json
from .commitment import (ComPublicKey, Commitment, CommitRandomness, LweParams, com_commit, com_gen,
                         com_verify, expand_randomness)


class NizkRefusal(Exception):
    """The prover declines: the witness does not satisfy the relation."""


class NizkBackend(ABC):
    name: str

    @abstractmethod
    def setup(self, rng: np.random.Generator): ...

    @abstractmethod
    def prove(self, crs, statement, witness, rng: np.random.Generator) -> dict: ...

    @abstractmethod
    def verify(self, crs, statement, proof) -> int: ...

    @abstractmethod
    def sim_setup(self, rng: np.random.Generator) -> tuple[Any, Any]: ...

    @abstractmethod
    def sim_prove(self, crs, trapdoor, statement, rng: np.random.Generator) -> dict: ...

    @abstractmethod
    def validate_crs(self, crs) -> bool: ...


def nizk_simulate(backend: NizkBackend, statement, rng: np.random.Generator):
    """Straight-line simulation: the crs comes first, then a proof from the statement alone."""
    crs, trapdoor = backend.sim_setup(rng)
    return crs, backend.sim_prove(crs, trapdoor, statement, rng)


def _load(proof) -> dict | None:
    if isinstance(proof, dict):
        return proof
    try:
        out = json.loads(proof)
    except (ValueError, TypeError, UnicodeDecodeError):
        return None
    return out if isinstance(out, dict) else None


# ------------------------------------------------------------------ attestation

Relation = Callable[[dict, Any], bool]
RELATIONS: dict[str, Relation] = {}


def register_relation(name: str, fn: Relation) -> None:
    RELATIONS[name] = fn


@dataclass(frozen=True)
class AttestationStatement:
    relation: str
    public: dict

    def encode(self) -> bytes:
        return canonical_json({"relation": self.relation, "statement": self.public}).encode()


@dataclass(frozen=True)
class AttestationCrs:
    crs_id: bytes
    tag_key: bytes = field(repr=False)
    ext_key: bytes = field(repr=False)

    def to_dict(self) -> dict:
        return {"backend": "attestation", "id": self.crs_id.hex()}


def _seal(ext_key: bytes, tag: bytes, data: bytes) -> bytes:
    stream = hashlib.shake_256(ext_key + tag).digest(len(data))
    return bytes(x ^ y for x, y in zip(data, stream))


class AttestationBackend(NizkBackend):
    name = "attestation"

    def setup(self, rng):
        tag_key, ext_key = rng.bytes(32), rng.bytes(32)
        return AttestationCrs(hashlib.sha256(tag_key + ext_key).digest()[:16], tag_key, ext_key)

    def _tag(self, crs: AttestationCrs, statement: AttestationStatement) -> bytes:
        return hmac.new(crs.tag_key, statement.encode(), hashlib.sha256).digest()

    def prove(self, crs, statement, witness, rng=None, seal: bytes | None = None,
              check: Relation | None = None):
        rel = check or RELATIONS.get(statement.relation)
        if rel is None:
            raise NizkRefusal(f"unknown relation {statement.relation!r}")
        if not rel(statement.public, witness):
            raise NizkRefusal("witness does not satisfy the relation")
        tag = self._tag(crs, statement)
        proof = {"tag": tag.hex()}
        if seal is not None:
            proof["sealed"] = _seal(crs.ext_key, tag, seal).hex()
        return proof

    def verify(self, crs, statement, proof) -> int:
        p = _load(proof)
        if p is None or not isinstance(p.get("tag"), str):
            return 0
        try:
            tag = bytes.fromhex(p["tag"])
        except ValueError:
            return 0
        return int(hmac.compare_digest(tag, self._tag(crs, statement)))

    def extract(self, crs: AttestationCrs, proof) -> bytes | None:
        """Knowledge extractor hook: unseal the witness bound to an accepted tag."""
        p = _load(proof)
        if p is None or "sealed" not in p or "tag" not in p:
            return None
        return _seal(crs.ext_key, bytes.fromhex(p["tag"]), bytes.fromhex(p["sealed"]))

    def sim_setup(self, rng):
        crs = self.setup(rng)
        return crs, crs.tag_key

    def sim_prove(self, crs, trapdoor, statement, rng=None):
        return {"tag": hmac.new(trapdoor, statement.encode(), hashlib.sha256).hexdigest()}

    def validate_crs(self, crs) -> bool:
        return (isinstance(crs, AttestationCrs) and len(crs.tag_key) == 32 and len(crs.ext_key) == 32
                and crs.crs_id == hashlib.sha256(crs.tag_key + crs.ext_key).digest()[:16])


# ------------------------------------------------------------------ hamiltonicity

@dataclass(frozen=True)
class GraphStatement:
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=np.uint8)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.array_equal(a, a.T) or a.diagonal().any():
            raise ValueError("adjacency must be a symmetric 0/1 matrix with empty diagonal")
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def to_dict(self) -> dict:
        return {"adjacency": self.adjacency.tolist()}


def cycle_graph(n: int) -> GraphStatement:
    a = np.zeros((n, n), dtype=np.uint8)
    for i in range(n):
        a[i, (i + 1) % n] = a[(i + 1) % n, i] = 1
    return GraphStatement(a)


def path_graph(n: int) -> GraphStatement:
    a = np.zeros((n, n), dtype=np.uint8)
    for i in range(n - 1):
        a[i, i + 1] = a[i + 1, i] = 1
    return GraphStatement(a)


def is_hamiltonian_cycle(adj: np.ndarray, cycle) -> bool:
    n = adj.shape[0]
    cycle = [int(v) for v in cycle]
    if sorted(cycle) != list(range(n)) or n < 3:
        return False
    return all(adj[cycle[i], cycle[(i + 1) % n]] for i in range(n))


def is_cycle_graph(h: np.ndarray) -> bool:
    """True iff h is exactly one Hamiltonian cycle on its vertex set."""
    n = h.shape[0]
    if n < 3 or not np.array_equal(h, h.T) or h.diagonal().any() or (h.sum(axis=1) != 2).any():
        return False
    prev, cur, seen = -1, 0, 1
    while True:
        nxt = [v for v in np.flatnonzero(h[cur]) if v != prev][0]
        if nxt == 0:
            return seen == n
        prev, cur, seen = cur, int(nxt), seen + 1
        if seen > n:
            return False


def _relabel(adj: np.ndarray, phi: np.ndarray) -> np.ndarray:
    out = np.zeros_like(adj)
    out[np.ix_(phi, phi)] = adj
    return out


@dataclass
class HashFunction:
    """h_k(a) -> challenge bits. A table, when present, overrides listed points."""

    key: bytes
    table: dict[bytes, tuple[int, ...]] | None = None

    @staticmethod
    def digest(commitments: list[dict]) -> bytes:
        return hashlib.sha256(canonical_json(commitments).encode()).digest()

    def __call__(self, commitments: list[dict], reps: int) -> tuple[int, ...]:
        d = self.digest(commitments)
        if self.table is not None and d in self.table:
            return self.table[d]
        raw = hashlib.sha256(self.key + d).digest()
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:reps]
        return tuple(int(b) for b in bits)


@dataclass
class HamiltonicityCrs:
    com_pk: ComPublicKey
    hash: HashFunction
    reps: int = 16

    def to_dict(self) -> dict:
        return {"backend": "hamiltonicity", "reps": self.reps, "com_pk": self.com_pk.to_dict(),
                "hash_key": self.hash.key.hex(), "programmable": self.hash.table is not None}


def _seed(rng) -> int:
    return int(rng.integers(0, 2**62))


class HamiltonicityBackend(NizkBackend):
    name = "hamiltonicity"

    def __init__(self, params: LweParams | None = None, reps: int = 16):
        self.params = params or LweParams()
        self.reps = reps

    def setup(self, rng):
        return HamiltonicityCrs(com_gen(self.params, rng).pk, HashFunction(rng.bytes(32)), self.reps)

    def prove(self, crs, statement: GraphStatement, witness, rng):
        g = statement.adjacency
        n = statement.n
        if not is_hamiltonian_cycle(g, witness):
            raise NizkRefusal("witness is not a Hamiltonian cycle of the statement graph")
        cycle = np.asarray(witness, dtype=np.int64)
        sigmas, seeds, coms = [], [], []
        for _ in range(crs.reps):
            sigma = rng.permutation(n)
            h = np.zeros((n, n), dtype=np.uint8)
            for j in range(n):
                u, v = sigma[j], sigma[(j + 1) % n]
                h[u, v] = h[v, u] = 1
            seed = _seed(rng)
            sigmas.append((sigma, h))
            seeds.append(seed)
            coms.append(com_commit(crs.com_pk, h.reshape(-1), seed).to_dict())
        e = crs.hash(coms, crs.reps)
        responses = []
        for (sigma, h), seed, ei in zip(sigmas, seeds, e):
            if ei == 0:
                responses.append({"open": "all", "H": h.reshape(-1).tolist(), "seed": seed})
            else:
                phi = np.empty(n, dtype=np.int64)
                phi[cycle] = sigma  # phi(w_j) = sigma(j)
                responses.append(self._open_nonedges(crs, g, phi, seed))
        return {"commitments": coms, "responses": responses}

    def _open_nonedges(self, crs, g, phi, seed) -> dict:
        n = g.shape[0]
        idx = np.flatnonzero(_relabel(g, phi).reshape(-1) == 0)
        rnd = expand_randomness(crs.com_pk.params, seed, n * n)
        cols = CommitRandomness(rnd.S[:, idx], rnd.E[:, idx], rnd.W[:, idx],
                                None if rnd.E2 is None else rnd.E2[:, idx])
        return {"open": "perm", "phi": phi.tolist(), "columns": cols.to_dict()}

    def verify(self, crs, statement: GraphStatement, proof) -> int:
        try:
            return int(self._verify(crs, statement, proof))
        except (KeyError, ValueError, TypeError, IndexError, AttributeError):
            return 0

    def _verify(self, crs, statement, proof) -> bool:
        p = _load(proof)
        if p is None:
            return False
        coms, resps = p["commitments"], p["responses"]
        if len(coms) != crs.reps or len(resps) != crs.reps:
            return False
        g, n = statement.adjacency, statement.n
        params = crs.com_pk.params
        e = crs.hash(coms, crs.reps)
        for c, resp, ei in zip(coms, resps, e):
            z = Commitment.from_dict(c, params)
            if z.nbits != n * n:
                return False
            if ei == 0:
                if resp["open"] != "all":
                    return False
                h = np.asarray(resp["H"], dtype=np.int64)
                if h.size != n * n or not is_cycle_graph(h.reshape(n, n)):
                    return False
                if not com_verify(crs.com_pk, z, h, int(resp["seed"])):
                    return False
            else:
                if resp["open"] != "perm":
                    return False
                phi = np.asarray(resp["phi"], dtype=np.int64)
                if sorted(phi.tolist()) != list(range(n)):
                    return False
                idx = np.flatnonzero(_relabel(g, phi).reshape(-1) == 0)
                cols = CommitRandomness.from_dict(resp["columns"])
                if cols.S.shape[1] != idx.size:
                    return False
                if not com_verify(crs.com_pk, z.select(idx), np.zeros(idx.size, dtype=np.int64), cols):
                    return False
        return True

    def sim_setup(self, rng):
        table: dict[bytes, tuple[int, ...]] = {}
        crs = HamiltonicityCrs(com_gen(self.params, rng).pk, HashFunction(rng.bytes(32), table), self.reps)
        return crs, table

    def sim_prove(self, crs, trapdoor, statement: GraphStatement, rng):
        g, n = statement.adjacency, statement.n
        while True:
            e = tuple(int(b) for b in rng.integers(0, 2, crs.reps))
            coms, responses = [], []
            for ei in e:
                seed = _seed(rng)
                if ei == 0:
                    sigma = rng.permutation(n)
                    h = np.zeros((n, n), dtype=np.uint8)
                    for j in range(n):
                        h[sigma[j], sigma[(j + 1) % n]] = h[sigma[(j + 1) % n], sigma[j]] = 1
                    responses.append({"open": "all", "H": h.reshape(-1).tolist(), "seed": seed})
                else:
                    h = np.zeros((n, n), dtype=np.uint8)
                    responses.append(self._open_nonedges(crs, g, rng.permutation(n), seed))
                coms.append(com_commit(crs.com_pk, h.reshape(-1), seed).to_dict())
            d = HashFunction.digest(coms)
            if d in trapdoor and trapdoor[d] != e:
                continue  # programming collision: resample
            trapdoor[d] = e
            return {"commitments": coms, "responses": responses}

    def validate_crs(self, crs) -> bool:
        return isinstance(crs, HamiltonicityCrs) and crs.reps >= 1 and crs.com_pk.A.shape == (
            crs.com_pk.params.m_lwe, crs.com_pk.params.n_lwe)
