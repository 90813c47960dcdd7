"""Toy-parameter classical cryptography: commitments, FHE interface, NIZK backends."""

from .commitment import (ComKeyPair, Commitment, LweParams, com_commit, com_gen, com_recover,
                         com_verify)
from .fhe import (BooleanCircuit, ByteCircuit, Ciphertext, FheKeyPair, fhe_dec, fhe_enc, fhe_eval,
                  fhe_gen, fhe_refresh)
from .nizk import (AttestationBackend, AttestationStatement, GraphStatement, HamiltonicityBackend,
                   NizkBackend, NizkRefusal, nizk_simulate)

__all__ = [
    "ComKeyPair", "Commitment", "LweParams", "com_commit", "com_gen", "com_recover", "com_verify",
    "BooleanCircuit", "ByteCircuit", "Ciphertext", "FheKeyPair", "fhe_dec", "fhe_enc", "fhe_eval",
    "fhe_gen", "fhe_refresh",
    "AttestationBackend", "AttestationStatement", "GraphStatement", "HamiltonicityBackend",
    "NizkBackend", "NizkRefusal", "nizk_simulate",
]
