"""Experiment and protocol configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto.commitment import LweParams


@dataclass(frozen=True)
class ProtocolParams:
    steane_level: int = 1
    lwe: LweParams = field(default_factory=LweParams)
    nizk: str = "attestation"
    challenge_bits: int = 16

    def __post_init__(self):
        if self.steane_level not in (1, 2):
            raise ValueError("steane_level must be 1 or 2")
        if self.nizk != "attestation":
            raise ValueError("the protocol's NP relation is only wired to the attestation backend")


@dataclass(frozen=True)
class RepetitionConfig:
    k: int = 1
    n_seq: int = 1

    def __post_init__(self):
        if self.k < 1 or self.n_seq < 1:
            raise ValueError("k and n_seq must be at least 1")
