"""Acceptance against parallel repetition count k, for the honest prover and an adversary.

A cheating prover with single-copy acceptance p should fall off roughly as p^k while
the honest prover stays at 1.
"""

import argparse
from dataclasses import dataclass

from qnizk.cli import wilson
from qnizk.config import RepetitionConfig
from qnizk.knowledge import ADVERSARIES
from qnizk.protocol import HonestProver, HonestVerifier, ProtocolContext, load_fixture, run_session
from qnizk.quantum import Statevector


@dataclass
class Settings:
    circuit: str = "toy"
    adversary: str = "A1"
    ks: tuple[int, ...] = (1, 2, 4, 8)
    runs: int = 200


def rate(prover, ctx, k, runs):
    hits = sum(run_session(prover, HonestVerifier(), ctx, repetition=RepetitionConfig(k=k), seed=s).decision
               for s in range(runs))
    return hits, wilson(hits, runs)


def main(s: Settings) -> None:
    circ, d = load_fixture(s.circuit)
    ctx = ProtocolContext.build(circ, d["instance"])
    witness = Statevector.from_bits(d["witness"])
    cheat = ADVERSARIES[s.adversary](witness, ctx)
    p1 = None
    print(f"{'k':>3} {'honest':>8} {s.adversary:>8}  95% interval      p1^k")
    for k in s.ks:
        good, _ = rate(HonestProver(witness), ctx, k, s.runs)
        bad, (lo, hi) = rate(cheat, ctx, k, s.runs)
        p1 = bad / s.runs if p1 is None and k == 1 else p1
        pred = f"{p1**k:.3f}" if p1 is not None else "-"
        print(f"{k:>3} {good / s.runs:>8.3f} {bad / s.runs:>8.3f}  [{lo:.3f}, {hi:.3f}]  {pred}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--circuit", default=Settings.circuit)
    ap.add_argument("--adversary", default=Settings.adversary, choices=sorted(ADVERSARIES))
    ap.add_argument("--ks", type=int, nargs="+", default=list(Settings.ks))
    ap.add_argument("--runs", type=int, default=Settings.runs)
    a = ap.parse_args()
    main(Settings(a.circuit, a.adversary, tuple(a.ks), a.runs))
