"""Run both knowledge extractors against the honest prover and each adversary."""

import argparse
from dataclasses import dataclass

import numpy as np

from qnizk.knowledge import ADVERSARIES, extract_aoqk, extract_poqk
from qnizk.protocol import HonestProver, HonestVerifier, ProtocolContext, load_fixture, run_session
from qnizk.quantum import Statevector


@dataclass
class Settings:
    circuit: str = "xor"
    runs: int = 50


def summarize(reports):
    good = [e for e in reports if not e.bot]
    if not good:
        return f"bot {len(reports)}/{len(reports)}"
    return (f"bot {len(reports) - len(good):>3}/{len(reports)}  energy {np.mean([e.energy for e in good]):.4f}  "
            f"quality {np.mean([e.quality for e in good]):.4f}")


def main(s: Settings) -> None:
    circ, d = load_fixture(s.circuit)
    ctx = ProtocolContext.build(circ, d["instance"])
    witness = Statevector.from_bits(d["witness"])
    provers = {"honest": lambda: HonestProver(witness)}
    provers |= {name: (lambda f=f: f(witness, ctx)) for name, f in ADVERSARIES.items()}
    for name, make in provers.items():
        acc = np.mean([run_session(make(), HonestVerifier(), ctx, seed=i).decision for i in range(s.runs)])
        aoqk = [extract_aoqk(make(), ctx, seed=i) for i in range(s.runs)]
        line = f"{name:>7}  acceptance {acc:.3f}  aoqk: {summarize(aoqk)}"
        try:
            line += f"  poqk: {summarize([extract_poqk(make(), ctx, seed=i) for i in range(s.runs)])}"
        except TypeError:
            line += "  poqk: n/a (needs the attestation hook)"
        print(line)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--circuit", default=Settings.circuit)
    ap.add_argument("--runs", type=int, default=Settings.runs)
    a = ap.parse_args()
    main(Settings(a.circuit, a.runs))
