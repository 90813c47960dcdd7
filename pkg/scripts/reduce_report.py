"""Reduce every bundled circuit to its Clifford Hamiltonian and print the spectrum check."""

import argparse
import json
from dataclasses import dataclass

from qnizk.hamiltonian import reduce_circuit, spectrum_report
from qnizk.protocol import load_fixture


@dataclass
class Settings:
    circuits: tuple[str, ...] = ("toy", "xor", "reject")
    max_qubits: int = 12


def main(s: Settings) -> None:
    for name in s.circuits:
        circ, d = load_fixture(name)
        h = reduce_circuit(circ)
        rep = spectrum_report(h, d.get("instance", ""), max_qubits=s.max_qubits)
        print(json.dumps({"circuit": name, **rep.to_dict()}))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("circuits", nargs="*", default=list(Settings.circuits))
    ap.add_argument("--max-qubits", type=int, default=Settings.max_qubits)
    a = ap.parse_args()
    main(Settings(tuple(a.circuits), a.max_qubits))
