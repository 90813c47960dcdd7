"""Command-line front end: ``qnizk reduce | run | stats``.

Machine output is JSON lines (one record per line, each with ``schema_version``)
on stdout; a short human summary goes to stderr. Exit codes: 0 accept,
1 reject, 2 input error, 3 internal invariant violation.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from pathlib import Path

import click
import numpy as np
from scipy.stats import norm

from .config import ProtocolParams, RepetitionConfig
from .hamiltonian import CircuitError, VerifierCircuit, reduce_circuit, spectrum_report
from .knowledge import ADVERSARIES, extract_aoqk, extract_poqk, zk_simulate
from .protocol import FIXTURE_DIR, HonestProver, HonestVerifier, ProtocolContext, run_session
from .quantum import Statevector
from .serialize import SCHEMA_VERSION, canonical_json

EXIT_ACCEPT, EXIT_REJECT, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3
MODES = ("honest", "zk-sim", "extract-aoqk", "extract-poqk")
HIST_BINS = np.linspace(0.0, 1.0, 11)


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


class InvariantViolation(Exception):
    """Something that must never happen did; maps to exit code 3."""


# ------------------------------------------------------------------ inputs

def fixture_dir() -> Path:
    return Path(os.environ.get("QNIZK_FIXTURES") or FIXTURE_DIR)


def resolve_circuit(spec: str) -> tuple[Path, VerifierCircuit, dict]:
    """A circuit file path, or the name of a fixture in the fixture directory."""
    path = Path(spec)
    if not path.exists():
        path = fixture_dir() / (spec if spec.endswith(".json") else f"{spec}.json")
    if not path.exists():
        raise InputError(f"no circuit file or fixture named {spec!r} (fixture dir: {fixture_dir()})")
    try:
        circuit = VerifierCircuit.load(path)
        defaults = json.loads(path.read_text()).get("defaults", {})
    except CircuitError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return path, circuit, dict(defaults)


def _bits(s: str | None, what: str) -> str:
    s = "" if s is None else s.strip()
    if any(ch not in "01" for ch in s):
        raise InputError(f"--{what} must be a bitstring, got {s!r}")
    return s


@dataclass(frozen=True)
class RunConfig:
    mode: str
    circuit: dict
    instance: str
    witness: str
    steane_level: int = 1
    k: int = 1
    n_seq: int = 1
    seed: int = 0
    prover: str = "honest"
    circuit_source: str = ""

    def validate(self) -> None:
        if self.mode not in MODES and not (self.mode.startswith("adversary:") and self.mode[10:] in ADVERSARIES):
            raise InputError(f"unknown mode {self.mode!r}; expected one of {MODES} or adversary:<{'|'.join(ADVERSARIES)}>")
        if self.prover != "honest" and self.prover not in ADVERSARIES:
            raise InputError(f"unknown prover {self.prover!r}")
        if self.steane_level not in (1, 2):
            raise InputError("--steane-level must be 1 or 2")
        if self.k < 1 or self.n_seq < 1:
            raise InputError("--parallel-k and --sequential must be at least 1")
        if self.mode in ("zk-sim", "extract-aoqk", "extract-poqk") and (self.k, self.n_seq) != (1, 1):
            raise InputError(f"mode {self.mode} runs a single copy; drop --parallel-k/--sequential")
        if self.seed < 0:
            raise InputError("--seed must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            return cls(**d)
        except TypeError as exc:
            raise InputError(f"transcript config unreadable: {exc}") from exc


def make_config(mode, circuit, instance, witness, steane_level, parallel_k, sequential, seed, prover) -> RunConfig:
    if seed is None:
        raise InputError("--seed is required")
    path, circ, defaults = resolve_circuit(circuit)
    instance = _bits(instance if instance is not None else defaults.get("instance", "0" * circ.n_instance), "instance")
    witness = _bits(witness if witness is not None else defaults.get("witness", "0" * circ.c_witness), "witness")
    if len(instance) != circ.n_instance:
        raise InputError(f"instance has {len(instance)} bits, circuit expects {circ.n_instance}")
    if len(witness) != circ.c_witness:
        raise InputError(f"witness has {len(witness)} bits, circuit expects {circ.c_witness}")
    cfg = RunConfig(mode, circ.to_dict(), instance, witness, steane_level, parallel_k, sequential, seed, prover,
                    str(circuit))
    cfg.validate()
    return cfg


@lru_cache(maxsize=16)
def _cached_context(circuit_json: str, instance: str, level: int) -> ProtocolContext:
    return ProtocolContext.build(VerifierCircuit.from_dict(json.loads(circuit_json)), instance, level)


def _context(cfg: RunConfig) -> tuple[ProtocolContext, Statevector]:
    # reduction and challenge tables are the expensive part of a trial; reuse them across seeds
    try:
        ctx = _cached_context(canonical_json(cfg.circuit), cfg.instance, cfg.steane_level)
    except (CircuitError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    return ctx, Statevector.from_bits(cfg.witness)


def _prover(name: str, witness: Statevector, ctx: ProtocolContext):
    return HonestProver(witness) if name == "honest" else ADVERSARIES[name](witness, ctx)


# ------------------------------------------------------------------ execution

@dataclass
class Outcome:
    decision: int
    transcript: dict
    summary: dict


def execute(cfg: RunConfig) -> Outcome:
    """One run: a protocol session, a simulated session, or one extraction attempt."""
    cfg.validate()
    ctx, witness = _context(cfg)
    params = ProtocolParams(steane_level=cfg.steane_level)
    meta = cfg.to_dict()
    if cfg.mode == "zk-sim":
        res = zk_simulate(HonestVerifier(), ctx, params, seed=cfg.seed)
        res.transcript["config"] = meta
        return Outcome(res.decision, res.transcript, {"r": [c.r for c in res.copies]})
    if cfg.mode in ("extract-aoqk", "extract-poqk"):
        fn = extract_aoqk if cfg.mode == "extract-aoqk" else extract_poqk
        ext = fn(_prover(cfg.prover, witness, ctx), ctx, params, seed=cfg.seed)
        report = ext.to_dict()
        transcript = {"version": SCHEMA_VERSION, "context": ctx.ctx_id, "extraction": report, "config": meta}
        return Outcome(int(not ext.bot), transcript, {k: report[k] for k in ("bot", "energy", "quality", "reason")})
    name = "honest" if cfg.mode == "honest" else cfg.mode.split(":", 1)[1]
    res = run_session(_prover(name, witness, ctx), HonestVerifier(), ctx, params,
                      RepetitionConfig(cfg.k, cfg.n_seq), seed=cfg.seed, meta=meta)
    return Outcome(res.decision, res.transcript, {"r": [c.r for c in res.copies]})


def _trial(args: tuple[dict, int]) -> dict:
    cfg_d, seed = args
    cfg = replace(RunConfig.from_dict(cfg_d), seed=seed)
    out = execute(cfg)
    return {"seed": seed, "decision": out.decision, **out.summary}


def trial_seeds(base: int, trials: int) -> list[int]:
    """Per-trial seeds split off the base seed; independent of worker count."""
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(base).spawn(trials)]


def wilson(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    z = float(norm.ppf(0.5 + level / 2))
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


def _histogram(values: list[float]) -> dict:
    counts, edges = np.histogram(np.clip(values, 0.0, 1.0), bins=HIST_BINS)
    return {"edges": [round(float(e), 6) for e in edges], "counts": [int(c) for c in counts]}


def aggregate(cfg: RunConfig, rows: list[dict]) -> dict:
    ctx, _ = _context(cfg)
    m, n = ctx.m, ctx.n
    trials = len(rows)
    acc = sum(r["decision"] for r in rows)
    report = {
        "schema_version": SCHEMA_VERSION, "kind": "stats", "mode": cfg.mode, "trials": trials,
        "base_seed": cfg.seed, "accepted": acc, "acceptance_rate": acc / trials,
        "wilson95": list(wilson(acc, trials)), "m": m, "n": n,
    }
    if cfg.mode.startswith("extract"):
        good = [r for r in rows if not r["bot"]]
        energies = [r["energy"] for r in good]
        qualities = [r["quality"] for r in good]
        report["extraction"] = {
            "non_bot": len(good), "bot": trials - len(good),
            "mean_energy": float(np.mean(energies)) if good else None,
            "max_energy": float(np.max(energies)) if good else None,
            "mean_quality": float(np.mean(qualities)) if good else None,
            "energy_histogram": _histogram(energies), "quality_histogram": _histogram(qualities),
        }
        return report
    per_r: dict[int, list[int]] = {}
    for row in rows:
        for r in row["r"]:
            per_r.setdefault(int(r), []).append(row["decision"])
    copies = sum(len(v) for v in per_r.values())
    report["per_challenge"] = [
        {"r": r, "count": len(v), "frequency": len(v) / copies, "accepted": int(sum(v)),
         "acceptance_rate": sum(v) / len(v)} for r, v in sorted(per_r.items())]
    inst = len(per_r.get(m + 1, []))
    report["instance_check"] = {"expected": n / (m + n), "observed": inst / copies if copies else 0.0,
                                "wilson95": list(wilson(inst, copies))}
    return report


# ------------------------------------------------------------------ output

def emit(record: dict, out: str | None) -> None:
    line = canonical_json(record) + "\n"
    if out:
        with open(out, "a", encoding="utf-8") as fh:
            fh.write(line)
    else:
        sys.stdout.write(line)


def say(msg: str) -> None:
    click.echo(msg, err=True)


def _guard(fn):
    """Map exceptions to the exit-code contract."""
    try:
        code = fn()
    except InputError as exc:
        say(f"error: {exc}")
        code = EXIT_INPUT
    except InvariantViolation as exc:
        say(f"invariant violated: {exc}")
        code = EXIT_INVARIANT
    except Exception as exc:  # anything unexpected is an internal failure
        say(f"internal error: {type(exc).__name__}: {exc}")
        code = EXIT_INVARIANT
    sys.exit(code)


# ------------------------------------------------------------------ commands

@click.group()
def cli():
    """Run reductions, protocol sessions and Monte Carlo statistics."""


def _run_options(f):
    opts = [
        click.option("--mode", default="honest", show_default=True,
                     help="honest | adversary:<A1..A4> | zk-sim | extract-aoqk | extract-poqk"),
        click.option("--circuit", default="xor", show_default=True, help="Circuit JSON path or fixture name."),
        click.option("--instance", default=None, help="Instance bits (fixture default if omitted)."),
        click.option("--witness", default=None, help="Witness basis bits for honest provers."),
        click.option("--steane-level", type=int, default=1, show_default=True),
        click.option("--parallel-k", type=int, default=1, show_default=True),
        click.option("--sequential", type=int, default=1, show_default=True, help="Sequential rounds."),
        click.option("--seed", type=int, default=None, help="Base seed (required)."),
        click.option("--prover", default="honest", show_default=True,
                     help="Prover the extractors run against (honest or an adversary name)."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@cli.command()
@click.option("--circuit", required=True, help="Circuit JSON path or fixture name.")
@click.option("--instance", default=None)
@click.option("--max-qubits", type=int, default=12, show_default=True, help="Diagonalize only up to this size.")
@click.option("--out", default=None, help="Write the Hamiltonian JSON here.")
def reduce(circuit, instance, max_qubits, out):
    """Reduce a circuit to a Clifford Hamiltonian and report its spectrum."""

    def body():
        path, circ, defaults = resolve_circuit(circuit)
        x = _bits(instance if instance is not None else defaults.get("instance", "0" * circ.n_instance), "instance")
        if len(x) != circ.n_instance:
            raise InputError(f"instance has {len(x)} bits, circuit expects {circ.n_instance}")
        h = reduce_circuit(circ)
        rep = spectrum_report(h, x, max_qubits=max_qubits)
        if out:
            Path(out).write_text(canonical_json(h.to_dict()) + "\n")
        emit({"schema_version": SCHEMA_VERSION, "kind": "reduce", "circuit": str(path), "instance": x,
              "hamiltonian_file": out, **rep.to_dict()}, None)
        lo = "n/a" if rep.min_eigenvalue is None else f"{rep.min_eigenvalue:.3e}"
        say(f"{path.name}: {h.num_qubits} qubits, {h.m} terms, min eigenvalue {lo}, "
            f"best acceptance {rep.max_acceptance:.4f}, check {rep.verdict}")
        return EXIT_INVARIANT if rep.verdict == "violated" else EXIT_ACCEPT

    _guard(body)


@cli.command()
@_run_options
@click.option("--out", default=None, help="Write the transcript JSON here.")
@click.option("--replay", "replay", default=None, type=click.Path(), help="Re-run a transcript and compare bytes.")
def run(mode, circuit, instance, witness, steane_level, parallel_k, sequential, seed, prover, out, replay):
    """One protocol run. Exit 0 on accept, 1 on reject."""

    def body():
        if replay:
            try:
                recorded = Path(replay).read_text()
                cfg = RunConfig.from_dict(json.loads(recorded)["config"])
            except (OSError, KeyError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read transcript {replay}: {exc}") from exc
            outcome = execute(cfg)
            fresh = canonical_json(outcome.transcript) + "\n"
            same = fresh == recorded
            emit({"schema_version": SCHEMA_VERSION, "kind": "replay", "transcript": replay, "identical": same,
                  "decision": outcome.decision}, None)
            if not same:
                raise InvariantViolation(f"replay of {replay} differs from the recorded transcript")
            say(f"replay identical ({len(fresh)} bytes), decision {outcome.decision}")
            return EXIT_ACCEPT if outcome.decision else EXIT_REJECT
        cfg = make_config(mode, circuit, instance, witness, steane_level, parallel_k, sequential, seed, prover)
        outcome = execute(cfg)
        text = canonical_json(outcome.transcript) + "\n"
        record = {"schema_version": SCHEMA_VERSION, "kind": "run", "mode": cfg.mode, "seed": cfg.seed,
                  "decision": outcome.decision, **outcome.summary}
        if out:
            Path(out).write_text(text)
            record["transcript_file"] = out
        else:
            record["transcript"] = outcome.transcript
        emit(record, None)
        verdict = ("witness extracted" if outcome.decision else "extraction returned bot") \
            if cfg.mode.startswith("extract") else ("accept" if outcome.decision else "reject")
        say(f"{cfg.mode} on {cfg.circuit_source} (seed {cfg.seed}): {verdict}")
        return EXIT_ACCEPT if outcome.decision else EXIT_REJECT

    _guard(body)


@cli.command()
@_run_options
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes.")
@click.option("--out", default=None, help="Append the JSON-lines report here instead of stdout.")
def stats(mode, circuit, instance, witness, steane_level, parallel_k, sequential, seed, prover, trials, jobs, out):
    """Monte Carlo over many seeded trials."""

    def body():
        if trials < 1:
            raise InputError("--trials must be at least 1")
        cfg = make_config(mode, circuit, instance, witness, steane_level, parallel_k, sequential, seed, prover)
        work = [(cfg.to_dict(), s) for s in trial_seeds(cfg.seed, trials)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(_trial, work, chunksize=max(1, trials // (4 * jobs))))
        else:
            rows = [_trial(w) for w in work]
        report = aggregate(cfg, rows)
        emit(report, out)
        lo, hi = report["wilson95"]
        say(f"{cfg.mode}: {report['accepted']}/{trials} accepted "
            f"(rate {report['acceptance_rate']:.3f}, 95% CI [{lo:.3f}, {hi:.3f}])")
        if "extraction" in report and report["extraction"]["mean_energy"] is not None:
            say(f"mean extracted energy {report['extraction']['mean_energy']:.4f}, "
                f"mean quality {report['extraction']['mean_quality']:.4f}")
        return EXIT_ACCEPT

    _guard(body)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
