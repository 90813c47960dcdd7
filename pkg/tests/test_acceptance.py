"""The twelve acceptance criteria, one function each.

Run under pytest (a summary section lists PASS/FAIL per criterion) or
directly: ``python3 tests/test_acceptance.py [numbers...]``.
"""

import inspect
import json
import sys
import time
from collections import Counter
from functools import cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (eval_gates, kitaev_hamiltonian, kitaev_local_projector, physical_distribution,  # noqa: E402
                     total_variation)
from qnizk.authcode import (encode, encoded_distribution, keygen, measure_encoded, pad_pushthrough,  # noqa: E402
                            steane_tables, unpermute)
from qnizk.cli import execute, make_config, RunConfig  # noqa: E402
from qnizk.config import RepetitionConfig  # noqa: E402
from qnizk.crypto import (HamiltonicityBackend, LweParams, com_commit, com_gen, com_recover, fhe_enc,  # noqa: E402
                          fhe_eval, fhe_gen, nizk_simulate)
from qnizk.crypto.fhe import fhe_dec_bits, random_circuit  # noqa: E402
from qnizk.crypto.nizk import cycle_graph, path_graph  # noqa: E402
from qnizk.hamiltonian import history_state, reduce_circuit, spectrum_report  # noqa: E402
from qnizk.knowledge import (GuessingProver, WitnesslessProver, extract_aoqk, schema_of,  # noqa: E402
                             zk_simulate)
from qnizk.predicates import eval_Q, eval_Qtilde, slice_teleport  # noqa: E402
from qnizk.protocol import (EprChannel, HonestProver, HonestVerifier, ProtocolContext, load_fixture,  # noqa: E402
                            run_session)
from qnizk.quantum import GATES, CliffordOp, Statevector, embed  # noqa: E402
from qnizk.serialize import canonical_json  # noqa: E402

REJECT_GAP = 0.012311659404862  # same frozen value as test_hamiltonian
SAMPLES = 10_000


@cache
def fixture(name):
    return load_fixture(name)


@cache
def context(name, level=1):
    circ, d = fixture(name)
    return ProtocolContext.build(circ, d["instance"], level)


def witness(name):
    return Statevector.from_bits(fixture(name)[1]["witness"])


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------- 1-3: reduction and code

def criterion_1():
    def body():
        rows = {}
        for name in ("toy", "xor", "reject"):
            circ, d = fixture(name)
            rep = spectrum_report(reduce_circuit(circ), d["instance"])
            rows[name] = (rep.num_qubits, rep.min_eigenvalue, rep.verdict)
        return rows
    rows, secs = timed(body)
    ok = (all(q <= 9 and v == "ok" for q, _, v in rows.values())
          and rows["toy"][1] <= 1e-9 and rows["xor"][1] <= 1e-9
          and rows["reject"][1] > 0 and abs(rows["reject"][1] - REJECT_GAP) < 1e-9 and secs < 10)
    detail = ", ".join(f"{n}: {q}q lambda_min={lo:.3g}" for n, (q, lo, _) in rows.items())
    return ok, f"{detail} ({secs:.1f}s)"


def criterion_2():
    def body():
        worst_term = worst_prop = worst_dense = 0.0
        n_terms = n_groups = 0
        for name in ("toy", "xor", "reject"):
            circ = fixture(name)[0]
            h = reduce_circuit(circ)
            for t in h.terms:
                zero = np.zeros(2**t.k)
                zero[0] = 1
                c = t.clifford.matrix
                ref = c.conj().T @ np.outer(zero, zero) @ c
                worst_term = max(worst_term, np.abs(t.local_projector() - ref).max())
                n_terms += 1
            for step, group in h.prop_groups().items():
                gate = circ.gates[step - 1]
                local, _ = kitaev_local_projector(step, circ.T, gate.unitary)
                window = [q for q in (step - 2, step - 1, step) if 0 <= q < circ.T]
                wires = window + [circ.T + q for q in gate.targets]
                ours = sum(term.projector(h.num_qubits) for term in group)
                worst_prop = max(worst_prop, np.abs(ours - embed(local, wires, h.num_qubits)).max())
                n_groups += 1
            worst_dense = max(worst_dense, np.abs(h.dense() - kitaev_hamiltonian(circ.to_dict())).max())
        return worst_term, worst_prop, worst_dense, n_terms, n_groups
    (wt, wp, wd, nt, ng), secs = timed(body)
    ok = max(wt, wp, wd) <= 1e-9 and secs < 5
    return ok, (f"{nt} terms max err {wt:.1e}, {ng} prop groups vs Kitaev max err {wp:.1e}, "
                f"full H vs oracle {wd:.1e} ({secs:.1f}s)")


def criterion_3():
    sizes = []
    ok = True
    for level, size in ((1, 8), (2, 64)):
        code = steane_tables(level)
        d0 = {w.tobytes() for w in code.D0}
        d1 = {w.tobytes() for w in code.D1}
        ok &= len(code.D0) == len(d0) == size and len(code.D1) == len(d1) == size and not d0 & d1
        sizes.append(f"t={level}: |D0|={len(d0)} |D1|={len(d1)} disjoint={not d0 & d1}")
    return bool(ok), "; ".join(sizes)


# ---------------------------------------------------------------- 4-5: measurement and channel

def _oracle_law(psi, key, c_logical, code):
    c_phys = code.transversal_for(c_logical).matrix
    a, b = psi.amplitudes
    return physical_distribution(a, b, key.traps[0], key.perm, key.a[0], key.b[0], c_phys)


def _index(z):
    return int("".join(str(int(v)) for v in np.asarray(z).reshape(-1)), 2)


def _random_qubit(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return Statevector(1, v / np.linalg.norm(v))


def criterion_4():
    code = steane_tables(1)
    rng = np.random.default_rng(404)
    cliffords = [CliffordOp(1, GATES[g]) for g in ("H", "S", "SDG")] + [
        CliffordOp.from_word(1, [("H", [0]), ("S", [0])]), CliffordOp.identity(1)]

    def body():
        # exact laws against the dense 14-qubit oracle
        worst = 0.0
        for i in range(12):
            key = keygen(1, code, rng)
            psi, c = _random_qubit(rng), cliffords[i % len(cliffords)]
            law = encoded_distribution(encode(psi, key, code), [0], c)
            ours = np.zeros(2**14)
            for z, pr in law.items():
                ours[_index(np.frombuffer(z, dtype=np.uint8))] += pr
            worst = max(worst, 0.5 * np.abs(ours - _oracle_law(psi, key, c, code)).sum())
        # sampled: logical |+>, all traps |+>, C = H gives 8 equally likely outcomes
        key = keygen(1, code, rng)
        key = type(key)(1, np.ones((1, 7), np.uint8), key.perm, key.a, key.b)
        plus = Statevector(1, np.array([1, 1]) / np.sqrt(2))
        h = CliffordOp(1, GATES["H"])
        handle = encode(plus, key, code)
        ref = _oracle_law(plus, key, h, code)
        support = int((ref > 1e-12).sum())
        emp = Counter(_index(measure_encoded(handle, [0], h, rng).z) for _ in range(SAMPLES))
        tv_small = total_variation({k: v / SAMPLES for k, v in emp.items()},
                                   {int(i): ref[i] for i in np.flatnonzero(ref > 1e-15)})
        # sampled, generic keys: an 8-valued statistic of z
        tv_stat = 0.0
        idx = np.arange(2**14)
        bits = (idx[:, None] >> (13 - np.arange(14))) & 1
        for _ in range(3):
            key = keygen(1, code, rng)
            psi, c = _random_qubit(rng), cliffords[int(rng.integers(len(cliffords)))]
            code_pos, trap_pos = key.perm[:7], key.perm[7:]
            stat = bits[:, code_pos].sum(1) % 2 * 4 + bits[:, trap_pos].sum(1) % 2 * 2 + bits[:, trap_pos[0]]
            law = np.bincount(stat, weights=_oracle_law(psi, key, c, code), minlength=8)
            handle = encode(psi, key, code)
            draws = [stat[_index(measure_encoded(handle, [0], c, rng).z)] for _ in range(SAMPLES)]
            emp = np.bincount(draws, minlength=8) / SAMPLES
            tv_stat = max(tv_stat, 0.5 * np.abs(emp - law).sum())
        return worst, support, tv_small, tv_stat
    (worst, support, tv_small, tv_stat), secs = timed(body)
    ok = worst <= 1e-9 and tv_small < 0.02 and tv_stat < 0.02 and secs < 120
    return ok, (f"exact law vs oracle max TV {worst:.1e} (12 keys); sampled TV {tv_small:.4f} on a "
                f"{support}-outcome fixture, {tv_stat:.4f} on an 8-valued statistic (3 random keys), "
                f"{SAMPLES} samples each ({secs:.0f}s)")


def _channel_draw(order, handle, c, code, rng):
    epr = EprChannel(1, code)
    if order == "verifier-first":
        rec = epr.measure((0,), c, rng)
        d = epr.teleport(handle, rng)
    else:
        d = epr.teleport(handle, rng)
        rec = epr.measure((0,), c, rng)
    return rec.z[0], d


def _channel_stats(z, d, key, c_phys, code):
    at, bt = slice_teleport(d, 1, code.N)
    push = pad_pushthrough(key.a ^ at, key.b ^ bt, c_phys)
    word = unpermute((z ^ push.e[0])[None, :], key.perm)[0]
    bit = code.codeword_bit(word[:7])
    traps_ok = int(not word[7:].any())
    return ((-1 if bit is None else bit, traps_ok), (int(z[0]), int(d[0])),
            (int(z.sum() % 2), int(d.sum() % 2)))


def criterion_5():
    code = steane_tables(1)
    rng = np.random.default_rng(505)
    key = keygen(1, code, rng)
    key = type(key)(1, np.ones((1, 7), np.uint8), key.perm, key.a, key.b)  # traps |+>, deterministic under H
    theta = 0.4
    psi = Statevector(1, np.array([np.cos(theta), np.sin(theta)]))
    h = CliffordOp(1, GATES["H"])
    c_phys = code.transversal_for(h)
    handle = encode(psi, key, code)

    # referee: push the dense oracle law (pads zero) through the decoder
    blank = type(key)(1, key.traps, key.perm, np.zeros_like(key.a), np.zeros_like(key.b))
    law = _oracle_law(psi, blank, h, code)
    exact_bits = Counter()
    for i in np.flatnonzero(law > 1e-15):
        z = np.array([(i >> (13 - j)) & 1 for j in range(14)], np.uint8)
        word = unpermute(z[None, :], key.perm)[0]
        exact_bits[(code.codeword_bit(word[:7]), int(not word[7:].any()))] += law[i]
    uniform = {(x, y): 0.25 for x in (0, 1) for y in (0, 1)}
    exact = [dict(exact_bits), uniform, uniform]

    def body():
        counts = {o: [Counter(), Counter(), Counter()] for o in ("verifier-first", "prover-first")}
        for order, cs in counts.items():
            for _ in range(SAMPLES):
                z, d = _channel_draw(order, handle, h, code, rng)
                for slot, value in zip(cs, _channel_stats(z, d, key, c_phys, code)):
                    slot[value] += 1
        return counts
    counts, secs = timed(body)
    norm = lambda c: {k: v / SAMPLES for k, v in c.items()}  # noqa: E731
    cross = [total_variation(norm(a), norm(b)) for a, b in zip(*counts.values())]
    vs_exact = [total_variation(norm(c), e) for cs in counts.values() for c, e in zip(cs, exact)]
    ok = max(cross) < 0.02 and max(vs_exact) < 0.02
    return ok, (f"orders agree: TV (decoded bit, traps) {cross[0]:.4f}, (z0, d0) {cross[1]:.4f}, "
                f"parities {cross[2]:.4f}; max TV vs oracle law {max(vs_exact):.4f}; "
                f"{SAMPLES} samples per order ({secs:.0f}s)")


# ---------------------------------------------------------------- 6-7: completeness and soundness

def acceptance_rate(prover, ctx, runs, k=1, verifier=None):
    rep = RepetitionConfig(k=k)
    return float(np.mean([run_session(prover, verifier or HonestVerifier(), ctx, repetition=rep, seed=s).decision
                          for s in range(runs)]))


def criterion_6():
    ctx = context("xor")
    (rate,), secs = timed(lambda: (acceptance_rate(HonestProver(witness("xor")), ctx, 1000),))
    return rate == 1.0 and secs < 120, f"honest xor: {round(rate * 1000)}/1000 accepted ({secs:.0f}s)"


@cache
def a1_single_copy_rate(runs=1000):
    return acceptance_rate(WitnesslessProver(), context("toy"), runs)


def criterion_7():
    toy = context("toy")
    p_hat = a1_single_copy_rate()
    p8 = p_hat**8
    runs = 400
    sigma = np.sqrt(p8 * (1 - p8) / runs)
    k8 = acceptance_rate(WitnesslessProver(), toy, runs, k=8)
    honest2 = acceptance_rate(HonestProver(witness("xor")), context("xor"), 100, k=2)
    limit = max(0.5, p8 + 3 * sigma)
    ok = p_hat < 1 and k8 < limit and honest2 == 1.0
    return ok, (f"A1 on toy: single copy {p_hat:.3f} (predicted 0.900), k=8 {k8:.3f} < {limit:.3f} "
                f"(p^8 = {p8:.3f}); honest k=2 {honest2:.3f}")


# ---------------------------------------------------------------- 8: predicates

def criterion_8():
    ctx = context("xor")
    pc = ctx.predicates
    rng = np.random.default_rng(808)
    state = history_state(ctx.circuit, ctx.x, witness("xor")).state

    def record(key, r):
        support, logical = ctx.challenge(r)
        if rng.random() < 0.5:
            return measure_encoded(encode(state, key, ctx.code), support, logical, rng).z
        return rng.integers(0, 2, (len(support), 2 * ctx.N)).astype(np.uint8)

    def body():
        mism_rr = mism_qt = acc_rr = acc_qt = 0
        for _ in range(SAMPLES):
            key = keygen(ctx.p, ctx.code, rng)
            r = int(rng.integers(1, ctx.m + 2))
            z = record(key, r)
            tele = rng.integers(0, 2, ctx.d_bits).astype(np.uint8) * (rng.random() < 0.5)
            da = rng.integers(0, 2, key.a.shape).astype(np.uint8)
            db = rng.integers(0, 2, key.b.shape).astype(np.uint8)
            lhs = eval_Q(key, r, z, tele, pc)
            rhs = eval_Q(key.shifted(da, db), r, z, tele ^ np.concatenate([da.reshape(-1), db.reshape(-1)]), pc)
            mism_rr += lhs != rhs
            acc_rr += lhs
        zero = np.zeros(ctx.d_bits, dtype=np.uint8)
        for _ in range(SAMPLES):
            key = keygen(ctx.p, ctx.code, rng)
            r = int(rng.integers(1, ctx.m + 1))
            z = record(key, r)
            q = eval_Q(key, r, z, zero, pc)
            mism_qt += q != eval_Qtilde(key, r, z, pc)
            acc_qt += q
        return mism_rr, mism_qt, acc_rr, acc_qt
    (mrr, mqt, arr, aqt), secs = timed(body)
    return mrr == 0 and mqt == 0, (f"pad rerandomization: {mrr} mismatches / {SAMPLES} "
                                   f"({arr} accepting); Q(d=0) vs Q~: {mqt} mismatches / {SAMPLES} "
                                   f"({aqt} accepting) ({secs:.0f}s)")


# ---------------------------------------------------------------- 9-10: knowledge and zero knowledge

def criterion_9():
    xor = context("xor")
    honest = [extract_aoqk(HonestProver(witness("xor")), xor, seed=s) for s in range(200)]
    non_bot = sum(not e.bot for e in honest)
    e_max = max(e.energy for e in honest if not e.bot)
    q_min = min(e.quality for e in honest if not e.bot)
    p_hat = a1_single_copy_rate()
    a1 = [extract_aoqk(WitnesslessProver(), context("toy"), seed=s) for s in range(200)]
    a1_energy = float(np.mean([e.energy for e in a1 if not e.bot]))
    ok = non_bot == 200 and e_max <= 0.01 and q_min >= 0.99 and a1_energy <= (1 - p_hat) + 0.02
    return ok, (f"honest: {non_bot}/200 non-bot, max energy {e_max:.2e}, min quality {q_min:.4f}; "
                f"A1: energy {a1_energy:.3f} <= 1 - p_hat + 0.02 = {1 - p_hat + 0.02:.3f}")


def criterion_10():
    ctx = context("xor")
    runs = 200
    per_r = {r: acceptance_rate(GuessingProver(r), ctx, runs, verifier=HonestVerifier(fixed_r=r))
             for r in range(1, ctx.m + 2)}
    sims = [zk_simulate(HonestVerifier(), ctx, seed=s) for s in range(runs)]
    reals = [run_session(HonestProver(witness("xor")), HonestVerifier(), ctx, seed=s) for s in range(runs)]
    sim_rate = np.mean([s.decision for s in sims])
    real_rate = np.mean([s.decision for s in reals])
    schema_ok = all(schema_of(s.transcript["rounds"]) == schema_of(reals[0].transcript["rounds"]) for s in sims)
    no_witness = "witness" not in inspect.signature(zk_simulate).parameters
    ok = min(per_r.values()) == 1.0 and sim_rate == real_rate == 1.0 and schema_ok and no_witness
    return ok, (f"rho_r accepted {runs}/{runs} for all {len(per_r)} challenges (min rate {min(per_r.values()):.3f}); "
                f"simulated acceptance {sim_rate:.3f} vs real {real_rate:.3f}; schema match {schema_ok}; "
                f"witness-free signature {no_witness}")


# ---------------------------------------------------------------- 11: crypto

def criterion_11():
    from test_crypto import cheating_proof, refresh_tv
    rng = np.random.default_rng(1111)
    params = LweParams()
    kp = com_gen(params, rng)
    recovered = 0
    for i in range(1000):
        payload = rng.integers(0, 2, int(rng.integers(1, 17)))
        res = com_recover(kp.pk, kp.sk, com_commit(kp.pk, payload, int(rng.integers(2**62))))
        recovered += res.ok and np.array_equal(res.payload, payload)
    fk = fhe_gen(rng)
    correct = 0
    for _ in range(50):
        width = int(rng.integers(2, 12))
        circ = random_circuit(width, int(rng.integers(1, 40)), int(rng.integers(1, 6)), rng, max_depth=8)
        x = rng.integers(0, 2, width).astype(np.uint8)
        out = fhe_dec_bits(fk.sk, fhe_eval(fk.pk, circ, fhe_enc(fk.pk, x, rng)))
        correct += out.tolist() == eval_gates(x, circ.gates, circ.outputs)
    tv_hist, tv_double = refresh_tv()
    backend = HamiltonicityBackend()
    crs = backend.setup(rng)
    c5 = cycle_graph(5)
    complete = sum(backend.verify(crs, c5, backend.prove(crs, c5, [0, 1, 2, 3, 4], rng)) for _ in range(20))
    sim_ok = sum(backend.verify(*(lambda cp: (cp[0], c5, cp[1]))(nizk_simulate(backend, c5, rng)))
                 for _ in range(20))
    stmt = path_graph(5)
    forged = sum(backend.verify(crs, stmt, rng.bytes(int(rng.integers(1, 400)))) for _ in range(1000))
    forged += sum(backend.verify(crs, stmt, cheating_proof(crs, stmt, rng)) for _ in range(1000))
    ok = (recovered == 1000 and correct == 50 and tv_hist < 0.02 and tv_double < 0.02
          and complete == 20 and sim_ok == 20 and forged == 0)
    return ok, (f"recover {recovered}/1000; FHE {correct}/50 circuits; refresh TV {tv_hist:.4f} "
                f"(double {tv_double:.4f}); Hamiltonicity completeness {complete}/20, simulator {sim_ok}/20, "
                f"forgeries {forged}/2000 (1000 random strings + 1000 challenge-guessing cheats)")


# ---------------------------------------------------------------- 12: determinism

def criterion_12():
    configs = [
        make_config("honest", "xor", None, None, 1, 2, 2, 42, "honest"),
        make_config("adversary:A1", "toy", None, None, 1, 8, 1, 7, "honest"),
        make_config("adversary:A4", "xor", None, None, 2, 1, 1, 3, "honest"),
        make_config("zk-sim", "xor", None, None, 1, 1, 1, 5, "honest"),
        make_config("extract-aoqk", "xor", None, None, 1, 1, 1, 6, "honest"),
        make_config("extract-poqk", "toy", None, None, 1, 1, 1, 8, "A1"),
    ]
    same = 0
    for cfg in configs:
        first = canonical_json(execute(cfg).transcript)
        replayed = canonical_json(execute(RunConfig.from_dict(json.loads(first)["config"])).transcript)
        same += first == replayed
    return same == len(configs), f"{same}/{len(configs)} transcripts replay byte-identically from their seeds"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run_criterion(num):
    try:
        ok, detail = CRITERIA[num]()
    except Exception as exc:  # a crash is a failure with a reason, not a missing line
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    return bool(ok), detail


def line(num, ok, detail):
    return f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("num", list(CRITERIA))
def test_criterion(num, acceptance_log):
    ok, detail = run_criterion(num)
    acceptance_log[num] = (ok, detail)
    print(line(num, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    chosen = [int(a) for a in sys.argv[1:]] or list(CRITERIA)
    results = [(n, *run_criterion(n)) for n in chosen]
    for n, ok, detail in results:
        print(line(n, ok, detail), flush=True)
    sys.exit(0 if all(ok for _, ok, _ in results) else 1)
