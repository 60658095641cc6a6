"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import math
import time

import numpy as np

from qmemchan import cli, linalg
from qmemchan.capacity import CapacityOptions, capacity_convergence_experiment, ensemble_chi, optimize_chi_n
from qmemchan.channels import (
    ChannelSpec,
    MarkovChannelSpec,
    apply_memory_channel,
    apply_product_channel,
    build_markov_channel,
    depolarizing_spec,
    dilation_from_kraus,
    factorized_spec,
    identity_channel,
    memoryless_spec,
    PAULI,
)
from qmemchan.entropics import SeparableDecomposition, extend_separable, fannes_bound, mutual_information, von_neumann_entropy
from qmemchan.indecomposability import continuity_violation, estimate_mixing_time
from qmemchan.sampling import child_rngs, haar_unitary, pure_state, random_density, random_stochastic
from qmemchan.specfile import load_bundled

from conftest import ACCEPTANCE_LINES

SEED = 0


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _input(d, rng):
    return pure_state(d, rng) if rng.uniform() < 0.5 else random_density(d, rng)


def test_01_cptp_suite():
    t0 = time.perf_counter()
    worst_trace, worst_eig, count = 0.0, 0.0, 0
    for k, rng in enumerate(child_rngs(SEED, 100, 1)):
        d_e = int(rng.integers(1, 5))
        spec = ChannelSpec(2, 2, d_e, (haar_unitary(4 * d_e, rng),), linalg.ket(0, d_e), random_density(2, rng))
        for n in (1, 2, 3):
            out = apply_memory_channel(spec, _input(2**n, rng), random_density(2, rng), n).mat
            worst_trace = max(worst_trace, abs(np.trace(out).real - 1))
            worst_eig = min(worst_eig, np.linalg.eigvalsh(out)[0])
            count += 1
    elapsed = time.perf_counter() - t0
    ok = worst_trace <= 1e-9 and worst_eig >= -1e-8 and elapsed < 30
    report(1, "CPTP suite", ok,
           f"{count} outputs, max |Tr-1| = {worst_trace:.1e}, min eigenvalue = {worst_eig:.1e}, {elapsed:.1f}s")


def test_02_representation_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for rng in child_rngs(SEED, 20, 2):
        m = MarkovChannelSpec(random_stochastic(2, rng), [haar_unitary(2, rng) for _ in range(2)],
                              rng.dirichlet(np.ones(2)))
        isi, fixed = build_markov_channel(m, False), build_markov_channel(m, True)
        for n in (1, 2, 3):
            rho = _input(2**n, rng)
            worst = max(worst, linalg.trace_distance(apply_memory_channel(isi, rho, n=n),
                                                     apply_memory_channel(fixed, rho, n=n)))
    elapsed = time.perf_counter() - t0
    report(2, "Markov forms agree", worst <= 1e-9 and elapsed < 60,
           f"max trace distance {worst:.1e} over 20 chains x n=1..3, {elapsed:.1f}s")


def test_03_memoryless_reduction():
    worst = 0.0
    for rng in child_rngs(SEED, 20, 3):
        u_qe, u_m = haar_unitary(4, rng), haar_unitary(2, rng)
        spec = factorized_spec(u_qe, u_m, 2, 2, 2, random_density(2, rng))
        n = int(rng.integers(1, 4))
        rho = _input(2**n, rng)
        out = apply_memory_channel(spec, rho, n=n).mat
        worst = max(worst, float(np.max(np.abs(out - apply_product_channel(u_qe, rho, n, d_q=2).mat))))
    report(3, "memory traces out", worst <= 1e-10, f"max entry deviation {worst:.1e} over 20 instances")


def test_04_memory_continuity():
    worst = -math.inf
    for rng in child_rngs(SEED, 200, 4):
        d_e = int(rng.integers(1, 5))
        spec = ChannelSpec(2, 2, d_e, (haar_unitary(4 * d_e, rng),), linalg.ket(0, d_e), np.eye(2) / 2)
        worst = max(worst, continuity_violation(spec, _input(2, rng), _input(2, rng), _input(2, rng)))
    report(4, "memory continuity", worst <= 1e-9, f"max violation {worst:.3e} over 200 samples")


def test_05_fannes():
    violations, worst = 0, -math.inf
    for d in (2, 4, 8, 16, 32):
        for rng in child_rngs(SEED, 200, 5, d):
            w, s = random_density(d, rng), random_density(d, rng)
            margin = abs(von_neumann_entropy(w) - von_neumann_entropy(s)) - fannes_bound(linalg.trace_distance(w, s), d)
            worst = max(worst, margin)
            violations += margin > 1e-9
    report(5, "Fannes inequality (Hilbert-Schmidt pairs)", violations == 0,
           f"{violations} violations in 1000 pairs, largest margin {worst:.3f}")


def test_06_separable_extension():
    worst = math.inf
    for rng in child_rngs(SEED, 50, 6):
        terms = int(rng.integers(1, 5))
        dr, dq = int(rng.integers(2, 4)), 2
        rs = [random_density(dr, rng, rank=int(rng.integers(1, dr + 1))) for _ in range(terms)]
        qs = [random_density(dq, rng) for _ in range(terms)]
        dec = SeparableDecomposition(rng.dirichlet(np.ones(terms)), rs, qs)
        gain = mutual_information(extend_separable(dec), cut=[0, 1]) - mutual_information(dec.state())
        worst = min(worst, gain)
    report(6, "extension keeps mutual information", worst >= -1e-9, f"min S(RRbar:Q) - S(R:Q) = {worst:.3e}")


def test_07_mixing_time():
    t0 = time.perf_counter()
    res = estimate_mixing_time(load_bundled("dephasing_markov"), 0.01, seed=SEED)
    elapsed = time.perf_counter() - t0
    traj = np.array([d for _, d in res.trajectory])
    dev = float(np.max(np.abs(traj - 0.8 ** np.arange(1, len(traj) + 1))))
    ok = res.n_epsilon == 21 and dev <= 1e-9 and elapsed < 5
    report(7, "mixing time of dephasing chain", ok,
           f"N(0.01) = {res.n_epsilon}, trajectory deviation from 0.8^k {dev:.1e}, {elapsed:.2f}s")


def test_08_capacity_sanity():
    t0 = time.perf_counter()
    opts = CapacityOptions(restarts=8, seed=SEED)
    ident = [optimize_chi_n(identity_channel(2), None, n, opts).chi_per_use for n in (1, 2)]
    deph_spec = load_bundled("dephasing_markov")
    deph = [optimize_chi_n(deph_spec, None, n, opts).chi_per_use for n in (1, 2)]
    depol = optimize_chi_n(depolarizing_spec(2), None, 1, opts).chi_per_use
    u, de = dilation_from_kraus([math.sqrt(0.9) * np.eye(2), math.sqrt(0.1) * PAULI["X"]])
    fixed = ensemble_chi(memoryless_spec(u, 2, de), [linalg.ket(0, 2), linalg.ket(1, 2)], [0.5, 0.5])
    elapsed = time.perf_counter() - t0
    ok = (min(ident + deph) >= 0.999 and depol <= 1e-4 and abs(fixed - 0.531004) <= 1e-6 and elapsed < 300)
    report(8, "capacity sanity", ok,
           f"identity {min(ident):.6f}, dephasing {min(deph):.6f}, depolarizing {depol:.1e}, "
           f"bit-flip ensemble {fixed:.6f}, {elapsed:.1f}s")


def test_09_convergence_experiment():
    t0 = time.perf_counter()
    eps = 0.1
    exp = capacity_convergence_experiment(load_bundled("pauli_markov"), 4, eps, CapacityOptions(restarts=8, seed=SEED))
    elapsed = time.perf_counter() - t0
    gaps = exp.gaps()
    n_eps = exp.mixing.n_epsilon
    sandwich = all(r.lower_c_n <= r.upper_c_n for r in exp.reports)
    monotone = all(b <= a + 2e-3 for a, b in zip(gaps, gaps[1:]))
    bounded = [r for r in exp.reports if r.gap_bound is not None]
    within = all(r.gap <= r.gap_bound + 2e-3 for r in bounded)
    ok = n_eps is not None and n_eps <= 3 and bounded and sandwich and monotone and within and elapsed < 900
    detail = ", ".join(f"n={r.n} gap {r.gap:.4f}" + (f" (bound {r.gap_bound:.3f})" if r.gap_bound else "")
                       for r in exp.reports)
    report(9, "lower/upper capacities converge", ok, f"N({eps}) = {n_eps}; {detail}; {elapsed:.0f}s")


def test_10_determinism(tmp_path):
    commands = {
        "verify": ["verify", "--channel", "pauli_markov"],
        "capacity": ["capacity", "--channel", "pauli_markov", "--n-max", "2", "--epsilon", "0.1"],
    }
    same, compared = True, 0
    for name, cmd in commands.items():
        for fmt in ("csv", "json"):
            dirs = []
            for jobs in (1, 8):
                out = tmp_path / f"{name}-{fmt}-{jobs}"
                assert cli.run([*cmd, "--format", fmt, "--seed", str(SEED), "--jobs", str(jobs), "--output", str(out)]) == 0
                dirs.append(out)
            files = sorted(p.name for p in dirs[0].iterdir())
            same &= files == sorted(p.name for p in dirs[1].iterdir())
            for f in files:
                same &= (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes()
                compared += 1
    report(10, "byte-identical artifacts at jobs 1 and 8", same, f"{compared} artifact pairs compared")
