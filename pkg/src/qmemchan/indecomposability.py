"""Probes of how fast a channel forgets its initial memory.

All results here are sampled estimates: a channel passing these probes has
not been proven indecomposable, only failed to show otherwise.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .channels import ChannelSpec, MemoryMap, induced_memory_map, step_joint
from .linalg import DensityMatrix
from .parallel import pmap
from .sampling import child_rngs, memory_pairs, pure_state, random_density

DEFAULT_STEP_BUDGET = 200
RATIO_FLOOR = 1e-8


@dataclasses.dataclass(frozen=True)
class MixingProbeResult:
    epsilon: float
    n_epsilon: int | None
    trajectory: list  # (step, max distance over samples)
    samples_used: int

    @property
    def mixed(self) -> bool:
        return self.n_epsilon is not None


@dataclasses.dataclass(frozen=True, eq=False)
class ContractionEstimate:
    sup_ratio: float
    argmax_pair: tuple | None
    samples_used: int


def _mem(x) -> np.ndarray:
    return x.mat if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def _memory_step(spec: ChannelSpec, rho_q: np.ndarray, memories: np.ndarray, step: int) -> np.ndarray:
    """Apply one use with product input ``rho_q`` to a batch of memory states."""
    phi = induced_memory_map(spec, DensityMatrix(rho_q, validate=False), step)
    return sum(k @ memories @ k.conj().T for k in phi.kraus)


def memory_trajectory_distance(spec: ChannelSpec, inputs: Sequence, omega, sigma, n: int) -> list[float]:
    """Trace distance between the memories after ``k = 1..n`` uses.

    Both trajectories see the same per-use inputs ``inputs[0..n-1]``.
    """
    if len(inputs) < n:
        raise ValueError(f"{len(inputs)} inputs given for {n} uses")
    mems = np.stack([_mem(omega), _mem(sigma)])
    if mems.shape[1:] != (spec.d_m, spec.d_m):
        raise linalg.DimensionError(f"memory states must be {spec.d_m}-dimensional")
    out = []
    for k in range(n):
        rho = _mem(inputs[k])
        if rho.shape != (spec.d_q, spec.d_q):
            raise linalg.DimensionError(f"input {k} has shape {rho.shape}, expected ({spec.d_q}, {spec.d_q})")
        mems = _memory_step(spec, rho, mems, 0 if len(spec.unitaries) == 1 else k)
        out.append(linalg.trace_distance(mems[0], mems[1]))
    return out


def _entangled_block_trajectory(spec: ChannelSpec, block: np.ndarray, uses: int, mems: np.ndarray) -> list[np.ndarray]:
    """Memory batches after each use of an entangled ``uses``-use input block."""
    dims = [spec.d_q] * uses + [spec.d_m]
    per_step = [[] for _ in range(uses)]
    for m in mems:
        joint = np.kron(block, m)
        for i in range(uses):
            joint = step_joint(spec, joint, dims, i)
            per_step[i].append(linalg.partial_trace(joint, dims, [uses]))
    return [np.stack(s) for s in per_step]


class _Sequence:
    """One sampled input sequence driving a batch of memory pairs in lockstep."""

    def __init__(self, spec: ChannelSpec, rng: np.random.Generator, pairs, entangled_uses: int, input_sampler):
        self.spec = spec
        self.rng = rng
        self.input_sampler = input_sampler
        self.mems = np.stack([m for pair in pairs for m in pair])
        self.pending: list[np.ndarray] = []
        if entangled_uses:
            block = pure_state(spec.d_q ** entangled_uses, rng)
            self.pending = _entangled_block_trajectory(spec, block, entangled_uses, self.mems)

    def step(self) -> np.ndarray:
        if self.pending:
            self.mems = self.pending.pop(0)
        else:
            self.mems = _memory_step(self.spec, self.input_sampler(self.spec.d_q, self.rng), self.mems, 0)
        a, b = self.mems[0::2], self.mems[1::2]
        return np.array([linalg.trace_distance(x, y) for x, y in zip(a, b)])


def _default_input_sampler(d: int, rng) -> np.ndarray:
    return pure_state(d, rng) if rng.uniform() < 0.5 else random_density(d, rng)


def estimate_mixing_time(
    spec: ChannelSpec,
    epsilon: float,
    seed: int = 0,
    step_budget: int = DEFAULT_STEP_BUDGET,
    input_sequences: int = 4,
    entangled_sequences: int = 2,
    random_pairs: int = 8,
    input_sampler: Callable | None = None,
    memory_pair_sampler: Callable | None = None,
    jobs: int = 1,
) -> MixingProbeResult:
    """Sampled ``N(epsilon)``: the first step at which every probed pair is within ``epsilon``.

    Each input sequence (product sequences first, then sequences opening with
    an entangled block on up to three uses) drives every memory pair. The
    result is the maximum over samples of the first step whose distance is at
    most ``epsilon``, or ``None`` if some sample never gets there within
    ``step_budget`` steps.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if len(spec.unitaries) > 1:
        raise ValueError("mixing probes need a spec with a single repeated step unitary")
    input_sampler = input_sampler or _default_input_sampler
    memory_pair_sampler = memory_pair_sampler or (lambda rng: memory_pairs(spec.d_m, rng, random_pairs))
    pairs = memory_pair_sampler(child_rngs(seed, 1, 0)[0])
    total = input_sequences + entangled_sequences
    rngs = child_rngs(seed, total, 1)
    block = min(3, step_budget)

    def make(i):
        return _Sequence(spec, rngs[i], pairs, block if i >= input_sequences else 0, input_sampler)

    seqs = pmap(make, range(total), jobs)
    first_hit = np.full((total, len(pairs)), -1)
    trajectory = []
    n_eps = None
    for step in range(1, step_budget + 1):
        dists = np.stack(pmap(lambda s: s.step(), seqs, jobs))
        hit = (dists <= epsilon) & (first_hit < 0)
        first_hit[hit] = step
        trajectory.append((step, float(dists.max())))
        if np.all(first_hit > 0):
            n_eps = int(first_hit.max())
            break
    return MixingProbeResult(epsilon, n_eps, trajectory, total * len(pairs))


def contraction_coefficient(phi: MemoryMap, seed: int = 0, samples: int = 64, pair_sampler: Callable | None = None) -> ContractionEstimate:
    """Largest sampled ``|phi(w) - phi(s)| / |w - s|``; a lower bound on the true coefficient.

    Basis pairs are always included. Pairs closer than 1e-8 are skipped.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    d = phi.dim
    rng = child_rngs(seed, 1, 2)[0]
    if pair_sampler is None:
        pairs = memory_pairs(d, rng, 0)
        pairs += [_random_pair(d, rng, k % 3) for k in range(samples)]
    else:
        pairs = pair_sampler(rng)
    best, arg, used = 0.0, None, 0
    for a, b in pairs:
        den = linalg.trace_distance(a, b)
        if den < RATIO_FLOOR:
            continue
        used += 1
        ratio = linalg.trace_distance(phi(a), phi(b)) / den
        if ratio > best:
            best, arg = ratio, (a, b)
    return ContractionEstimate(best, arg, used)


def _random_pair(d: int, rng, kind: int) -> tuple[np.ndarray, np.ndarray]:
    if kind == 0:
        return pure_state(d, rng), pure_state(d, rng)
    if kind == 1:
        t = rng.uniform()
        mixed = np.eye(d, dtype=complex) / d
        return t * pure_state(d, rng) + (1 - t) * mixed, t * pure_state(d, rng) + (1 - t) * mixed
    return np.diag(rng.dirichlet(np.ones(d))).astype(complex), np.diag(rng.dirichlet(np.ones(d))).astype(complex)


def check_memory_continuity(spec: ChannelSpec, trials: int = 100, seed: int = 0) -> float:
    """Max over random ``(rho, omega, sigma)`` of ``|L[omega]rho - L[sigma]rho| - |omega - sigma|``.

    A single use is simulated from each memory. Non-positive values mean the
    output never moved further apart than the memories did.
    """
    worst = -math.inf
    for rng in child_rngs(seed, trials, 3):
        rho = random_density(spec.d_q, rng) if rng.uniform() < 0.5 else pure_state(spec.d_q, rng)
        omega = random_density(spec.d_m, rng)
        sigma = pure_state(spec.d_m, rng) if rng.uniform() < 0.5 else random_density(spec.d_m, rng)
        worst = max(worst, continuity_violation(spec, rho, omega, sigma))
    return worst


def continuity_violation(spec: ChannelSpec, rho, omega, sigma) -> float:
    dims = [spec.d_q, spec.d_m]
    outs = []
    for mem in (omega, sigma):
        joint = step_joint(spec, np.kron(_mem(rho), _mem(mem)), dims, 0)
        outs.append(linalg.partial_trace(joint, dims, [0]))
    return linalg.trace_distance(*outs) - linalg.trace_distance(_mem(omega), _mem(sigma))
