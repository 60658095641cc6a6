"""Memoryless and memory channels given by unitary dilations.

A memory channel is described by a step unitary on ``Q (x) M (x) E`` (in that
factor order). Each use adjoins a fresh environment in ``env_reset``, applies
the step unitary to the current input slot, the shared memory and the fresh
environment, and discards the environment. After ``n`` uses the memory is
traced out as well.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from . import linalg
from .linalg import DensityMatrix, DimensionError
from .sampling import child_rngs, pure_state, random_density

UNITARITY_TOL = 1e-9
STOCHASTIC_TOL = 1e-10

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ValidationError(ValueError):
    """A channel description violates one of its invariants."""


def unitarity_defect(u) -> float:
    u = np.asarray(u, dtype=complex)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def _as_state(rho, dims: Sequence[int] | None = None) -> DensityMatrix:
    if isinstance(rho, DensityMatrix):
        if dims is not None and math.prod(dims) == rho.dim and tuple(dims) != rho.dims:
            return DensityMatrix(rho.mat, dims, validate=False)
        return rho
    return DensityMatrix(rho, dims)


@dataclasses.dataclass(frozen=True, eq=False)
class ChannelSpec:
    """Unitary dilation of a memory channel.

    ``unitaries`` holds one unitary per use, or a single unitary reused at
    every step. ``markov`` keeps the constructor arguments when the spec was
    built by :func:`build_markov_channel`, so both representations can be
    regenerated later.
    """

    d_q: int
    d_m: int
    d_e: int
    unitaries: tuple
    env_reset: np.ndarray
    initial_memory: DensityMatrix
    name: str = ""
    markov: "MarkovChannelSpec | None" = None
    fixed_point_form: bool | None = None

    def __post_init__(self):
        dim = self.d_q * self.d_m * self.d_e
        if min(self.d_q, self.d_m, self.d_e) < 1:
            raise ValidationError("factor dimensions must be positive")
        if not self.unitaries:
            raise ValidationError("at least one step unitary is required")
        us = []
        for i, u in enumerate(self.unitaries):
            u = np.array(u, dtype=complex)
            if u.shape != (dim, dim):
                raise ValidationError(f"step unitary {i} has shape {u.shape}, expected {(dim, dim)}")
            defect = unitarity_defect(u)
            if defect > UNITARITY_TOL:
                raise ValidationError(f"step unitary {i} is not unitary (|U^dag U - I|_max = {defect:.3g})")
            u.setflags(write=False)
            us.append(u)
        object.__setattr__(self, "unitaries", tuple(us))
        env = np.array(self.env_reset, dtype=complex).ravel()
        if env.shape != (self.d_e,):
            raise ValidationError(f"env_reset has length {env.size}, expected {self.d_e}")
        if abs(np.linalg.norm(env) - 1.0) > 1e-9:
            raise ValidationError("env_reset must have unit norm")
        env.setflags(write=False)
        object.__setattr__(self, "env_reset", env)
        mem = _as_state(self.initial_memory)
        if mem.dim != self.d_m:
            raise ValidationError(f"initial memory has dimension {mem.dim}, expected {self.d_m}")
        object.__setattr__(self, "initial_memory", mem)

    @property
    def dim(self) -> int:
        return self.d_q * self.d_m * self.d_e

    def step_unitary(self, i: int) -> np.ndarray:
        if len(self.unitaries) == 1:
            return self.unitaries[0]
        return self.unitaries[i]

    def check_steps(self, n: int) -> None:
        if n < 0:
            raise ValueError("number of uses must be non-negative")
        if len(self.unitaries) > 1 and len(self.unitaries) != n:
            raise DimensionError(f"spec has {len(self.unitaries)} per-step unitaries but n = {n}")

    def step_kraus(self, i: int) -> np.ndarray:
        """Kraus operators on ``Q (x) M`` for step ``i``: ``<e| U |env_reset>``."""
        dq, dm, de = self.d_q, self.d_m, self.d_e
        u = self.step_unitary(i).reshape(dq * dm, de, dq * dm, de)
        k = np.einsum("aebf,f->eab", u, self.env_reset)
        return k


@dataclasses.dataclass(frozen=True, eq=False)
class MarkovChannelSpec:
    """Unitary errors ``V_k`` selected by a Markov chain on memory labels.

    ``transition[j, k]`` is the probability of moving from label ``j`` to
    label ``k``; the error applied at that use is ``V_k``.
    """

    transition: np.ndarray
    kraus_unitaries: tuple
    initial_distribution: np.ndarray

    def __post_init__(self):
        p = np.array(self.transition, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValidationError(f"transition matrix must be square, got shape {p.shape}")
        L = p.shape[0]
        for j, row in enumerate(p):
            if np.any(row < -STOCHASTIC_TOL):
                raise ValidationError(f"transition row {j} has a negative entry")
            if abs(row.sum() - 1.0) > STOCHASTIC_TOL:
                raise ValidationError(f"transition row {j} sums to {row.sum():.12g}, not 1")
        p = np.clip(p, 0.0, None)
        vs = [np.array(v, dtype=complex) for v in self.kraus_unitaries]
        if len(vs) != L:
            raise ValidationError(f"{len(vs)} error unitaries given for {L} memory labels")
        d = vs[0].shape[0]
        for k, v in enumerate(vs):
            if v.shape != (d, d):
                raise ValidationError(f"error unitary {k} has shape {v.shape}, expected {(d, d)}")
            defect = unitarity_defect(v)
            if defect > UNITARITY_TOL:
                raise ValidationError(f"error unitary {k} is not unitary (defect {defect:.3g})")
        pi = np.array(self.initial_distribution, dtype=float).ravel()
        if pi.shape != (L,) or np.any(pi < -STOCHASTIC_TOL) or abs(pi.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValidationError("initial_distribution must be a probability vector over the memory labels")
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "kraus_unitaries", tuple(vs))
        object.__setattr__(self, "initial_distribution", np.clip(pi, 0.0, None))

    @property
    def labels(self) -> int:
        return self.transition.shape[0]

    @property
    def d_q(self) -> int:
        return self.kraus_unitaries[0].shape[0]

    def stationary(self) -> np.ndarray:
        w, v = np.linalg.eig(self.transition.T)
        k = int(np.argmin(np.abs(w - 1.0)))
        pi = np.real(v[:, k])
        return pi / pi.sum()


def complete_unitary(columns: np.ndarray, positions: Sequence[int], dim: int) -> np.ndarray:
    """Embed orthonormal ``columns`` at ``positions`` and fill the rest.

    Free columns come from Gram-Schmidt on the standard basis, taken in index
    order, so the completion is deterministic.
    """
    w = np.asarray(columns, dtype=complex)
    gram = w.conj().T @ w
    defect = float(np.max(np.abs(gram - np.eye(w.shape[1])))) if w.size else 0.0
    if defect > UNITARITY_TOL:
        raise ValidationError(f"defined columns are not orthonormal (defect {defect:.3g})")
    u = np.zeros((dim, dim), dtype=complex)
    u[:, list(positions)] = w
    basis = [w[:, i] for i in range(w.shape[1])]
    free = [c for c in range(dim) if c not in set(positions)]
    fill = []
    for c in range(dim):
        if len(fill) == len(free):
            break
        v = np.zeros(dim, dtype=complex)
        v[c] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - (b.conj() @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            v = v / norm
            basis.append(v)
            fill.append(v)
    if len(fill) != len(free):
        raise ValidationError("could not complete the isometry to a unitary")
    for c, v in zip(free, fill):
        u[:, c] = v
    return u


def dilation_from_kraus(kraus: Sequence[np.ndarray]) -> tuple[np.ndarray, int]:
    """Step unitary on ``S (x) E`` whose ``|0>_E`` column block realizes ``kraus``.

    Returns the unitary and the environment dimension (the Kraus count).
    """
    ks = [np.asarray(k, dtype=complex) for k in kraus]
    d = ks[0].shape[0]
    de = len(ks)
    w = np.zeros((d * de, d), dtype=complex)
    for e, k in enumerate(ks):
        w[e::de, :] = k
    positions = [s * de for s in range(d)]
    return complete_unitary(w, positions, d * de), de


def identity_channel(d_q: int = 2) -> ChannelSpec:
    return ChannelSpec(d_q, 1, 1, (np.eye(d_q, dtype=complex),), np.ones(1), np.ones((1, 1)), name="identity")


def memoryless_spec(u_qe, d_q: int, d_e: int, env_reset=None, name: str = "") -> ChannelSpec:
    """Wrap a ``Q (x) E`` dilation as a memory channel with a trivial memory."""
    env = linalg.ket(0, d_e) if env_reset is None else env_reset
    return ChannelSpec(d_q, 1, d_e, (np.asarray(u_qe, dtype=complex),), env, np.ones((1, 1)), name=name)


def factorized_spec(u_qe, u_m, d_q: int, d_m: int, d_e: int, initial_memory=None, name: str = "") -> ChannelSpec:
    """Memory channel with step ``(U_QE (x) I_M)(I_Q (x) U_M (x) I_E)``, which forgets its memory."""
    u_qe = np.asarray(u_qe, dtype=complex)
    u_m = np.asarray(u_m, dtype=complex)
    # reorder U_QE (on Q,E) onto the Q,M,E layout
    big = linalg.apply_on_factors(u_qe, np.eye(d_q * d_m * d_e, dtype=complex), [d_q, d_m, d_e], [0, 2])
    mem = np.kron(np.kron(np.eye(d_q), u_m), np.eye(d_e))
    mem0 = linalg.maximally_mixed(d_m) if initial_memory is None else initial_memory
    return ChannelSpec(d_q, d_m, d_e, (big @ mem,), linalg.ket(0, d_e), mem0, name=name)


def depolarizing_spec(d_q: int = 2) -> ChannelSpec:
    """Completely depolarizing step: swap the input with half of a maximally entangled environment."""
    env = np.eye(d_q, dtype=complex).ravel() / math.sqrt(d_q)
    s = linalg.swap(d_q, d_q)  # acts on Q (x) E1
    u = np.kron(s, np.eye(d_q))  # E = E1 (x) E2
    return ChannelSpec(d_q, 1, d_q * d_q, (u,), env, np.ones((1, 1)), name="depolarizing")


def build_markov_channel(m: MarkovChannelSpec, fixed_point_form: bool = True, name: str = "") -> ChannelSpec:
    """Step unitary ``U |phi>|j>|0> = sum_k sqrt(p_{k|j}) V_k|phi> |k> |env>``.

    With ``fixed_point_form`` off the environment records the previous label,
    ``|env> = |j>``; with it on the environment records both labels,
    ``|env> = |j, k>``, which makes the induced memory map input independent.
    """
    L, dq = m.labels, m.d_q
    de = L * L if fixed_point_form else L
    dim = dq * L * de
    linalg.check_dim(dim, "step unitary dimension")
    w = np.zeros((dim, dq * L), dtype=complex)
    positions = []
    for a in range(dq):
        for j in range(L):
            col = a * L + j
            positions.append(col * de)
            for k in range(L):
                amp = math.sqrt(m.transition[j, k])
                if amp == 0.0:
                    continue
                env = j * L + k if fixed_point_form else j
                out = m.kraus_unitaries[k][:, a]
                for b in range(dq):
                    w[(b * L + k) * de + env, col] += amp * out[b]
    u = complete_unitary(w, positions, dim)
    mem0 = np.diag(m.initial_distribution).astype(complex)
    return ChannelSpec(
        dq, L, de, (u,), linalg.ket(0, de), mem0,
        name=name or ("markov-fixed-point" if fixed_point_form else "markov"),
        markov=m, fixed_point_form=fixed_point_form,
    )


def markov_counterpart(spec: ChannelSpec) -> ChannelSpec:
    """The other representation of a Markov-built spec."""
    if spec.markov is None:
        raise ValueError("spec was not built from a Markov description")
    return build_markov_channel(spec.markov, not spec.fixed_point_form)


def build_shift_channel(d: int = 2, initial_memory=None) -> ChannelSpec:
    """Perfect-memory channel whose output at each use is the previous input."""
    if d < 2:
        raise ValueError("shift channel needs d >= 2")
    mem0 = linalg.projector(0, d) if initial_memory is None else initial_memory
    return ChannelSpec(d, d, 1, (linalg.swap(d, d),), np.ones(1), mem0, name="shift")


def _infer_uses(rho: DensityMatrix, d_q: int, n: int | None) -> int:
    if n is None:
        n = round(math.log(rho.dim, d_q)) if rho.dim > 1 else 0
    if d_q ** n != rho.dim:
        raise DimensionError(f"input of dimension {rho.dim} is not on {n} copies of a {d_q}-dimensional system")
    return n


def apply_memoryless(u_qe, rho_q, env_reset=None) -> DensityMatrix:
    """``Tr_E[U (rho (x) |0><0|) U^dagger]`` for a dilation on ``Q (x) E``."""
    rho = _as_state(rho_q)
    u = np.asarray(u_qe, dtype=complex)
    dq = rho.dim
    if u.shape[0] != u.shape[1] or u.shape[0] % dq:
        raise DimensionError(f"unitary of shape {u.shape} does not act on Q (x) E with d_q = {dq}")
    de = u.shape[0] // dq
    env = linalg.ket(0, de) if env_reset is None else np.asarray(env_reset, dtype=complex)
    joint = np.kron(rho.mat, np.outer(env, env.conj()))
    out = linalg.partial_trace(u @ joint @ u.conj().T, [dq, de], [0])
    return DensityMatrix(out, validate=False)


def apply_product_channel(u_qe, rho_qn, n: int, d_q: int | None = None, env_reset=None) -> DensityMatrix:
    """``n`` independent uses of a memoryless channel on a possibly entangled input.

    A fresh environment is adjoined for each use and traced out right after.
    """
    rho = _as_state(rho_qn)
    if d_q is None:
        if len(rho.dims) == n:
            d_q = rho.dims[0]
        else:
            d_q = round(rho.dim ** (1.0 / n)) if n else rho.dim
    _infer_uses(rho, d_q, n)
    u = np.asarray(u_qe, dtype=complex)
    if u.shape[0] % d_q:
        raise DimensionError(f"unitary of shape {u.shape} does not act on Q (x) E with d_q = {d_q}")
    de = u.shape[0] // d_q
    env = linalg.ket(0, de) if env_reset is None else np.asarray(env_reset, dtype=complex)
    env_proj = np.outer(env, env.conj())
    dims = [d_q] * n + [de]
    linalg.check_dim(math.prod(dims), "working dimension")
    state = rho.mat
    for i in range(n):
        joint = np.kron(state, env_proj)
        joint = linalg.conjugate_on_factors(u, joint, dims, [i, n])
        state = linalg.partial_trace(joint, dims, range(n))
    return DensityMatrix(state, [d_q] * n, validate=False)


def step_joint(spec: ChannelSpec, joint: np.ndarray, dims: Sequence[int], q_index: int, step: int = 0) -> np.ndarray:
    """One channel use on a joint state whose last factor is the memory.

    ``q_index`` selects which input factor is fed to the channel. The fresh
    environment is adjoined, the step unitary applied and the environment
    traced out again.
    """
    dims = list(dims)
    env = spec.env_reset
    big_dims = dims + [spec.d_e]
    linalg.check_dim(math.prod(big_dims), "working dimension")
    big = np.kron(joint, np.outer(env, env.conj()))
    big = linalg.conjugate_on_factors(spec.step_unitary(step), big, big_dims, [q_index, len(dims) - 1, len(dims)])
    return linalg.partial_trace(big, big_dims, range(len(dims)))


def _run(spec: ChannelSpec, rho_qn, memory, n: int | None) -> tuple[np.ndarray, list[int], int]:
    rho = _as_state(rho_qn)
    n = _infer_uses(rho, spec.d_q, n)
    spec.check_steps(n)
    mem = spec.initial_memory if memory is None else _as_state(memory)
    if mem.dim != spec.d_m:
        raise DimensionError(f"memory of dimension {mem.dim} given, channel memory has {spec.d_m}")
    dims = [spec.d_q] * n + [spec.d_m]
    joint = np.kron(rho.mat, mem.mat)
    for i in range(n):
        joint = step_joint(spec, joint, dims, i, i)
    return joint, dims, n


def apply_memory_channel(spec: ChannelSpec, rho_qn, memory=None, n: int | None = None) -> DensityMatrix:
    """Output on ``Q^n`` of ``n`` uses of a memory channel started in ``memory``.

    ``memory`` defaults to the spec's initial memory; ``n`` is inferred from the
    input dimension when omitted.
    """
    joint, dims, n = _run(spec, rho_qn, memory, n)
    if n == 0:
        return _as_state(rho_qn)
    out = linalg.partial_trace(joint, dims, range(n))
    return DensityMatrix(out, [spec.d_q] * n, validate=False)


def memory_state_after(spec: ChannelSpec, rho_qn, memory=None, n: int | None = None) -> DensityMatrix:
    """Memory state after ``n`` uses on input ``rho_qn``."""
    joint, dims, n = _run(spec, rho_qn, memory, n)
    out = linalg.partial_trace(joint, dims, [n])
    return DensityMatrix(out, validate=False)


def run_channel(spec: ChannelSpec, rho_qn, memory=None, n: int | None = None) -> tuple[DensityMatrix, DensityMatrix]:
    """Both the ``Q^n`` output and the final memory, from a single simulation."""
    joint, dims, n = _run(spec, rho_qn, memory, n)
    out = linalg.partial_trace(joint, dims, range(n)) if n else _as_state(rho_qn).mat
    mem = linalg.partial_trace(joint, dims, [n])
    return DensityMatrix(out, [spec.d_q] * n if n else None, validate=False), DensityMatrix(mem, validate=False)


def transfer_matrix(spec: ChannelSpec, memory=None, n: int = 1) -> np.ndarray:
    """Linear map on row-major vectorized ``Q^n`` operators for ``n`` uses.

    ``out.ravel() == T @ rho.ravel()``. Built from the step Kraus operators on
    ``Q (x) M`` applied to every matrix unit at once; this equals the
    environment-adjoining simulation because each environment is discarded
    right after its step.
    """
    spec.check_steps(n)
    mem = spec.initial_memory if memory is None else _as_state(memory)
    D = spec.d_q ** n
    linalg.check_dim(D * spec.d_m, "working dimension")
    dims = [spec.d_q] * n + [spec.d_m]
    units = np.eye(D * D, dtype=complex).reshape(D * D, D, D)
    joint = np.einsum("bij,kl->bikjl", units, mem.mat).reshape(D * D, D * spec.d_m, D * spec.d_m)
    for i in range(n):
        kraus = spec.step_kraus(i)
        acc = np.zeros_like(joint)
        for k in kraus:
            if not np.any(k):
                continue
            acc += linalg.conjugate_on_factors(k, joint, dims, [i, n])
        joint = acc
    out = linalg.partial_trace(joint, dims, range(n))
    return out.reshape(D * D, D * D).T.copy()


@dataclasses.dataclass(frozen=True, eq=False)
class MemoryMap:
    """Channel on the memory induced by one use with a fixed input state.

    Stored in Kraus form; call it on a memory state to apply it.
    """

    kraus: tuple
    input_state: DensityMatrix | None = None

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[1]

    def __call__(self, omega) -> np.ndarray:
        w = np.asarray(omega.mat if isinstance(omega, DensityMatrix) else omega, dtype=complex)
        return sum(k @ w @ k.conj().T for k in self.kraus)

    def superoperator(self) -> np.ndarray:
        """Matrix acting on row-major vectorized memory operators."""
        return sum(np.kron(k, k.conj()) for k in self.kraus)

    def fixed_point(self) -> np.ndarray:
        w, v = np.linalg.eig(self.superoperator())
        k = int(np.argmin(np.abs(w - 1.0)))
        x = v[:, k].reshape(self.dim, self.dim)
        x = 0.5 * (x + x.conj().T)
        return x / np.trace(x)

    def trace_defect(self) -> float:
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.dim))))

    @classmethod
    def identity(cls, d: int) -> "MemoryMap":
        return cls((np.eye(d, dtype=complex),))

    @classmethod
    def completely_depolarizing(cls, d: int) -> "MemoryMap":
        ks = []
        for i in range(d):
            for j in range(d):
                k = np.zeros((d, d), dtype=complex)
                k[i, j] = 1.0 / math.sqrt(d)
                ks.append(k)
        return cls(tuple(ks))


def induced_memory_map(spec: ChannelSpec, rho_q, step: int = 0) -> MemoryMap:
    """``omega -> Tr_QE[U (rho_q (x) omega (x) |env><env|) U^dagger]``."""
    rho = _as_state(rho_q)
    if rho.dim != spec.d_q:
        raise DimensionError(f"input of dimension {rho.dim} given, channel input has {spec.d_q}")
    dq, dm, de = spec.d_q, spec.d_m, spec.d_e
    u = spec.step_unitary(step).reshape(dq, dm, de, dq, dm, de)
    lam, vecs = np.linalg.eigh(rho.mat)
    ks = []
    for a in range(dq):
        if lam[a] <= 1e-15:
            continue
        x = np.einsum("pmeqnf,q,f->pemn", u, vecs[:, a], spec.env_reset)
        for b in range(dq):
            for e in range(de):
                ks.append(math.sqrt(lam[a]) * x[b, e])
    return MemoryMap(tuple(ks), rho)


@dataclasses.dataclass(frozen=True)
class FixedPointVerdict:
    fixed_point: bool
    max_deviation: float
    samples: int


def is_fixed_point_channel(spec: ChannelSpec, samples: int = 16, tol: float = 1e-9, seed: int = 0) -> FixedPointVerdict:
    """Sampled check that the induced memory map does not depend on the input.

    Each sample draws two input states and one memory state and measures the
    trace distance between the two memory maps' outputs. Passing is necessary
    for being a fixed-point channel, not a proof of it.
    """
    worst = 0.0
    for rng in child_rngs(seed, samples):
        r1 = pure_state(spec.d_q, rng) if rng.uniform() < 0.5 else random_density(spec.d_q, rng)
        r2 = pure_state(spec.d_q, rng)
        omega = random_density(spec.d_m, rng)
        a = induced_memory_map(spec, r1)(omega)
        b = induced_memory_map(spec, r2)(omega)
        worst = max(worst, linalg.trace_distance(a, b))
    return FixedPointVerdict(worst <= tol, worst, samples)
