"""Entropies, mutual information and the Holevo quantity, in bits."""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from . import linalg
from .linalg import DensityMatrix, DimensionError

LOG2E_OVER_E = math.log2(math.e) / math.e
ENTROPY_CLAMP = 1e-12
ENTROPY_PSD_FLOOR = 1e-8
MI_ROUNDOFF = 1e-9


def _mat(rho) -> np.ndarray:
    return rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def entropy_of_spectrum(w) -> float:
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -ENTROPY_PSD_FLOOR:
        raise linalg.NotPSDError(f"eigenvalue {w.min():.3g} is too negative for an entropy")
    w = w[w > ENTROPY_CLAMP]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def von_neumann_entropy(rho, method: str = "lapack") -> float:
    """``-Tr rho log2 rho`` with eigenvalues at or below 1e-12 treated as zero."""
    m = _mat(rho)
    if method == "lapack":
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    else:
        w = linalg.hermitian_eig(m, method)[0]
    return entropy_of_spectrum(w)


def shannon_entropy(p) -> float:
    return entropy_of_spectrum(p)


def binary_entropy(x: float) -> float:
    return shannon_entropy([x, 1.0 - x])


def mutual_information(rho_rq, dims: Sequence[int] | None = None, cut: Sequence[int] = (0,)) -> float:
    """``S(R) + S(Q) - S(RQ)`` where ``cut`` lists the factors on the R side.

    ``dims`` defaults to the state's own factorization. Round-off negatives
    down to -1e-9 are reported as zero.
    """
    if dims is None:
        if not isinstance(rho_rq, DensityMatrix):
            raise DimensionError("dims are required for a bare matrix")
        dims = rho_rq.dims
    m = _mat(rho_rq)
    dims = list(dims)
    r_side = sorted(set(cut))
    q_side = [i for i in range(len(dims)) if i not in r_side]
    if not r_side or not q_side or any(not 0 <= i < len(dims) for i in r_side):
        raise DimensionError(f"cut {tuple(cut)} does not split factors {tuple(dims)} into two nonempty sides")
    s_r = von_neumann_entropy(linalg.partial_trace(m, dims, r_side))
    s_q = von_neumann_entropy(linalg.partial_trace(m, dims, q_side))
    s_rq = von_neumann_entropy(m)
    mi = s_r + s_q - s_rq
    if mi < -MI_ROUNDOFF:
        raise ArithmeticError(f"mutual information {mi:.3g} is negative beyond round-off")
    return max(mi, 0.0)


@dataclasses.dataclass(frozen=True, eq=False)
class CQEnsemble:
    """Signal states ``states[i]`` sent with probability ``probs[i]``."""

    probs: np.ndarray
    states: tuple

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size == 0 or np.any(p < -1e-10) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("ensemble probabilities must form a distribution")
        states = tuple(_mat(s) for s in self.states)
        if len(states) != p.size:
            raise ValueError(f"{p.size} probabilities for {len(states)} states")
        d = states[0].shape
        if any(s.shape != d for s in states):
            raise DimensionError("ensemble states must share one dimension")
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    def average(self) -> np.ndarray:
        return np.einsum("i,ijk->jk", self.probs, np.asarray(self.states))


def holevo_chi(e: CQEnsemble) -> float:
    """``S(sum_i p_i rho_i) - sum_i p_i S(rho_i)``."""
    avg = von_neumann_entropy(e.average())
    inner = sum(p * von_neumann_entropy(s) for p, s in zip(e.probs, e.states) if p > 0)
    return max(0.0, avg - inner)


def cq_embed(e: CQEnsemble) -> DensityMatrix:
    """``sum_i p_i |i><i| (x) rho_i`` on ``R (x) Q`` with ``dim R`` = ensemble size."""
    m = len(e.states)
    d = e.dim
    out = np.zeros((m * d, m * d), dtype=complex)
    for i, (p, s) in enumerate(zip(e.probs, e.states)):
        out[i * d:(i + 1) * d, i * d:(i + 1) * d] = p * s
    return DensityMatrix(out, [m, d], validate=False)


@dataclasses.dataclass(frozen=True, eq=False)
class SeparableDecomposition:
    """``sum_j p_j rho_R^j (x) rho_Q^j``."""

    probs: np.ndarray
    r_states: tuple
    q_states: tuple

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if np.any(p < -1e-10) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("decomposition weights must form a distribution")
        if not (len(p) == len(self.r_states) == len(self.q_states)):
            raise ValueError("weights, R states and Q states must have matching lengths")
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))
        object.__setattr__(self, "r_states", tuple(_mat(s) for s in self.r_states))
        object.__setattr__(self, "q_states", tuple(_mat(s) for s in self.q_states))

    def state(self) -> DensityMatrix:
        dr, dq = self.r_states[0].shape[0], self.q_states[0].shape[0]
        out = sum(p * np.kron(r, q) for p, r, q in zip(self.probs, self.r_states, self.q_states))
        return DensityMatrix(out, [dr, dq], validate=False)


def extend_separable(d: SeparableDecomposition, rank_tol: float = 1e-12) -> DensityMatrix:
    """Purify each ``rho_R^j`` into its own block of an ancilla ``Rbar``.

    The result lives on ``R (x) Rbar (x) Q`` (factor dims ``[d_R, sum_j rank_j,
    d_Q]``). The purifications have orthogonal supports on ``Rbar``, so the
    state is classical-quantum across ``R Rbar : Q`` and tracing ``Rbar``
    returns the separable state.
    """
    dr = d.r_states[0].shape[0]
    dq = d.q_states[0].shape[0]
    spectra = []
    for r in d.r_states:
        w, v = np.linalg.eigh(0.5 * (r + r.conj().T))
        keep = w > rank_tol
        spectra.append((w[keep], v[:, keep]))
    dbar = sum(len(w) for w, _ in spectra)
    total = dr * dbar
    linalg.check_dim(total * dq, "extended state dimension")
    out = np.zeros((total * dq, total * dq), dtype=complex)
    offset = 0
    for p, (w, v), q in zip(d.probs, spectra, d.q_states):
        psi = np.zeros((dr, dbar), dtype=complex)
        for l in range(len(w)):
            psi[:, offset + l] = math.sqrt(w[l]) * v[:, l]
        offset += len(w)
        flat = psi.ravel()
        out += p * np.kron(np.outer(flat, flat.conj()), q)
    return DensityMatrix(out, [dr, dbar, dq], validate=False)


def fannes_bound(dist: float, d: int) -> float:
    """``dist * log2(d) + log2(e)/e``."""
    if not 0.0 <= dist <= 1.0 + 1e-12:
        raise ValueError(f"trace distance {dist} outside [0, 1]")
    if d < 2:
        raise ValueError("dimension must be at least 2")
    return dist * math.log2(d) + LOG2E_OVER_E


def fannes_margin(omega, sigma) -> float:
    """``|S(omega) - S(sigma)| - fannes_bound``; positive values are violations."""
    a, b = _mat(omega), _mat(sigma)
    diff = abs(von_neumann_entropy(a) - von_neumann_entropy(b))
    return diff - fannes_bound(linalg.trace_distance(a, b), a.shape[0])
