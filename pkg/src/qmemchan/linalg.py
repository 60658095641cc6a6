"""Dense complex linear algebra for states on factorized Hilbert spaces.

Matrices are plain ``numpy`` arrays. A "shape" is the ordered list of factor
dimensions, e.g. ``[d_q, d_q, d_m, d_e]``; the first factor is the most
significant index of the Kronecker product.
"""

from __future__ import annotations

import contextlib
import dataclasses
import math
import os
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DensityMatrix",
    "DimensionError",
    "NotHermitianError",
    "NotPSDError",
    "ConvergenceError",
    "TOL",
    "tolerances",
    "max_dim",
    "check_dim",
    "tensor",
    "tensor_all",
    "partial_trace",
    "apply_on_factors",
    "conjugate_on_factors",
    "hermitian_eig",
    "jacobi_eig",
    "trace_distance",
    "distribution_distance",
    "ket",
    "projector",
    "maximally_mixed",
    "swap",
    "clamp_eigenvalues",
]


class DimensionError(ValueError):
    """Shapes disagree, or a requested dimension exceeds the configured cap."""


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclasses.dataclass
class Tolerances:
    hermiticity: float = 1e-9
    trace: float = 1e-9
    psd: float = 1e-9
    reconstruction: float = 1e-9


TOL = Tolerances()

DEFAULT_MAX_DIM = 1024
MAX_DIM_ENV = "QMEMCHAN_MAX_DIM"


@contextlib.contextmanager
def tolerances(**overrides: float):
    """Temporarily override entries of :data:`TOL`.

    >>> with tolerances(psd=1e-6):
    ...     pass
    """
    saved = dataclasses.replace(TOL)
    for key, value in overrides.items():
        if not hasattr(TOL, key):
            raise AttributeError(f"unknown tolerance {key!r}")
        setattr(TOL, key, float(value))
    try:
        yield TOL
    finally:
        for field in dataclasses.fields(Tolerances):
            setattr(TOL, field.name, getattr(saved, field.name))


def max_dim() -> int:
    """Dimension cap; read from ``$QMEMCHAN_MAX_DIM`` when set."""
    raw = os.environ.get(MAX_DIM_ENV)
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise DimensionError(f"{MAX_DIM_ENV}={raw!r} is not an integer") from exc
    if value < 1:
        raise DimensionError(f"{MAX_DIM_ENV} must be positive, got {value}")
    return value


def check_dim(dim: int, what: str = "dimension") -> int:
    cap = max_dim()
    if dim > cap:
        raise DimensionError(f"{what} {dim} exceeds the configured cap {cap}")
    return dim


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, DensityMatrix):
        return m.mat
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


class DensityMatrix:
    """A validated quantum state: Hermitian, unit trace, positive semidefinite.

    The underlying array is copied and marked read-only. ``dims`` records the
    tensor factorization; a single factor is assumed when omitted.
    """

    __slots__ = ("mat", "dims")

    def __init__(self, mat, dims: Sequence[int] | None = None, *, validate: bool = True):
        a = np.array(_as_matrix(mat), dtype=complex, copy=True)
        n, k = a.shape
        if n != k:
            raise DimensionError(f"density matrix must be square, got {a.shape}")
        dims = (n,) if dims is None else tuple(int(d) for d in dims)
        if any(d < 1 for d in dims) or math.prod(dims) != n:
            raise DimensionError(f"factor dims {dims} do not multiply to {n}")
        if validate:
            _validate_state(a)
        a.setflags(write=False)
        self.mat = a
        self.dims = dims

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.mat
        return self.mat.astype(dtype)

    def __repr__(self) -> str:
        return f"DensityMatrix(dims={self.dims})"

    def eigenvalues(self) -> np.ndarray:
        return hermitian_eig(self.mat)[0]

    def ptrace(self, keep: Iterable[int]) -> "DensityMatrix":
        keep = sorted(set(keep))
        out = partial_trace(self.mat, self.dims, keep)
        return DensityMatrix(out, [self.dims[i] for i in keep], validate=False)

    @classmethod
    def from_ket(cls, psi, dims: Sequence[int] | None = None) -> "DensityMatrix":
        v = np.asarray(psi, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), dims, validate=False)


def _validate_state(a: np.ndarray) -> None:
    herm = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if herm > TOL.hermiticity:
        raise NotHermitianError(f"matrix deviates from Hermitian by {herm:.3g}")
    tr = np.trace(a).real
    if abs(tr - 1.0) > TOL.trace:
        raise ValueError(f"trace is {tr:.12g}, expected 1")
    lam_min = np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0]
    if lam_min < -TOL.psd:
        raise NotPSDError(f"smallest eigenvalue {lam_min:.3g} is negative")


def tensor(a, b) -> np.ndarray:
    """Kronecker product with ``a``'s indices major."""
    a, b = _as_matrix(a), _as_matrix(b)
    check_dim(a.shape[0] * b.shape[0], "tensor product dimension")
    check_dim(a.shape[1] * b.shape[1], "tensor product dimension")
    return np.kron(a, b)


def tensor_all(mats: Iterable) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = tensor(out, m)
    return out


def _check_factors(dims: Sequence[int], indices: Iterable[int]) -> list[int]:
    idx = list(indices)
    for i in idx:
        if not 0 <= i < len(dims):
            raise DimensionError(f"factor index {i} out of range for shape {tuple(dims)}")
    if len(set(idx)) != len(idx):
        raise DimensionError(f"repeated factor index in {idx}")
    return idx


def partial_trace(m, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    Kept factors stay in their original order. Accepts a leading batch axis:
    ``m`` may have shape ``(..., D, D)``.
    """
    m = np.asarray(m.mat if isinstance(m, DensityMatrix) else m, dtype=complex)
    dims = [int(d) for d in dims]
    keep = sorted(_check_factors(dims, keep))
    D = math.prod(dims)
    if m.shape[-2:] != (D, D):
        raise DimensionError(f"matrix of shape {m.shape[-2:]} does not match dims {dims}")
    batch = m.shape[:-2]
    nf = len(dims)
    drop = [i for i in range(nf) if i not in keep]
    t = m.reshape(batch + tuple(dims) + tuple(dims))
    nb = len(batch)
    rows = [nb + i for i in keep] + [nb + i for i in drop]
    cols = [nb + nf + i for i in keep] + [nb + nf + i for i in drop]
    t = t.transpose(list(range(nb)) + rows + cols)
    K = math.prod(dims[i] for i in keep)
    T = math.prod(dims[i] for i in drop)
    t = t.reshape(batch + (K, T, K, T))
    return np.einsum("...itjt->...ij", t)


def apply_on_factors(op, m: np.ndarray, dims: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    """Left-multiply ``m`` (shape ``(..., D, D')``) by ``op`` acting on ``targets``.

    ``op`` is ordered by ``targets``; identity acts on the remaining factors.
    """
    op = np.asarray(op, dtype=complex)
    dims = [int(d) for d in dims]
    targets = _check_factors(dims, targets)
    tdims = [dims[i] for i in targets]
    dt = math.prod(tdims)
    if op.shape != (dt, dt):
        raise DimensionError(f"operator of shape {op.shape} does not act on factors {tdims}")
    batch = m.shape[:-2]
    nb = len(batch)
    k = len(targets)
    t = m.reshape(batch + tuple(dims) + (m.shape[-1],))
    opt = op.reshape(tuple(tdims) * 2)
    out = np.tensordot(opt, t, axes=(list(range(k, 2 * k)), [nb + i for i in targets]))
    # tensordot puts op rows first; the remaining axes keep their order
    out = np.moveaxis(out, list(range(k)), [nb + i for i in targets])
    return out.reshape(m.shape)


def conjugate_on_factors(op, m: np.ndarray, dims: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    """Return ``op m op^dagger`` with ``op`` acting on ``targets`` (batched)."""
    left = apply_on_factors(op, m, dims, targets)
    both = apply_on_factors(op, np.conj(np.swapaxes(left, -1, -2)), dims, targets)
    return np.conj(np.swapaxes(both, -1, -2))


def _check_hermitian(h: np.ndarray) -> None:
    if h.shape[0] != h.shape[1]:
        raise DimensionError(f"expected a square matrix, got {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    dev = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if dev > TOL.hermiticity * scale:
        raise NotHermitianError(f"matrix deviates from Hermitian by {dev:.3g}")


def jacobi_eig(h, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic complex Jacobi eigensolver for a Hermitian matrix.

    Each rotation first removes the phase of the pivot ``h[p, q]`` and then
    applies a real Givens rotation that zeroes it. Sweeps stop once the
    off-diagonal Frobenius mass drops below ``tol`` (relative to the matrix
    norm when that exceeds one).

    Returns:
        Eigenvalues in descending order and the matching eigenvectors as
        columns of a unitary matrix.

    Raises:
        NotHermitianError: if ``h`` is not Hermitian within tolerance.
        ConvergenceError: if ``max_sweeps`` sweeps do not reach ``tol``.
    """
    a = np.array(_as_matrix(h), dtype=complex)
    _check_hermitian(a)
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    target = tol * max(1.0, float(np.linalg.norm(a)))

    mask = ~np.eye(n, dtype=bool)

    def off(x):
        return float(np.linalg.norm(x[mask]))

    for _ in range(max_sweeps):
        if off(a) < target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r < 1e-300:
                    continue
                phase = apq / r
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2.0 * r)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # g = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=complex)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ g
    else:
        if off(a) >= target:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.real(np.diag(a))
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def hermitian_eig(h, method: str = "lapack") -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition ``h = V diag(w) V^dagger`` with ``w`` descending.

    ``method="jacobi"`` selects the pure cyclic-Jacobi path; the default uses
    LAPACK's Hermitian driver, which is much faster inside optimization loops.
    """
    if method == "jacobi":
        return jacobi_eig(h)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    a = _as_matrix(h)
    _check_hermitian(a)
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return w[::-1].copy(), v[:, ::-1].copy()


def clamp_eigenvalues(w: np.ndarray, floor: float | None = None) -> np.ndarray:
    """Zero out round-off negatives; reject anything more negative than ``-floor``."""
    floor = TOL.psd if floor is None else floor
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -floor:
        raise NotPSDError(f"eigenvalue {w.min():.3g} below -{floor:g}")
    return np.where(w < 0.0, 0.0, w)


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma``."""
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(min(1.0, 0.5 * np.sum(np.abs(w))))


def distribution_distance(p, q, tol: float = 1e-9) -> float:
    """Total-variation distance ``0.5 * sum |p_i - q_i|``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError(f"distributions must be equal-length vectors, got {p.shape} and {q.shape}")
    for name, x in (("p", p), ("q", q)):
        if np.any(x < -tol) or abs(x.sum() - 1.0) > tol:
            raise ValueError(f"{name} is not a probability distribution")
    return float(0.5 * np.sum(np.abs(p - q)))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(index: int, dim: int) -> np.ndarray:
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1.0
    return p


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def swap(d1: int, d2: int) -> np.ndarray:
    """Permutation taking ``|a>|b>`` to ``|b>|a>`` (from ``d1*d2`` to ``d2*d1``)."""
    s = np.zeros((d1 * d2, d1 * d2), dtype=complex)
    for a in range(d1):
        for b in range(d2):
            s[b * d1 + a, a * d2 + b] = 1.0
    return s
