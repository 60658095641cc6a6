"""Finite-block capacity estimates for memory channels.

The per-use Holevo quantity ``chi_n / n`` is maximized over classical-quantum
ensembles of pure signal states on the ``n``-use input space. The signals go
through the block channel for a given initial memory; minimizing and
maximizing over a set of memory states gives the lower and upper capacity
estimates at block length ``n``.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from typing import Sequence

import numpy as np

from . import linalg
from .channels import ChannelSpec, is_fixed_point_channel, transfer_matrix
from .entropics import LOG2E_OVER_E, entropy_of_spectrum
from .indecomposability import MixingProbeResult, estimate_mixing_time
from .linalg import DensityMatrix
from .parallel import pmap
from .sampling import child_rngs, haar_ket, haar_unitary

log = logging.getLogger(__name__)

MAX_ENSEMBLE = 16
OPTIMIZER_NOISE = 1e-6
_LOG_FLOOR = 1e-15


@dataclasses.dataclass
class CapacityOptions:
    restarts: int = 8
    ensemble_size: int | None = None  # default: min(d_q**n, 16)
    product_only: bool = False
    seed: int = 0
    basis_start: bool = True
    initial_step: float = 0.5
    shrink: float = 0.5
    step_floor: float = 1e-4
    prob_tol: float = 1e-8
    sweep_tol: float = 1e-9
    max_sweeps: int = 400
    jobs: int = 1


# -- pure-state parameterization ------------------------------------------------

def params_to_ket(params: np.ndarray, d: int) -> np.ndarray:
    """Hyperspherical angles (``d-1`` magnitudes, then ``d-1`` phases) to a unit vector."""
    theta, phase = params[: d - 1], params[d - 1:]
    amp = np.ones(d)
    s = 1.0
    for k in range(d - 1):
        amp[k] = s * math.cos(theta[k])
        s *= math.sin(theta[k])
    amp[d - 1] = s
    ph = np.concatenate(([0.0], phase))
    return amp * np.exp(1j * ph)


def ket_to_params(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    d = v.size
    v = v * np.exp(-1j * np.angle(v[0])) / np.linalg.norm(v)
    r = np.abs(v)
    tail = np.sqrt(np.cumsum((r ** 2)[::-1])[::-1])
    theta = np.array([math.atan2(tail[k + 1], r[k]) for k in range(d - 1)])
    return np.concatenate((theta, np.angle(v[1:])))


@dataclasses.dataclass
class EnsembleParameterization:
    """Pure-state ensemble on ``n`` uses of a ``d_q``-dimensional input.

    With ``product_only`` each row of ``state_params`` holds ``n`` blocks of
    single-use angles; otherwise one block for the whole ``d_q**n`` space.
    """

    d_q: int
    n: int
    state_params: np.ndarray  # shape (m, params per state)
    probs: np.ndarray
    product_only: bool = False

    @property
    def m(self) -> int:
        return self.state_params.shape[0]

    def ket(self, i: int) -> np.ndarray:
        x = self.state_params[i]
        if not self.product_only:
            return params_to_ket(x, self.d_q ** self.n)
        k = 2 * (self.d_q - 1)
        v = np.ones(1, dtype=complex)
        for u in range(self.n):
            v = np.kron(v, params_to_ket(x[u * k:(u + 1) * k], self.d_q))
        return v

    def kets(self) -> list[np.ndarray]:
        return [self.ket(i) for i in range(self.m)]


def basis_parameterization(d_q: int, n: int, m: int, product_only: bool = False) -> EnsembleParameterization:
    """Computational-basis signals ``|i>``, ``i = 0..m-1`` (cycled), uniform weights."""
    D = d_q ** n
    rows = []
    for i in range(m):
        idx = i % D
        if product_only:
            digits = np.unravel_index(idx, [d_q] * n)
            rows.append(np.concatenate([ket_to_params(linalg.ket(int(a), d_q)) for a in digits]))
        else:
            rows.append(ket_to_params(linalg.ket(idx, D)))
    return EnsembleParameterization(d_q, n, np.array(rows), np.full(m, 1.0 / m), product_only)


def product_basis_parameterization(d_q: int, n: int, m: int, rng, product_only: bool = False) -> EnsembleParameterization:
    """Columns of a random product unitary ``U_1 (x) ... (x) U_n``: an orthonormal product basis."""
    us = [haar_unitary(d_q, rng) for _ in range(n)]
    D = d_q ** n
    rows = []
    for i in range(m):
        digits = np.unravel_index(i % D, [d_q] * n)
        factors = [us[u][:, int(a)] for u, a in enumerate(digits)]
        if product_only:
            rows.append(np.concatenate([ket_to_params(f) for f in factors]))
        else:
            v = np.ones(1, dtype=complex)
            for f in factors:
                v = np.kron(v, f)
            rows.append(ket_to_params(v))
    return EnsembleParameterization(d_q, n, np.array(rows), np.full(m, 1.0 / m), product_only)


def random_parameterization(d_q: int, n: int, m: int, rng, product_only: bool = False) -> EnsembleParameterization:
    rows = []
    for _ in range(m):
        if product_only:
            rows.append(np.concatenate([ket_to_params(haar_ket(d_q, rng)) for _ in range(n)]))
        else:
            rows.append(ket_to_params(haar_ket(d_q ** n, rng)))
    return EnsembleParameterization(d_q, n, np.array(rows), np.full(m, 1.0 / m), product_only)


# -- Holevo quantity of an ensemble through a fixed linear map ------------------

def _spectrum(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T))


def _entropy(m: np.ndarray) -> float:
    return entropy_of_spectrum(_spectrum(m))


class _BlockChannel:
    """The ``n``-use channel for one initial memory, as a transfer matrix."""

    def __init__(self, transfer: np.ndarray):
        self.T = transfer
        self.D = int(round(math.sqrt(transfer.shape[0])))

    def output(self, psi: np.ndarray) -> np.ndarray:
        out = self.T @ np.outer(psi, psi.conj()).ravel()
        return out.reshape(self.D, self.D)


def chi_of_outputs(probs: np.ndarray, outputs: np.ndarray, entropies: np.ndarray) -> float:
    avg = np.einsum("i,ijk->jk", probs, outputs)
    return max(0.0, _entropy(avg) - float(np.dot(probs, entropies)))


def project_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, x.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(x - css[rho] / (rho + 1.0), 0.0)


def optimize_probs(outputs: np.ndarray, entropies: np.ndarray, p0: np.ndarray, tol: float = 1e-8,
                   max_iter: int = 500) -> tuple[np.ndarray, float, list[float]]:
    """Projected-gradient ascent of ``chi(p)`` for fixed signal outputs.

    The gradient entry for signal ``i`` is the relative entropy
    ``D(sigma_i || sigma_avg)`` up to a constant, which simplex projection
    ignores. Steps that would lower ``chi`` are halved until they do not, so the
    returned history is non-decreasing.
    """
    p = p0.copy()
    chi = chi_of_outputs(p, outputs, entropies)
    history = [chi]
    step = 1.0
    for _ in range(max_iter):
        avg = np.einsum("i,ijk->jk", p, outputs)
        w, v = np.linalg.eigh(0.5 * (avg + avg.conj().T))
        log_avg = (v * np.log2(np.maximum(w, _LOG_FLOOR))) @ v.conj().T
        grad = -np.real(np.einsum("ijk,kj->i", outputs, log_avg)) - entropies
        improved = False
        while step > 1e-12:
            q = project_simplex(p + step * grad)
            new = chi_of_outputs(q, outputs, entropies)
            if new >= chi:
                gain = new - chi
                p, chi = q, new
                improved = True
                step *= 2.0
                break
            step *= 0.5
        history.append(chi)
        if not improved or gain < tol:
            break
    return p, chi, history


@dataclasses.dataclass
class OptimizationResult:
    chi_per_use: float
    best: EnsembleParameterization
    converged: bool
    restart_values: list


def _tangent_directions(psi: np.ndarray) -> np.ndarray:
    """Unit tangent directions at ``psi``: the basis vectors and their ``i`` multiples, orthogonalized."""
    D = psi.size
    eye = np.eye(D, dtype=complex)
    dirs = np.concatenate([eye, 1j * eye])
    dirs = dirs - np.outer(dirs @ psi.conj(), psi)
    norms = np.linalg.norm(dirs, axis=1)
    keep = norms > 1e-9
    return dirs[keep] / norms[keep, None]


class _SearchState:
    """Signal kets, their outputs and entropies, kept in sync during the search."""

    def __init__(self, channel: _BlockChannel, ens: EnsembleParameterization):
        self.channel = channel
        self.d_q, self.n = ens.d_q, ens.n
        self.product = ens.product_only
        if self.product:
            k = 2 * (ens.d_q - 1)
            self.factors = [
                [params_to_ket(ens.state_params[i, u * k:(u + 1) * k], ens.d_q) for u in range(ens.n)]
                for i in range(ens.m)
            ]
            self.kets = np.array([self._join(f) for f in self.factors])
        else:
            self.kets = np.array(ens.kets())
        self.probs = ens.probs.copy()
        self.outputs = self._outputs(self.kets)
        self.entropies = np.array([_entropy(o) for o in self.outputs])

    @staticmethod
    def _join(factors) -> np.ndarray:
        v = np.ones(1, dtype=complex)
        for f in factors:
            v = np.kron(v, f)
        return v

    def _outputs(self, kets: np.ndarray) -> np.ndarray:
        rho = np.einsum("ci,cj->cij", kets, kets.conj()).reshape(len(kets), -1)
        D = self.channel.D
        return (rho @ self.channel.T.T).reshape(len(kets), D, D)

    def candidates(self, i: int, step: float):
        """All kets one rotation of ``+-step`` away from signal ``i``.

        Returns the candidate kets and, for product ensembles, the factor lists.
        """
        c, s = math.cos(step), math.sin(step)
        if not self.product:
            psi = self.kets[i]
            dirs = _tangent_directions(psi)
            kets = np.concatenate([c * psi + s * dirs, c * psi - s * dirs])
            return kets, None
        kets, factors = [], []
        for u, phi in enumerate(self.factors[i]):
            dirs = _tangent_directions(phi)
            for sign in (1.0, -1.0):
                for d in dirs:
                    f = list(self.factors[i])
                    f[u] = c * phi + sign * s * d
                    factors.append(f)
                    kets.append(self._join(f))
        return np.array(kets), factors

    def gradient_candidates(self, i: int, step: float, others: np.ndarray):
        """Kets along the geodesic in the ascent direction of signal ``i``.

        The angles run over ``step * 2**k`` for ``k = -6..3``. Returns ``None``
        when the gradient vanishes.
        """
        avg = others + self.probs[i] * self.outputs[i]
        D = self.channel.D
        y = _log2m(self.outputs[i]) - _log2m(avg)
        g = (self.channel.T.conj().T @ y.ravel()).reshape(D, D)
        psi = self.kets[i]
        gpsi = g @ psi
        tangent = gpsi - np.vdot(psi, gpsi) * psi
        norm = np.linalg.norm(tangent)
        if norm < 1e-12:
            return None
        tangent /= norm
        angles = np.minimum(step * 2.0 ** np.arange(-6, 4), math.pi / 2)
        return np.cos(angles)[:, None] * psi + np.sin(angles)[:, None] * tangent

    def chi(self) -> float:
        return chi_of_outputs(self.probs, self.outputs, self.entropies)

    def parameterization(self) -> EnsembleParameterization:
        if self.product:
            rows = [np.concatenate([ket_to_params(f) for f in fs]) for fs in self.factors]
        else:
            rows = [ket_to_params(k) for k in self.kets]
        return EnsembleParameterization(self.d_q, self.n, np.array(rows), self.probs.copy(), self.product)


def _coordinate_search(channel: _BlockChannel, ens: EnsembleParameterization, opts: CapacityOptions) -> tuple[float, bool, EnsembleParameterization]:
    """Alternate probability ascent with shrinking-step moves of each signal state.

    A move rotates one signal by a fixed angle toward one coordinate
    direction (a basis vector, or ``i`` times one, orthogonalized against the
    current state); the best improving move per signal is taken. When a full
    sweep gains less than ``sweep_tol`` the angle is multiplied by ``shrink``,
    down to ``step_floor``.
    """
    st = _SearchState(channel, ens)
    st.probs, chi, _ = optimize_probs(st.outputs, st.entropies, st.probs, opts.prob_tol)
    step = opts.initial_step
    converged = False
    for _ in range(opts.max_sweeps):
        if step < opts.step_floor:
            converged = True
            break
        chi_before = chi
        for i in range(len(st.kets)):
            p_i = st.probs[i]
            if p_i <= 0.0:
                continue
            rest_p = st.probs.copy()
            rest_p[i] = 0.0
            others = np.einsum("i,ijk->jk", rest_p, st.outputs)
            rest_entropy = float(np.dot(rest_p, st.entropies))
            if not st.product:
                kets = st.gradient_candidates(i, step, others)
                if kets is not None:
                    outs = st._outputs(kets)
                    s_out, s_avg = _entropies(outs), _entropies(others + p_i * outs)
                    vals = s_avg - rest_entropy - p_i * s_out
                    best = int(np.argmax(vals))
                    if vals[best] > chi + 1e-13:
                        chi = float(vals[best])
                        st.kets[i], st.outputs[i], st.entropies[i] = kets[best], outs[best], s_out[best]
                        continue
            kets, factors = st.candidates(i, step)
            outs = st._outputs(kets)
            s_out, s_avg = _entropies(outs), _entropies(others + p_i * outs)
            vals = s_avg - rest_entropy - p_i * s_out
            best = int(np.argmax(vals))
            if vals[best] > chi + 1e-13:
                chi = float(vals[best])
                st.kets[i], st.outputs[i], st.entropies[i] = kets[best], outs[best], s_out[best]
                if factors is not None:
                    st.factors[i] = factors[best]
        st.probs, chi, _ = optimize_probs(st.outputs, st.entropies, st.probs, opts.prob_tol)
        if chi - chi_before < opts.sweep_tol:
            step *= opts.shrink
    else:
        converged = step < opts.step_floor
    return chi, converged, st.parameterization()


def _batched_spectrum(mats: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(0.5 * (mats + np.conj(np.swapaxes(mats, -1, -2))))


def _entropies(mats: np.ndarray) -> np.ndarray:
    return np.array([entropy_of_spectrum(w) for w in _batched_spectrum(mats)])


def _log2m(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.log2(np.clip(w, _LOG_FLOOR, None))) @ v.conj().T


def _start(spec: ChannelSpec, n: int, m: int, opts: CapacityOptions, r: int) -> EnsembleParameterization:
    if r == 0 and opts.basis_start:
        return basis_parameterization(spec.d_q, n, m, opts.product_only)
    rng = child_rngs(opts.seed, 1, n, r)[0]
    if r % 2:
        return product_basis_parameterization(spec.d_q, n, m, rng, opts.product_only)
    return random_parameterization(spec.d_q, n, m, rng, opts.product_only)


def default_ensemble_size(d_q: int, n: int) -> int:
    return min(d_q ** n, MAX_ENSEMBLE)


def optimize_chi_n(spec: ChannelSpec, memory=None, n: int = 1, opts: CapacityOptions | None = None) -> OptimizationResult:
    """Best found ``chi_n / n`` for ``n`` uses starting from ``memory``.

    Restart ``r`` is seeded from ``(seed, n, r)`` alone, so adding restarts
    can only raise the reported value. With ``basis_start`` the first restart
    begins from the computational basis instead of a random ensemble.
    """
    opts = opts or CapacityOptions()
    if n < 1:
        raise ValueError("block length must be at least 1")
    linalg.check_dim(spec.d_q ** n * spec.d_m, "working dimension")
    channel = _BlockChannel(transfer_matrix(spec, memory, n))
    m = opts.ensemble_size or default_ensemble_size(spec.d_q, n)

    def run(r):
        return _coordinate_search(channel, _start(spec, n, m, opts, r), opts)

    results = pmap(run, range(opts.restarts), opts.jobs)
    values = [c / n for c, _, _ in results]
    best = int(np.argmax(values))
    chi, converged, ens = results[best]
    return OptimizationResult(chi / n, ens, converged, values)


def ensemble_chi(spec: ChannelSpec, kets: Sequence[np.ndarray], probs, memory=None, n: int = 1) -> float:
    """``chi_n / n`` of a fixed pure-state ensemble sent through ``n`` uses."""
    channel = _BlockChannel(transfer_matrix(spec, memory, n))
    outputs = np.array([channel.output(np.asarray(k, dtype=complex)) for k in kets])
    entropies = np.array([_entropy(o) for o in outputs])
    return chi_of_outputs(np.asarray(probs, dtype=float), outputs, entropies) / n


# -- lower / upper capacities -----------------------------------------------------

@dataclasses.dataclass
class CapacityReport:
    n: int
    memory_ids: list
    chi_per_use: list
    lower_c_n: float
    upper_c_n: float
    gap: float
    gap_bound: float | None
    restarts: int
    seed: int
    converged: list
    wall_time: float = 0.0

    def rows(self) -> list[dict]:
        return [
            {
                "n": self.n,
                "memory_id": mid,
                "chi_per_use": chi,
                "lower": self.lower_c_n,
                "upper": self.upper_c_n,
                "gap": self.gap,
                "gap_bound": self.gap_bound,
            }
            for mid, chi in zip(self.memory_ids, self.chi_per_use)
        ]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("wall_time")  # keeps artifacts reproducible
        return d


def memory_candidates(d_m: int, extra: Sequence = ()) -> list[tuple[str, np.ndarray]]:
    """Memory basis states, the maximally mixed memory, then any user states.

    A one-dimensional memory has a single state, listed once as ``basis0``.
    """
    cands = [(f"basis{j}", linalg.projector(j, d_m)) for j in range(d_m)]
    if d_m > 1:
        cands.append(("mixed", linalg.maximally_mixed(d_m)))
    for i, s in enumerate(extra):
        cands.append((f"user{i}", np.asarray(s.mat if isinstance(s, DensityMatrix) else s, dtype=complex)))
    return cands


def lower_upper_capacity(spec: ChannelSpec, n: int, candidates: Sequence | None = None,
                         opts: CapacityOptions | None = None) -> CapacityReport:
    """Min and max of the optimized ``chi_n / n`` over candidate initial memories.

    ``candidates`` is a list of ``(id, state)`` pairs or bare states; it
    defaults to :func:`memory_candidates`. Every candidate uses the same seed,
    so each sees the same restart ensembles.
    """
    opts = opts or CapacityOptions()
    if candidates is None:
        candidates = memory_candidates(spec.d_m)
    candidates = [c if isinstance(c, tuple) else (f"user{i}", c) for i, c in enumerate(candidates)]
    if not candidates:
        raise ValueError("at least one memory candidate is required")
    t0 = time.perf_counter()
    inner = dataclasses.replace(opts, jobs=1)
    results = pmap(lambda c: optimize_chi_n(spec, c[1], n, inner), candidates, opts.jobs)
    values = [r.chi_per_use for r in results]
    lo, hi = min(values), max(values)
    elapsed = time.perf_counter() - t0
    log.info("n=%d: lower %.6f upper %.6f (%.1fs)", n, lo, hi, elapsed)
    return CapacityReport(
        n=n,
        memory_ids=[c[0] for c in candidates],
        chi_per_use=values,
        lower_c_n=lo,
        upper_c_n=hi,
        gap=hi - lo,
        gap_bound=None,
        restarts=opts.restarts,
        seed=opts.seed,
        converged=[r.converged for r in results],
        wall_time=elapsed,
    )


def convergence_gap_bound(epsilon: float, n_epsilon: int, d: int, n: int) -> float:
    """``eps log2 d + log2(e)/(n e) + (N log2 d / n)(1 - eps)``.

    Bounds the per-use entropy difference of outputs started from two memories
    once the memories are ``epsilon``-close after ``N = n_epsilon`` uses.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if n <= n_epsilon:
        raise ValueError(f"block length {n} must exceed N(epsilon) = {n_epsilon}")
    ld = math.log2(d)
    return epsilon * ld + LOG2E_OVER_E / n + (n_epsilon * ld / n) * (1.0 - epsilon)


@dataclasses.dataclass
class ConvergenceExperiment:
    reports: list
    mixing: MixingProbeResult

    def gaps(self) -> list[float]:
        return [r.gap for r in self.reports]


def capacity_convergence_experiment(spec: ChannelSpec, n_max: int, epsilon: float,
                                    opts: CapacityOptions | None = None, require_fixed_point: bool = True,
                                    extra_memories: Sequence = ()) -> ConvergenceExperiment:
    """Mixing probe followed by lower/upper capacities for ``n = 1..n_max``.

    Where ``n`` exceeds the measured ``N(epsilon)`` the report carries the
    gap bound for comparison with the observed gap.
    """
    opts = opts or CapacityOptions()
    if require_fixed_point:
        verdict = is_fixed_point_channel(spec, seed=opts.seed)
        if not verdict.fixed_point:
            raise ValueError(
                f"channel fails the fixed-point check (deviation {verdict.max_deviation:.3g}); "
                "pass require_fixed_point=False to run anyway"
            )
    mixing = estimate_mixing_time(spec, epsilon, seed=opts.seed, jobs=opts.jobs)
    cands = memory_candidates(spec.d_m, extra_memories)
    reports = []
    for n in range(1, n_max + 1):
        rep = lower_upper_capacity(spec, n, cands, opts)
        if mixing.n_epsilon is not None and n > mixing.n_epsilon:
            rep.gap_bound = convergence_gap_bound(epsilon, mixing.n_epsilon, spec.d_q, n)
        reports.append(rep)
    return ConvergenceExperiment(reports, mixing)
