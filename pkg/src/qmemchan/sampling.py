"""Seeded random states, unitaries and stochastic matrices.

Every sampler takes a ``numpy.random.Generator``. Reproducibility across
parallel runs comes from :func:`child_rngs`, which derives independent
sub-streams from a root seed by spawn key rather than by draw order.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_seeds(seed: int, count: int, *path: int) -> list[np.random.SeedSequence]:
    """``count`` independent seed sequences under ``seed`` and an optional key path."""
    root = np.random.SeedSequence(seed, spawn_key=tuple(path))
    return root.spawn(count)


def child_rngs(seed: int, count: int, *path: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in child_seeds(seed, count, *path)]


def haar_unitary(d: int, rng) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1), dtype=complex)
    return np.asarray(unitary_group.rvs(d, random_state=rng_from(rng)), dtype=complex)


def haar_ket(d: int, rng) -> np.ndarray:
    rng = rng_from(rng)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def pure_state(d: int, rng) -> np.ndarray:
    v = haar_ket(d, rng)
    return np.outer(v, v.conj())


def random_density(d: int, rng, rank: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt random state (Ginibre ``G G^dagger``) of the given rank."""
    rng = rng_from(rng)
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_probability(k: int, rng) -> np.ndarray:
    return rng_from(rng).dirichlet(np.ones(k))


def random_stochastic(k: int, rng) -> np.ndarray:
    """Row-stochastic ``k x k`` matrix with Dirichlet(1) rows."""
    rng = rng_from(rng)
    return np.vstack([rng.dirichlet(np.ones(k)) for _ in range(k)])


def memory_pairs(d: int, rng, random_pairs: int = 8) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairs of memory states for divergence probes.

    All ordered-free pairs of distinct basis states come first, since those are
    extremal for classical memories; then Haar-random pure pairs and their
    mixtures with the maximally mixed state.
    """
    rng = rng_from(rng)
    pairs = []
    for i in range(d):
        for j in range(i + 1, d):
            a = np.zeros((d, d), dtype=complex)
            b = np.zeros((d, d), dtype=complex)
            a[i, i] = b[j, j] = 1.0
            pairs.append((a, b))
    mixed = np.eye(d, dtype=complex) / d
    for k in range(random_pairs):
        a, b = pure_state(d, rng), pure_state(d, rng)
        if k % 2:
            t = rng.uniform()
            a = t * a + (1 - t) * mixed
            b = t * b + (1 - t) * mixed
        pairs.append((a, b))
    return pairs
