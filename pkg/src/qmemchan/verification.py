"""Sampled property checks run by ``qmemchan verify``."""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from . import linalg
from .channels import (
    apply_memory_channel,
    induced_memory_map,
    is_fixed_point_channel,
    markov_counterpart,
)
from .entropics import fannes_margin
from .indecomposability import check_memory_continuity
from .parallel import pmap
from .sampling import child_rngs, pure_state, random_density

TRACE_TOL = 1e-9
PSD_TOL = 1e-8
EQUIVALENCE_TOL = 1e-9
CONTINUITY_TOL = 1e-9
FANNES_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # "pass", "fail", "skip" or "info"
    value: float | None
    threshold: float | None
    samples: int
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "fail"


def _max_uses(spec, cap: int = 3) -> int:
    n = 1
    while n < cap and spec.d_q ** (n + 1) * spec.d_m <= linalg.max_dim():
        n += 1
    return n


def _random_input(d: int, rng) -> np.ndarray:
    return pure_state(d, rng) if rng.uniform() < 0.5 else random_density(d, rng)


def check_cptp(spec, seed: int, samples: int = 10) -> CheckResult:
    worst_trace, worst_eig, count = 0.0, 0.0, 0
    for n in range(1, _max_uses(spec) + 1):
        for rng in child_rngs(seed, samples, 0, n):
            out = apply_memory_channel(spec, _random_input(spec.d_q ** n, rng), n=n).mat
            worst_trace = max(worst_trace, abs(np.trace(out).real - 1.0))
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh(0.5 * (out + out.conj().T))[0]))
            count += 1
    ok = worst_trace <= TRACE_TOL and worst_eig >= -PSD_TOL
    return CheckResult("cptp", "pass" if ok else "fail", worst_trace, TRACE_TOL, count,
                       f"min eigenvalue {worst_eig:.3e}")


def check_memory_map(spec, seed: int, samples: int = 10) -> CheckResult:
    worst = 0.0
    for rng in child_rngs(seed, samples, 1):
        worst = max(worst, induced_memory_map(spec, _random_input(spec.d_q, rng)).trace_defect())
    return CheckResult("memory_map_trace", "pass" if worst <= TRACE_TOL else "fail", worst, TRACE_TOL, samples)


def check_representations(spec, seed: int, samples: int = 5) -> CheckResult:
    if spec.markov is None:
        return CheckResult("markov_forms", "skip", None, EQUIVALENCE_TOL, 0, "not built from a Markov chain")
    other = markov_counterpart(spec)
    worst, count = 0.0, 0
    for n in range(1, _max_uses(spec) + 1):
        if other.d_q ** n * other.d_m * other.d_e > linalg.max_dim():
            break
        for rng in child_rngs(seed, samples, 2, n):
            rho = _random_input(spec.d_q ** n, rng)
            a = apply_memory_channel(spec, rho, n=n)
            b = apply_memory_channel(other, rho, n=n)
            worst = max(worst, linalg.trace_distance(a, b))
            count += 1
    ok = worst <= EQUIVALENCE_TOL
    return CheckResult("markov_forms", "pass" if ok else "fail", worst, EQUIVALENCE_TOL, count)


def check_continuity(spec, seed: int, samples: int = 100) -> CheckResult:
    worst = check_memory_continuity(spec, trials=samples, seed=seed)
    return CheckResult("memory_continuity", "pass" if worst <= CONTINUITY_TOL else "fail", worst, CONTINUITY_TOL, samples)


def check_fannes(spec, seed: int, samples: int = 50) -> CheckResult:
    dims = sorted({spec.d_q ** k for k in range(1, 4)} | {2, 4, 8})
    worst, violations = -np.inf, 0
    for d in dims:
        for rng in child_rngs(seed, samples, 3, d):
            margin = fannes_margin(random_density(d, rng), random_density(d, rng))
            worst = max(worst, margin)
            violations += margin > FANNES_TOL
    status = "pass" if violations == 0 else "fail"
    return CheckResult("fannes", status, float(worst), FANNES_TOL, samples * len(dims),
                       f"{violations} violations over dimensions {dims}")


def check_fixed_point(spec, seed: int) -> CheckResult:
    v = is_fixed_point_channel(spec, seed=seed)
    return CheckResult("fixed_point", "info", v.max_deviation, None, v.samples,
                       "symbol-independent memory map" if v.fixed_point else "memory map depends on the input")


CHECKS: tuple[Callable, ...] = (
    check_cptp,
    check_memory_map,
    check_representations,
    check_continuity,
    check_fannes,
    check_fixed_point,
)


def run_property_suite(spec, seed: int = 0, jobs: int = 1) -> list[CheckResult]:
    """Every check in :data:`CHECKS`, each with its own seed stream."""
    return pmap(lambda c: c(spec, seed), CHECKS, jobs)
