"""Product-formula schedules, unitaries, and commutator error bounds.

A schedule is the full, unmerged factor list for r repetitions of one
product-formula step, in application order (factor 0 hits the state first).
First order steps through the terms ascending; the second-order step is the
palindrome descending-then-ascending with half weights; higher even orders
follow the usual five-block recursion

    S_{2k}(w) = S_{2k-2}(s_k w)^2  S_{2k-2}((1-4 s_k) w)  S_{2k-2}(s_k w)^2

with s_k = 1 / (4 - 4^(1/(k+1))).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomp import Decomposition
from .errors import CapExceeded, SpecError
from .linalg import exp_unitary, spectral_norm

SCHEDULE_ORDER_CAP = 3
ALPHA_ORDER_CAP = 2
ALPHA_TERMS_CAP = 4


@dataclass(frozen=True)
class ScheduleFactor:
    term: int
    weight: float


@dataclass(frozen=True)
class TrotterSchedule:
    L: int
    k: int
    r: int
    t: float
    factors: tuple[ScheduleFactor, ...]

    @property
    def M(self) -> int:
        return len(self.factors)


def suzuki_split(k: int) -> float:
    """Recursive splitting weight s_k for the order-2k formula."""
    return 1.0 / (4.0 - 4.0 ** (1.0 / (k + 1)))


def _one_step(L: int, k: int) -> list[tuple[int, float]]:
    if k == 0:
        return [(term, 1.0) for term in range(L)]
    if k == 1:
        half = [(term, 0.5) for term in range(L)]
        return half[::-1] + half
    s = suzuki_split(k)
    inner = _one_step(L, k - 1)

    def scaled(w: float) -> list[tuple[int, float]]:
        return [(term, weight * w) for term, weight in inner]

    return scaled(s) + scaled(s) + scaled(1.0 - 4.0 * s) + scaled(s) + scaled(s)


def schedule(L: int, k: int, r: int, t: float) -> TrotterSchedule:
    """Full factor list for r steps of the order indexed by k."""
    if L < 1:
        raise SpecError("need at least one term")
    if r < 1:
        raise SpecError("step count r must be positive")
    if k < 0:
        raise SpecError("order index k must be non-negative")
    if k > SCHEDULE_ORDER_CAP:
        raise CapExceeded(f"order index {k} above cap {SCHEDULE_ORDER_CAP}")
    step = _one_step(L, k)
    factors = tuple(ScheduleFactor(term, weight) for term, weight in step * r)
    return TrotterSchedule(L=L, k=k, r=r, t=float(t), factors=factors)


def trotter_unitary(decomp: Decomposition, sched: TrotterSchedule) -> np.ndarray:
    """Apply every factor exponential in schedule order."""
    if sched.L != decomp.term_count:
        raise SpecError("schedule term count does not match decomposition")
    dt = sched.t / sched.r
    cache: dict[tuple[int, float], np.ndarray] = {}
    u = np.eye(decomp.dim, dtype=complex)
    for factor in sched.factors:
        key = (factor.term, factor.weight)
        if key not in cache:
            cache[key] = exp_unitary(decomp.terms[factor.term], factor.weight * dt)
        u = cache[key] @ u
    return u


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def alpha_comm(decomp: Decomposition, k: int) -> float:
    """Sum of nested-commutator norms over all (2k+1)-tuples of terms."""
    if k < 1:
        raise SpecError("alpha_comm applies to k >= 1; k = 0 uses the pair bound")
    if k > ALPHA_ORDER_CAP:
        raise CapExceeded(f"alpha_comm order index {k} above cap {ALPHA_ORDER_CAP}")
    if decomp.term_count > ALPHA_TERMS_CAP:
        raise CapExceeded(
            f"alpha_comm term count {decomp.term_count} above cap {ALPHA_TERMS_CAP}"
        )
    L = decomp.term_count
    depth = 2 * k + 1
    total = 0.0
    for flat in range(L**depth):
        idx = []
        rem = flat
        for _ in range(depth):
            idx.append(rem % L)
            rem //= L
        nested = decomp.terms[idx[-1]]
        for i in range(depth - 2, -1, -1):
            nested = commutator(decomp.terms[idx[i]], nested)
        total += spectral_norm(nested)
    return total


def error_bound(decomp: Decomposition, k: int, t: float, r: int) -> float:
    """A-priori product-formula error bound for the order indexed by k."""
    if r < 1:
        raise SpecError("step count r must be positive")
    t = abs(float(t))
    if k == 0:
        acc = 0.0
        for b in range(decomp.term_count):
            for a in range(b):
                acc += spectral_norm(commutator(decomp.terms[b], decomp.terms[a]))
        return t**2 / (2 * r) * acc
    return alpha_comm(decomp, k) * t ** (2 * k + 1) / r ** (2 * k)


def measured_error(decomp: Decomposition, sched: TrotterSchedule) -> float:
    """Spectral-norm distance between the product formula and the exact flow."""
    exact = exp_unitary(decomp.total(), sched.t)
    return spectral_norm(exact - trotter_unitary(decomp, sched))
