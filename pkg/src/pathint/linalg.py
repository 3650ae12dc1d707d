"""Dense linear-algebra substrate used by every other module.

Everything downstream leans on two guarantees made here:

* eigendecompositions come back in a deterministic gauge, so repeated runs
  (and independently constructed oracles) agree bit-for-bit on eigenvectors;
* matrix exponentials and time-ordered propagators are accurate enough to
  serve as reference values for the coarser algorithms under test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvariantViolation

# Relative gap below which eigenvalues are treated as one degenerate cluster.
DEGENERACY_RTOL = 1e-9


def check_hermitian(h: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Validate Hermiticity and return the symmetrized matrix."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvariantViolation(f"expected a square matrix, got shape {h.shape}")
    defect = np.max(np.abs(h - h.conj().T))
    scale = max(1.0, float(np.max(np.abs(h))))
    if defect > tol * scale:
        raise InvariantViolation(f"matrix is not Hermitian (defect {defect:.3e})")
    return (h + h.conj().T) / 2


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues sorted ascending with gauge-fixed eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _fix_phase(column: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry made real positive; first index wins ties so the
    # result does not depend on how the backend ordered a degenerate subspace.
    idx = int(np.argmax(np.round(np.abs(column), 12)))
    pivot = column[idx]
    if abs(pivot) == 0.0:
        return column
    return column * (abs(pivot) / pivot)


def _refix_cluster(vectors: np.ndarray) -> np.ndarray:
    """Deterministic basis for a degenerate cluster.

    Projects computational basis vectors into the cluster subspace in index
    order and Gram-Schmidts the survivors.  The output spans the same space
    but no longer depends on backend rotation conventions.
    """
    dim, size = vectors.shape
    proj = vectors @ vectors.conj().T
    out: list[np.ndarray] = []
    for i in range(dim):
        cand = proj[:, i].copy()
        for prev in out:
            cand -= prev * (prev.conj() @ cand)
        norm = np.linalg.norm(cand)
        if norm > 1e-8:
            out.append(cand / norm)
        if len(out) == size:
            break
    if len(out) < size:
        raise InvariantViolation("degenerate cluster re-fix ran out of basis vectors")
    return np.column_stack(out)


def hermitian_eig(h: np.ndarray) -> EigenSystem:
    """eigh with ascending values and a deterministic eigenvector gauge."""
    h = check_hermitian(h)
    values, vectors = np.linalg.eigh(h)
    scale = max(float(np.max(np.abs(values))), 1.0)
    # Split the spectrum into degenerate clusters and re-fix each one.
    start = 0
    cols = vectors.copy()
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > DEGENERACY_RTOL * scale:
            if i - start > 1:
                cols[:, start:i] = _refix_cluster(cols[:, start:i])
            start = i
    for j in range(cols.shape[1]):
        cols[:, j] = _fix_phase(cols[:, j])
    return EigenSystem(values=values, vectors=cols)


def exp_unitary(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for Hermitian H via eigendecomposition."""
    eig = hermitian_eig(h)
    phases = np.exp(-1j * eig.values * t)
    return (eig.vectors * phases) @ eig.vectors.conj().T


def qft_matrix(n: int) -> np.ndarray:
    """Fourier matrix on n qubits, entry (k, j) = exp(2*pi*i*j*k/2^n)/sqrt(2^n)."""
    if n < 1:
        raise InvariantViolation("qft_matrix needs at least one qubit")
    dim = 2**n
    grid = np.outer(np.arange(dim), np.arange(dim))
    return np.exp(2j * np.pi * grid / dim) / np.sqrt(dim)


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u, dtype=complex)
    eye = np.eye(u.shape[0])
    return spectral_norm(u.conj().T @ u - eye) <= tol


def _ordered_product(factors: np.ndarray) -> np.ndarray:
    """Product factors[-1] @ ... @ factors[0] by pairwise tree reduction."""
    mats = factors
    while mats.shape[0] > 1:
        k = mats.shape[0]
        half = k // 2
        # adjacent pairs (2i, 2i+1) merge to mats[2i+1] @ mats[2i]
        merged = np.matmul(mats[1 : 2 * half : 2], mats[0 : 2 * half : 2])
        if k % 2:
            merged = np.concatenate([merged, mats[-1:]], axis=0)
        mats = merged
    return mats[0]


def time_ordered_propagator(
    ham: Callable[[float], np.ndarray], total_time: float, steps: int
) -> np.ndarray:
    """Midpoint-rule product approximation of the time-ordered evolution.

    The driving Hamiltonian is sampled at s = (j + 1/2)/steps on the unit
    interval and each slice contributes exp(-i H(s) * total_time/steps),
    with later slices composed on the left.  Slices are exponentiated in
    batches so reference-grade step counts stay affordable.
    """
    if steps < 1:
        raise InvariantViolation("steps must be positive")
    dt = total_time / steps
    mids = (np.arange(steps) + 0.5) / steps
    h0 = check_hermitian(ham(float(mids[0])))
    dim = h0.shape[0]
    out = np.eye(dim, dtype=complex)
    chunk = 1 << 14
    for lo in range(0, steps, chunk):
        hi = min(steps, lo + chunk)
        hams = np.empty((hi - lo, dim, dim), dtype=complex)
        for j in range(lo, hi):
            hams[j - lo] = h0 if j == 0 else ham(float(mids[j]))
        defect = np.max(np.abs(hams - np.conj(np.swapaxes(hams, 1, 2))))
        scale = max(1.0, float(np.max(np.abs(hams))))
        if defect > 1e-10 * scale:
            raise InvariantViolation(
                f"driving Hamiltonian is not Hermitian (defect {defect:.3e})"
            )
        hams = (hams + np.conj(np.swapaxes(hams, 1, 2))) / 2
        vals, vecs = np.linalg.eigh(hams)
        phases = np.exp(-1j * vals * dt)
        slices = np.einsum("sij,sj,skj->sik", vecs, phases, vecs.conj(), optimize=True)
        out = _ordered_product(slices) @ out
    return out


def _nearest_unitary(a: np.ndarray) -> np.ndarray:
    """Polar projection onto the unitary group."""
    u, _, vh = np.linalg.svd(a)
    return u @ vh


def propagator_self_check(
    ham: Callable[[float], np.ndarray], total_time: float, steps: int
) -> float:
    """Richardson-style ratio check for the midpoint rule.

    Returns ||U_steps - U_4steps|| / ||U_2steps - U_4steps||.  A healthy
    second-order rule gives a ratio of about 4; callers require >= 3.
    """
    u1 = time_ordered_propagator(ham, total_time, steps)
    u2 = time_ordered_propagator(ham, total_time, 2 * steps)
    u4 = time_ordered_propagator(ham, total_time, 4 * steps)
    denom = spectral_norm(u2 - u4)
    if denom == 0.0:
        return np.inf
    return spectral_norm(u1 - u4) / denom


def converged_propagator(
    ham: Callable[[float], np.ndarray],
    total_time: float,
    tol: float = 1e-9,
    start_steps: int = 64,
    max_steps: int = 1 << 21,
) -> np.ndarray:
    """Step-double the midpoint rule until successive refinements agree.

    The midpoint slice rule is time-symmetric, so its error expands in even
    powers of the step and one Richardson elimination of the leading term is
    safe.  Doubling continues until consecutive extrapolants agree to tol;
    the winner is polar-projected back onto the unitary group so downstream
    defect measurements are not polluted by the extrapolation residue.
    """
    steps = start_steps
    coarse = time_ordered_propagator(ham, total_time, steps)
    fine = time_ordered_propagator(ham, total_time, 2 * steps)
    prev = (4.0 * fine - coarse) / 3.0
    while 2 * steps <= max_steps:
        steps *= 2
        coarse = fine
        fine = time_ordered_propagator(ham, total_time, 2 * steps)
        cur = (4.0 * fine - coarse) / 3.0
        if spectral_norm(cur - prev) < tol:
            return _nearest_unitary(cur)
        prev = cur
    raise InvariantViolation(
        f"propagator did not converge to {tol:g} within {max_steps} steps"
    )
