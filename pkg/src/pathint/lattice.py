"""Lattice propagators driven by action-phase oracles and Fourier transforms.

A particle lives on ``2**n`` grid points spanning ``[0, x_max)``.  Position is
the diagonal operator ``X = diag(q * delta_x)`` and momentum is its Fourier
conjugate ``P = (2*pi/(x_max*delta_x)) * F X F^dag`` where ``F`` is the
positive-sign Fourier matrix.  The timestep is locked to the geometry,

    tau = mass * x_max * delta_x / (2*pi),

which turns the kinetic phase between neighbouring timeslices into the exact
quadratic phase ``pi*(dq)**2 / 2**n``.  One split step
``exp(-i*tau*P^2/2m) exp(-i*tau*V)`` then equals a doubly indexed phase sum
that a stepping circuit realizes with two queries to a diagonal action oracle
around one inverse Fourier transform.  The equality rests on quadratic
Gauss-sum reciprocity, exposed here as :func:`gauss_sum_check`.

Each step of the circuit differs from the split product by the unit phase
``exp(-i*pi/4) * exp(i*tau*V(0))``, tracked analytically rather than absorbed
into the oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .decomp import QueryCounter
from .errors import CapExceeded, SpecError
from .linalg import exp_unitary, qft_matrix

BRUTE_FORCE_CAP = 1 << 16
STEP_WORK_CAP = 1 << 16
NORM_TOL = 1e-9
CUTOFF_TOL = 1e-10


@dataclass(frozen=True)
class LatticeConfig:
    """Grid geometry plus the timestep bound to it.

    The timestep is not a free knob.  It is derived as
    ``tau = mass * x_max * delta_x / (2*pi)`` so the kinetic action phase is
    a pure quadratic Gauss phase, and total time is ``r * tau`` with integer
    ``r``.  Keeping the binding exact by construction is what lets the
    stepped circuit match the split product to near machine precision.
    """

    n: int
    x_max: float
    mass: float
    r: int

    def __post_init__(self) -> None:
        if not 1 <= self.n <= 10:
            raise SpecError("grid exponent n must be between 1 and 10")
        if not self.x_max > 0:
            raise SpecError("x_max must be positive")
        if not self.mass > 0:
            raise SpecError("mass must be positive")
        if self.r < 1:
            raise SpecError("step count r must be a positive integer")

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def delta_x(self) -> float:
        return self.x_max / self.dim

    @property
    def tau(self) -> float:
        return self.mass * self.x_max * self.delta_x / (2.0 * np.pi)

    @property
    def total_time(self) -> float:
        return self.r * self.tau

    def positions(self) -> np.ndarray:
        """Grid positions q * delta_x for q = 0 .. 2**n - 1."""
        return np.arange(self.dim) * self.delta_x


@dataclass(frozen=True)
class Potential:
    """Real potential with a declared magnitude bound.

    ``energy`` maps a position to a real energy; ``v_max`` is the promised
    bound on its magnitude over any grid this potential will be used with.
    """

    energy: Callable[[float], float]
    v_max: float

    def grid_values(self, cfg: LatticeConfig) -> np.ndarray:
        vals = np.array([float(self.energy(x)) for x in cfg.positions()])
        slack = 1e-12 * max(1.0, self.v_max)
        if np.any(np.abs(vals) > self.v_max + slack):
            raise SpecError("potential exceeds its declared bound on the grid")
        return vals


def zero_potential() -> Potential:
    return Potential(energy=lambda x: 0.0, v_max=0.0)


def constant_potential(level: float) -> Potential:
    return Potential(energy=lambda x: float(level), v_max=abs(float(level)))


def harmonic_potential(mass: float, omega: float, center: float, x_max: float) -> Potential:
    """Harmonic well 0.5*mass*omega^2*(x - center)^2 on a grid inside [0, x_max)."""
    if mass <= 0 or omega <= 0:
        raise SpecError("harmonic potential needs positive mass and frequency")
    reach = max(abs(center), abs(x_max - center))
    bound = 0.5 * mass * omega**2 * reach**2
    return Potential(energy=lambda x: 0.5 * mass * omega**2 * (x - center) ** 2, v_max=bound)


def square_well_potential(depth: float, left: float, right: float) -> Potential:
    """Finite square well of the given depth on [left, right)."""
    if not right > left:
        raise SpecError("square well needs right > left")

    def energy(x: float) -> float:
        return -float(depth) if left <= x < right else 0.0

    return Potential(energy=energy, v_max=abs(float(depth)))


def position_op(cfg: LatticeConfig) -> np.ndarray:
    return np.diag(cfg.positions()).astype(complex)


def momentum_op(cfg: LatticeConfig) -> np.ndarray:
    """Momentum as the Fourier conjugate of position.

    Eigenvectors are the Fourier columns, with eigenvalue 2*pi*q/x_max on
    column q.  The spectrum is one-sided by construction; shifting by delta_x
    is the cyclic permutation of the grid.
    """
    f = qft_matrix(cfg.n)
    scale = 2.0 * np.pi / (cfg.x_max * cfg.delta_x)
    return scale * (f @ position_op(cfg) @ f.conj().T)


def kinetic_op(cfg: LatticeConfig) -> np.ndarray:
    p = momentum_op(cfg)
    return p @ p / (2.0 * cfg.mass)


def split_step_reference(cfg: LatticeConfig, potential: Potential) -> np.ndarray:
    """One split step exp(-i*tau*P^2/2m) @ exp(-i*tau*V)."""
    v = potential.grid_values(cfg)
    kin = exp_unitary(kinetic_op(cfg), cfg.tau)
    return kin @ np.diag(np.exp(-1j * cfg.tau * v))


class ActionOracle:
    """Diagonal phase oracle for the action of one timeslice pair.

    Calling with grid indices (q_from, q_to) returns

        exp(i*(mass/(2*tau))*(x_to - x_from)**2 - i*tau*V(x_from))

    and counts one query.  Under the timestep binding the kinetic
    coefficient is exactly pi/2**n, so the phase is computed in that integer
    form.  The doubled-register matrix view counts one query as well, since
    a single oracle application serves a whole superposition.
    """

    def __init__(
        self,
        cfg: LatticeConfig,
        potential: Potential,
        counter: QueryCounter | None = None,
    ) -> None:
        self.cfg = cfg
        self.potential = potential
        self.counter = counter if counter is not None else QueryCounter()
        self._v = potential.grid_values(cfg)

    def __call__(self, q_from: int, q_to: int) -> complex:
        dim = self.cfg.dim
        if not (0 <= q_from < dim and 0 <= q_to < dim):
            raise SpecError("grid index out of range for the action oracle")
        self.counter.tick("action")
        kinetic = (np.pi / dim) * (q_to - q_from) ** 2
        return complex(np.exp(1j * kinetic - 1j * self.cfg.tau * self._v[q_from]))

    def phase_table(self) -> np.ndarray:
        """Array of phases indexed [q_from, q_to], without query accounting."""
        dim = self.cfg.dim
        q = np.arange(dim)
        kinetic = (np.pi / dim) * (q[None, :] - q[:, None]) ** 2
        return np.exp(1j * kinetic - 1j * self.cfg.tau * self._v[:, None])

    def doubled_matrix(self) -> np.ndarray:
        """Diagonal unitary on the doubled register |q_from>|q_to>."""
        self.counter.tick("action")
        return np.diag(self.phase_table().reshape(-1))


def _step_phases(cfg: LatticeConfig, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal phases for the two oracle queries of one step.

    The first query is (q, 0): kinetic phase pi*q^2/2^n plus the potential at
    x_q.  The second is (0, q): the same kinetic phase but the potential at
    x = 0, which is a global phase per step.
    """
    q = np.arange(cfg.dim)
    kinetic = np.pi * q * q / cfg.dim
    first = np.exp(1j * kinetic - 1j * cfg.tau * v)
    second = np.exp(1j * kinetic - 1j * cfg.tau * v[0])
    return first, second


def step_global_phase(cfg: LatticeConfig, potential: Potential) -> complex:
    """Unit phase g with circuit_step * g == split step, per step."""
    v0 = float(potential.energy(0.0))
    return complex(np.exp(-1j * np.pi / 4) * np.exp(1j * cfg.tau * v0))


def lagrangian_step(
    cfg: LatticeConfig,
    potential: Potential,
    state: np.ndarray,
    counter: QueryCounter | None = None,
) -> np.ndarray:
    """Advance a normalized grid state by one circuit step.

    The step applies the action oracle against a zeroed second register, an
    inverse Fourier transform, and the oracle again with the zeroed register
    first: two oracle queries and one transform in total.
    """
    state = np.asarray(state, dtype=complex)
    if state.shape != (cfg.dim,):
        raise SpecError("state has the wrong length for this grid")
    if abs(np.linalg.norm(state) - 1.0) > NORM_TOL:
        raise SpecError("lagrangian_step expects a normalized state")
    first, second = _step_phases(cfg, potential.grid_values(cfg))
    if counter is not None:
        counter.tick("action", 2)
        counter.tick("qft")
    return second * np.fft.fft(first * state, norm="ortho")


def lagrangian_propagator(
    cfg: LatticeConfig,
    potential: Potential,
    counter: QueryCounter | None = None,
) -> np.ndarray:
    """Dense matrix of r composed circuit steps.

    Multiplying by ``step_global_phase(cfg, potential) ** r`` recovers the
    split product ``(exp(-i*tau*P^2/2m) exp(-i*tau*V))**r`` exactly.  Query
    accounting is per step, not per basis column: the oracle acts on
    superpositions.
    """
    if cfg.r * cfg.dim > STEP_WORK_CAP:
        raise CapExceeded("propagator work r * 2^n exceeds the cap")
    first, second = _step_phases(cfg, potential.grid_values(cfg))
    u = np.eye(cfg.dim, dtype=complex)
    for _ in range(cfg.r):
        u = second[:, None] * np.fft.fft(first[:, None] * u, axis=0, norm="ortho")
        if counter is not None:
            counter.tick("action", 2)
            counter.tick("qft")
    return u


def propagator_global_phase(cfg: LatticeConfig, potential: Potential) -> complex:
    """Accumulated tracked phase over all r steps."""
    return complex(step_global_phase(cfg, potential) ** cfg.r)


def brute_force_propagator(cfg: LatticeConfig, potential: Potential) -> np.ndarray:
    """Propagator by literal summation over all interior lattice paths.

    Enumerates every path (q_0, q_1, ..., q_r) with fixed endpoints,
    multiplies the per-transition action phases along it, and accumulates
    with the prefactor (exp(-i*pi/4)/sqrt(2^n))**r.  The result equals the
    split product with no extra phase.  Only feasible while the interior
    path count (2^n)**(r-1) stays at or below BRUTE_FORCE_CAP.
    """
    dim = cfg.dim
    if dim ** (cfg.r - 1) > BRUTE_FORCE_CAP:
        raise CapExceeded("interior path count exceeds the brute-force cap")
    v = potential.grid_values(cfg)
    q = np.arange(dim)
    trans = np.exp(
        1j * (np.pi / dim) * (q[:, None] - q[None, :]) ** 2 - 1j * cfg.tau * v[None, :]
    )
    prefactor = (np.exp(-1j * np.pi / 4) / math.sqrt(dim)) ** cfg.r
    out = np.zeros((dim, dim), dtype=complex)
    for q_start in range(dim):
        for q_end in range(dim):
            total = 0.0 + 0.0j
            for interior in itertools.product(range(dim), repeat=cfg.r - 1):
                chain = (q_start, *interior, q_end)
                amp = 1.0 + 0.0j
                for k in range(cfg.r):
                    amp *= trans[chain[k + 1], chain[k]]
                total += amp
            out[q_end, q_start] = total
    return prefactor * out


def gauss_sum_check(a: int, b: int, c: int) -> tuple[complex, complex]:
    """Both sides of quadratic Gauss-sum reciprocity.

    lhs = sum_{j=0}^{|c|-1} exp(i*pi*(a*j^2 + b*j)/c)
    rhs = |c/a|^(1/2) * exp(i*pi/4*(sgn(a*c) - b^2/(a*c)))
          * sum_{j=0}^{|a|-1} exp(-i*pi*(c*j^2 + b*j)/a)

    Requires a*c nonzero and a*c + b even.
    """
    a, b, c = int(a), int(b), int(c)
    if a * c == 0:
        raise SpecError("gauss_sum_check needs a*c nonzero")
    if (a * c + b) % 2 != 0:
        raise SpecError("gauss_sum_check needs a*c + b even")
    j = np.arange(abs(c), dtype=float)
    lhs = np.sum(np.exp(1j * np.pi * (a * j * j + b * j) / c))
    k = np.arange(abs(a), dtype=float)
    tail = np.sum(np.exp(-1j * np.pi * (c * k * k + b * k) / a))
    front = math.sqrt(abs(c / a)) * np.exp(
        1j * (np.pi / 4) * (np.sign(a * c) - b * b / (a * c))
    )
    return complex(lhs), complex(front * tail)


def gaussian_packet(
    cfg: LatticeConfig, center: float, width: float, momentum: float
) -> np.ndarray:
    """Normalized Gaussian on the grid with a momentum boost."""
    if width <= 0:
        raise SpecError("gaussian packet needs positive width")
    x = cfg.positions()
    psi = np.exp(-((x - center) ** 2) / (4.0 * width**2) + 1j * momentum * x)
    return psi / np.linalg.norm(psi)


def momentum_mode_mask(cfg: LatticeConfig, p_max: float) -> np.ndarray:
    """Boolean mask over Fourier modes with eigenvalue at most p_max."""
    modes = 2.0 * np.pi * np.arange(cfg.dim) / cfg.x_max
    return modes <= p_max


def feasible_error_bound(
    total_time: float, r: int, mass: float, v_max: float, p_max: float, x_max: float
) -> float:
    """Measurement-error bound for split stepping under a momentum cutoff.

    Equals r * (2*tau^2*v_max*p_max^2/mass) * sqrt(p_max*x_max/(2*pi) + 1)
    with tau = total_time / r; written in terms of total_time to make the
    1/r scaling at fixed time explicit.
    """
    return (
        2.0
        * total_time**2
        * v_max
        * p_max**2
        / (mass * r)
        * math.sqrt(p_max * x_max / (2.0 * np.pi) + 1.0)
    )


def feasible_error_check(
    cfg: LatticeConfig,
    potential: Potential,
    p_max: float,
    psi: np.ndarray,
    counter: QueryCounter | None = None,
) -> tuple[float, float]:
    """Measured POVM discrepancy of stepped vs exact evolution, with its bound.

    The POVM family is fixed: every rank-1 position projector and every
    rank-1 Fourier-mode projector, 2*2^n outcomes in total.  The input must
    be normalized and supported on Fourier modes with momentum at most
    p_max; support is projector-enforced with tolerance 1e-10.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (cfg.dim,):
        raise SpecError("state has the wrong length for this grid")
    if abs(np.linalg.norm(psi) - 1.0) > NORM_TOL:
        raise SpecError("feasible_error_check expects a normalized state")
    if p_max <= 0:
        raise SpecError("momentum cutoff must be positive")
    keep = momentum_mode_mask(cfg, p_max)
    modes = np.fft.fft(psi, norm="ortho")
    leak = float(np.linalg.norm(modes[~keep]))
    if leak > CUTOFF_TOL:
        raise SpecError("state leaks past the declared momentum cutoff")

    v = potential.grid_values(cfg)
    ham = kinetic_op(cfg) + np.diag(v)
    exact = exp_unitary(ham, cfg.total_time) @ psi

    first, second = _step_phases(cfg, v)
    stepped = psi
    for _ in range(cfg.r):
        stepped = second * np.fft.fft(first * stepped, norm="ortho")
        if counter is not None:
            counter.tick("action", 2)
            counter.tick("qft")

    pos_gap = np.max(np.abs(np.abs(exact) ** 2 - np.abs(stepped) ** 2))
    exact_modes = np.fft.fft(exact, norm="ortho")
    stepped_modes = np.fft.fft(stepped, norm="ortho")
    mom_gap = np.max(np.abs(np.abs(exact_modes) ** 2 - np.abs(stepped_modes) ** 2))
    measured = float(max(pos_gap, mom_gap))
    bound = feasible_error_bound(
        cfg.total_time, cfg.r, cfg.mass, potential.v_max, p_max, cfg.x_max
    )
    return measured, bound
