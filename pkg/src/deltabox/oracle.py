"""Crank-Nicolson finite-difference reference solver.

Independent of the integral-equation machinery: the delta barrier is a single
grid-point potential of height ``2 c / dx`` and the walls are homogeneous
Dirichlet values. Used only to cross-check the Volterra solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import solveh_banded
from scipy.optimize import brentq

from .core import BoxGeometry, Protocol, SpatialGrid
from .errors import ConfigurationError, NumericalError
from .volterra import WavefunctionSnapshot

DEFAULT_C_CAP = 50.0


@dataclass(frozen=True)
class FdmConfig:
    J: int = 401
    dt: float = 1e-4
    c_cap: float = DEFAULT_C_CAP

    def __post_init__(self):
        if self.J < 3:
            raise ConfigurationError("FDM grid needs J >= 3")
        if not self.dt > 0:
            raise ConfigurationError("FDM time step must be positive")
        if not math.isfinite(self.c_cap):
            raise ConfigurationError("c_cap must be finite")


def barrier_index(geom: BoxGeometry, x: np.ndarray) -> int:
    return int(np.argmin(np.abs(x - geom.x0)))


@numba.njit(cache=True)
def _cn_steps(psi, n_steps, dt, inv_dx2, j0, vbar, out_every, out):
    """Crank-Nicolson on interior points; ``vbar[s]`` is the barrier potential at mid-step ``s``."""
    n = psi.size
    a = 0.5j * dt  # (1 + a H) psi_new = (1 - a H) psi_old
    off = -a * inv_dx2
    rhs = np.empty(n, dtype=np.complex128)
    cp = np.empty(n, dtype=np.complex128)
    dp = np.empty(n, dtype=np.complex128)
    rec = 0
    for s in range(n_steps):
        v = vbar[s]
        for i in range(n):
            d = 2.0 * inv_dx2 + (v if i == j0 else 0.0)
            r = (1.0 - a * d) * psi[i]
            if i > 0:
                r += a * inv_dx2 * psi[i - 1]
            if i < n - 1:
                r += a * inv_dx2 * psi[i + 1]
            rhs[i] = r
        # Thomas sweep; the matrix is constant off the diagonal
        d0 = 1.0 + a * (2.0 * inv_dx2 + (v if j0 == 0 else 0.0))
        cp[0] = off / d0
        dp[0] = rhs[0] / d0
        for i in range(1, n):
            di = 1.0 + a * (2.0 * inv_dx2 + (v if i == j0 else 0.0))
            den = di - off * cp[i - 1]
            cp[i] = off / den
            dp[i] = (rhs[i] - off * dp[i - 1]) / den
        psi[n - 1] = dp[n - 1]
        for i in range(n - 2, -1, -1):
            psi[i] = dp[i] - cp[i] * psi[i + 1]
        if out_every[s]:
            out[rec, :] = psi
            rec += 1


def cn_evolve(initial: WavefunctionSnapshot, protocol: Protocol, fdm: FdmConfig,
              horizon: float, record_times=(), geom: BoxGeometry | None = None,
              t_offset: float = 0.0) -> list[WavefunctionSnapshot]:
    """Propagate ``initial`` to ``horizon`` and return snapshots at ``record_times``.

    The step is shrunk so an integer number of steps lands on ``horizon``;
    record times snap to the nearest step. The protocol is sampled at
    mid-steps ``t_offset + (s + 1/2) dt``.
    """
    x = initial.x
    if x.size != fdm.J:
        raise ConfigurationError(f"initial snapshot has {x.size} points, FDM config expects {fdm.J}")
    geom = geom or BoxGeometry(L=initial.L)
    n_steps = max(1, math.ceil(horizon / fdm.dt - 1e-9))
    dt = horizon / n_steps
    tmid = t_offset + (np.arange(n_steps) + 0.5) * dt
    c = np.asarray(protocol(tmid), dtype=float)
    if np.any(np.abs(c) > fdm.c_cap):
        raise ConfigurationError(f"protocol exceeds c_cap={fdm.c_cap} (max {np.max(np.abs(c)):.4g})")
    dx = x[1] - x[0]
    vbar = 2.0 * c / dx
    j0 = barrier_index(geom, x) - 1  # interior indexing

    steps = sorted({int(round(t / dt)) for t in record_times})
    if steps and (steps[0] < 0 or steps[-1] > n_steps):
        raise ConfigurationError("record time outside the propagation window")
    out_every = np.zeros(n_steps, dtype=np.bool_)
    snaps0 = [s for s in steps if s == 0]
    for s in steps:
        if s > 0:
            out_every[s - 1] = True
    out = np.empty((int(out_every.sum()), fdm.J - 2), dtype=np.complex128)

    psi = np.ascontiguousarray(initial.psi[1:-1], dtype=np.complex128).copy()
    _cn_steps(psi, n_steps, dt, 1.0 / dx**2, j0, vbar, out_every, out)

    snaps = []
    if snaps0:
        snaps.append(WavefunctionSnapshot(t_offset, x, initial.psi.astype(complex).copy(), initial.L))
    for row, s in zip(out, [s for s in steps if s > 0]):
        full = np.zeros(fdm.J, dtype=complex)
        full[1:-1] = row
        snaps.append(WavefunctionSnapshot(t_offset + s * dt, x, full, initial.L))
    return snaps


def discrete_hamiltonian_banded(geom: BoxGeometry, c: float, J: int) -> tuple[np.ndarray, np.ndarray]:
    """Upper-banded form of the interior Hamiltonian and the grid."""
    x = SpatialGrid(geom.L, J).points
    dx = x[1] - x[0]
    n = J - 2
    diag = np.full(n, 2.0 / dx**2)
    diag[barrier_index(geom, x) - 1] += 2.0 * c / dx
    ab = np.zeros((2, n))
    ab[0, 1:] = -1.0 / dx**2
    ab[1] = diag
    return ab, x


def static_groundstate(c: float, geom: BoxGeometry, fdm: FdmConfig, tol: float = 1e-13,
                       max_iter: int = 10_000) -> tuple[float, WavefunctionSnapshot]:
    """Lowest eigenpair of the discrete Hamiltonian by inverse iteration.

    The Hamiltonian is positive definite, so unshifted inverse iteration
    converges to the ground state at rate ``E_1 / E_2``.
    """
    if c < 0:
        raise ConfigurationError("static barrier strength must be >= 0")
    ab, x = discrete_hamiltonian_banded(geom, c, fdm.J)
    dx = x[1] - x[0]
    v = np.cos(np.linspace(-0.5 * np.pi, 0.5 * np.pi, fdm.J)[1:-1]) + 0.1
    v /= np.linalg.norm(v)
    energy = np.inf
    for _ in range(max_iter):
        w = solveh_banded(ab, v)
        new_energy = 1.0 / np.dot(v, w)
        w /= np.linalg.norm(w)
        if abs(new_energy - energy) <= tol * abs(new_energy):
            energy = new_energy
            v = w
            break
        energy, v = new_energy, w
    else:
        raise NumericalError("inverse iteration did not converge")
    full = np.zeros(fdm.J)
    full[1:-1] = v / math.sqrt(dx)
    if full.sum() < 0:
        full = -full
    return float(energy), WavefunctionSnapshot(0.0, x, full.astype(complex), geom.L)


def transcendental_ground_energy(c: float, geom: BoxGeometry) -> float:
    """Ground energy ``q^2`` of the continuum problem with a static barrier.

    Matching ``A sin q(x+L)`` and ``B sin q(L-x)`` across the barrier gives
    ``q [cot(q L1) + cot(q L2)] = -2c`` with ``L1 = L + x0``, ``L2 = L - x0``.
    The lowest root lies below ``pi / max(L1, L2)``.
    """
    L1, L2 = geom.left_length, geom.right_length
    if c == 0:
        return geom.k**2
    upper = math.pi / max(L1, L2)

    def f(q):
        return q * (1.0 / math.tan(q * L1) + 1.0 / math.tan(q * L2)) + 2.0 * c

    lo = geom.k * (1 - 1e-12)
    hi = upper * (1 - 1e-14)
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-15) ** 2
