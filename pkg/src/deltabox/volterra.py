"""Exact solver: the Volterra integral equation for ``psi(x0, t)`` by left Riemann sums.

The wave function is written as free evolution of the initial eigenmode plus a
sum over kernel modes ``nu`` of ``kernel_coeff(nu, x) exp(-i nu^2 k^2 t) G_nu(t)``
with accumulators

    G_nu(t) = int_0^t c(t') psi(x0, t') exp(i nu^2 k^2 t') dt'.

The accumulators are advanced with the explicit left Riemann rule, so the
boundary value at step ``T`` only needs contributions through step ``T - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import (
    BoxGeometry,
    Protocol,
    SpatialGrid,
    TimeGrid,
    eigenenergy,
    eigenmode,
    kernel_coeff,
    trapezoid,
)
from .errors import (
    ConfigurationError,
    DivergenceError,
    InstabilityError,
    InterpolationError,
    ResolutionError,
)

DEFAULT_N = 128
DEFAULT_THETA_MAX = 1.0
DEFAULT_J = 513
_RESYNC = 256


def retained_modes(N: int) -> np.ndarray:
    """Kernel modes ``nu = 1 .. 2N + 1``.

    For a barrier at the centre only odd ``nu`` contribute, so this is exactly
    the cosine set ``2 mu + 1`` with ``mu = 0 .. N``.
    """
    if N < 0:
        raise ConfigurationError("mode cutoff N must be >= 0")
    return np.arange(1, 2 * N + 2)


def phase_per_step(geom: BoxGeometry, N: int, eps: float) -> float:
    """Phase rotation ``(2N+1)^2 k^2 eps`` of the fastest retained mode in one step."""
    return (2 * N + 1) ** 2 * geom.k**2 * eps


def default_steps(geom: BoxGeometry, horizon: float, N: int = DEFAULT_N,
                  theta_max: float = DEFAULT_THETA_MAX, multiple_of: int = 1) -> int:
    """Smallest step count keeping the fastest mode's phase step below ``theta_max``.

    ``multiple_of`` rounds up so that uniform recording intervals land on steps.
    """
    M = max(1, math.ceil(phase_per_step(geom, N, horizon) / theta_max - 1e-12))
    return multiple_of * math.ceil(M / multiple_of)


# --------------------------------------------------------------------------- data


@dataclass
class SolverState:
    """Mode accumulators and the recorded boundary history of one Volterra run.

    ``boundary_history[l]`` holds ``psi(x0, l eps)`` for ``l < T``.
    """

    geom: BoxGeometry
    grid: TimeGrid
    N: int
    G: np.ndarray = field(default=None)
    boundary_history: np.ndarray = field(default=None, repr=False)
    T: int = 0

    def __post_init__(self):
        self.nu = retained_modes(self.N)
        if self.G is None:
            self.G = np.zeros(self.nu.size, dtype=complex)
        if self.boundary_history is None:
            self.boundary_history = np.zeros(self.grid.M + 1, dtype=complex)
        self.omega = eigenenergy(self.geom, self.nu)
        self.barrier_coeff = kernel_coeff(self.geom, self.nu, self.geom.x0)
        self.phi_n0 = eigenmode(self.geom, self.geom.n, self.geom.x0)
        self.E_n = float(eigenenergy(self.geom, self.geom.n))
        self._field_cache: dict[tuple, np.ndarray] = {}

    @property
    def t(self) -> float:
        return self.T * self.grid.eps

    def boundary_value(self) -> complex:
        """``psi(x0, T eps)`` from the accumulators as they stand."""
        t = self.t
        return self.phi_n0 * np.exp(-1j * self.E_n * t) + np.sum(
            self.barrier_coeff * np.exp(-1j * self.omega * t) * self.G
        )

    def kernel_matrix(self, x: np.ndarray) -> np.ndarray:
        key = (x.size, float(x[0]), float(x[-1]))
        K = self._field_cache.get(key)
        if K is None:
            K = kernel_coeff(self.geom, self.nu[:, None], x[None, :])
            self._field_cache[key] = K
        return K

    def copy(self) -> SolverState:
        return SolverState(self.geom, self.grid, self.N, self.G.copy(),
                           self.boundary_history.copy(), self.T)


@dataclass
class ModeCoefficients:
    """Projections ``sigma_m`` of the wave function on box eigenmodes ``m = modes``."""

    sigma: np.ndarray
    t: float
    modes: np.ndarray = None

    def __post_init__(self):
        if self.modes is None:
            self.modes = np.arange(1, self.sigma.size + 1)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.sigma) ** 2))


@dataclass
class WavefunctionSnapshot:
    t: float
    x: np.ndarray
    psi: np.ndarray
    L: float = 1.0

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    @property
    def norm(self) -> float:
        return float(trapezoid(self.density, self.x))


@dataclass
class Trajectory:
    """Output of :func:`run`.

    ``times``/``boundary``/``strength`` cover every grid step ``0 .. M``;
    ``snapshots`` and ``coefficients`` are aligned with the snapped
    ``snapshot_times``.
    """

    geom: BoxGeometry
    grid: TimeGrid
    N: int
    times: np.ndarray
    boundary: np.ndarray
    strength: np.ndarray
    snapshots: list[WavefunctionSnapshot]
    coefficients: list[ModeCoefficients]
    state: SolverState = field(repr=False, default=None)

    @property
    def snapshot_times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


# --------------------------------------------------------------------------- stepping


def _instability_bound(geom: BoxGeometry) -> float:
    return 10.0 / geom.L


def step(state: SolverState, protocol: Protocol) -> SolverState:
    """Advance one left-Riemann step in place and return the state.

    The boundary value at ``T eps`` is formed from the accumulators first;
    only then do the accumulators absorb the step-``T`` contribution.
    """
    if state.T >= state.grid.M:
        raise ConfigurationError("time grid exhausted")
    eps, t = state.grid.eps, state.t
    c = protocol(t)
    if not np.isfinite(c):
        raise DivergenceError(f"protocol not finite at t={t}")
    psi0 = state.boundary_value()
    if abs(psi0) ** 2 > _instability_bound(state.geom):
        raise InstabilityError(f"|psi(x0)|^2={abs(psi0) ** 2:.3g} at t={t}; eps too large for N")
    state.boundary_history[state.T] = psi0
    state.G += eps * c * psi0 * np.exp(1j * state.omega * t)
    state.T += 1
    return state


@numba.njit(cache=True)
def _march(G, hist, T0, T1, eps, omega, coeff, phi_n0, E_n, cvals, bound):
    n = G.size
    phase = np.empty(n, dtype=np.complex128)
    rot = np.exp(1j * omega * eps)
    for T in range(T0, T1):
        t = T * eps
        # exact phases every _RESYNC steps, cheap rotations in between
        if (T - T0) % _RESYNC == 0:
            for j in range(n):
                phase[j] = np.exp(1j * omega[j] * t)
        psi0 = phi_n0 * np.exp(-1j * E_n * t)
        for j in range(n):
            psi0 += coeff[j] * G[j] * phase[j].conjugate()
        if psi0.real * psi0.real + psi0.imag * psi0.imag > bound:
            return T
        hist[T] = psi0
        f = eps * cvals[T] * psi0
        for j in range(n):
            G[j] += f * phase[j]
            phase[j] *= rot[j]
    return -1


def advance(state: SolverState, protocol: Protocol, T_end: int,
            cvals: np.ndarray | None = None) -> SolverState:
    """Run :func:`step` until ``state.T == T_end`` (compiled loop, same arithmetic)."""
    if T_end > state.grid.M:
        raise ConfigurationError("cannot advance past the end of the time grid")
    if T_end <= state.T:
        return state
    if cvals is None:
        cvals = np.zeros(state.grid.M)
        cvals[state.T:T_end] = protocol(np.arange(state.T, T_end) * state.grid.eps)
    if not np.all(np.isfinite(cvals[state.T:T_end])):
        raise DivergenceError("protocol not finite on the time grid")
    bad = _march(state.G, state.boundary_history, state.T, T_end, state.grid.eps,
                 state.omega, state.barrier_coeff.astype(complex), complex(state.phi_n0),
                 state.E_n, np.asarray(cvals, dtype=float), _instability_bound(state.geom))
    if bad >= 0:
        state.T = bad
        raise InstabilityError(
            f"|psi(x0)|^2 exceeded {_instability_bound(state.geom):.3g} at t={bad * state.grid.eps:.6g};"
            " eps too large for N"
        )
    state.T = T_end
    return state


# --------------------------------------------------------------------------- fields


def reconstruct_field(state: SolverState, x_grid: SpatialGrid | np.ndarray,
                      t: float | None = None) -> WavefunctionSnapshot:
    """Wave function on ``x_grid`` at the state's current time ``T eps``.

    Each grid point is an independent sum over kernel modes.
    """
    if t is not None and abs(t - state.t) > 1e-9 * max(1.0, abs(t)):
        raise InterpolationError(
            f"state holds accumulators for t={state.t}, not t={t}; no temporal interpolation"
        )
    x = x_grid.points if isinstance(x_grid, SpatialGrid) else np.asarray(x_grid, dtype=float)
    t = state.t
    K = state.kernel_matrix(x)
    psi = eigenmode(state.geom, state.geom.n, x) * np.exp(-1j * state.E_n * t)
    psi = psi + (np.exp(-1j * state.omega * t) * state.G) @ K
    return WavefunctionSnapshot(t, x, psi, state.geom.L)


def state_coefficients(state: SolverState) -> ModeCoefficients:
    """Mode coefficients read off the accumulators (no quadrature).

    ``sigma_m = delta_{mn} e^{-i E_n t} - 2i phi_m(x0) e^{-i E_m t} G_m``, since the
    kernel factorises as ``-2i phi_nu(x) phi_nu(x0)``.
    """
    t = state.t
    sigma = -2j * eigenmode(state.geom, state.nu, state.geom.x0) * np.exp(-1j * state.omega * t) * state.G
    n = state.geom.n
    if n <= state.nu.size:
        sigma[n - 1] += np.exp(-1j * state.E_n * t)
    else:
        sigma = np.concatenate([sigma, np.zeros(n - state.nu.size, complex)])
        sigma[n - 1] = np.exp(-1j * state.E_n * t)
    return ModeCoefficients(sigma, t)


def symmetric_coefficients(state: SolverState) -> np.ndarray:
    """Cosine-series coefficients ``sigma_mu`` (``mu = 0 .. N``) for a centred barrier and ground start."""
    if state.geom.x0 != 0 or state.geom.n != 1:
        raise ConfigurationError("closed-form cosine coefficients need x0 = 0 and n = 1")
    t, k, L = state.t, state.geom.k, state.geom.L
    mu = np.arange(state.N + 1)
    F = state.G[2 * mu]
    sigma = -2j / math.sqrt(L) * np.exp(-1j * (2 * mu + 1) ** 2 * k**2 * t) * F
    sigma[0] += np.exp(-1j * k**2 * t)
    return sigma


def mode_coefficients(snapshot: WavefunctionSnapshot, N_obs: int, geom: BoxGeometry | None = None
                      ) -> ModeCoefficients:
    """Trapezoid projections of ``snapshot`` onto box eigenmodes ``1 .. N_obs``."""
    x = snapshot.x
    intervals = x.size - 1
    if N_obs < 1 or intervals < 2 * N_obs:
        raise ResolutionError(
            f"{x.size} grid points cannot resolve mode {N_obs} (need >= 2 points per half-wavelength)"
        )
    geom = geom or BoxGeometry(L=snapshot.L)
    m = np.arange(1, N_obs + 1)
    phi = eigenmode(geom, m[:, None], x[None, :])
    sigma = trapezoid(phi * snapshot.psi[None, :], x)
    return ModeCoefficients(sigma, snapshot.t, m)


# --------------------------------------------------------------------------- driver


def check_configuration(geom: BoxGeometry, grid: TimeGrid, N: int,
                        theta_max: float = DEFAULT_THETA_MAX) -> None:
    theta = phase_per_step(geom, N, grid.eps)
    if theta > theta_max * (1 + 1e-12):
        raise ConfigurationError(
            f"fastest mode turns {theta:.3g} rad per step (limit {theta_max}); "
            f"use M >= {default_steps(geom, grid.horizon, N, theta_max)}"
        )


def run(geom: BoxGeometry, protocol: Protocol, grid: TimeGrid | None = None, N: int = DEFAULT_N,
        snapshot_times=(), x_grid: SpatialGrid | None = None,
        theta_max: float = DEFAULT_THETA_MAX) -> Trajectory:
    """Solve the insertion problem on ``grid`` and record snapshots.

    Snapshot times are snapped to the nearest grid step. The boundary trace
    includes the final time ``M eps``.
    """
    if grid is None:
        if protocol.horizon is None:
            raise ConfigurationError("protocol has no natural horizon; pass a TimeGrid")
        grid = TimeGrid(protocol.horizon, default_steps(geom, protocol.horizon, N, theta_max))
    check_configuration(geom, grid, N, theta_max)
    if x_grid is None:
        x_grid = SpatialGrid(geom.L, DEFAULT_J)
    elif x_grid.L != geom.L:
        raise ConfigurationError("spatial grid does not span the box")

    times = grid.times
    cvals = np.asarray(protocol(times), dtype=float)
    if not np.all(np.isfinite(cvals)):
        raise DivergenceError("protocol not finite on the time grid")

    state = SolverState(geom, grid, N)
    stops = sorted({grid.nearest_index(t) for t in snapshot_times})
    snapshots, coefficients = [], []
    for T in stops:
        advance(state, protocol, T, cvals)
        snapshots.append(reconstruct_field(state, x_grid))
        coefficients.append(state_coefficients(state))
    advance(state, protocol, grid.M, cvals)
    state.boundary_history[grid.M] = state.boundary_value()
    return Trajectory(geom, grid, N, times, state.boundary_history.copy(), cvals,
                      snapshots, coefficients, state)
