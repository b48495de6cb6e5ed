"""Few-mode approximations of ``psi(0, t)`` for a barrier inserted at the centre.

Keeping the ``m`` lowest cosine modes ``2 mu + 1`` (``mu < m``) turns the
integral equation into ``m`` coupled first-order ODEs for the driven-mode
amplitudes

    dg_mu/dt = -i (2 mu + 1)^2 k^2 g_mu + (2i / L) c(t) psi(0, t),
    psi(0, t) = L^{-1/2} e^{-i k^2 t} - sum_mu g_mu,

integrated with the second-order (midpoint) Runge-Kutta rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BoxGeometry, Protocol, TimeGrid
from .errors import ConfigurationError, InstabilityError

DEFAULT_RK2_STEPS = 100_000


def _require_symmetric(geom: BoxGeometry) -> None:
    if geom.x0 != 0 or geom.n != 1:
        raise ConfigurationError("few-mode approximations need x0 = 0 and a ground-state start (n = 1)")


@dataclass
class TruncatedModeTrace:
    m: int
    t: np.ndarray
    psi0: np.ndarray
    g: np.ndarray  # shape (len(t), m)


def single_mode_psi0(protocol: Protocol, geom: BoxGeometry, t):
    """Closed-form lowest-mode result: only the phase of ``psi(0, t)`` responds to ``c(t)``."""
    _require_symmetric(geom)
    t = np.asarray(t, dtype=float)
    phase = geom.k**2 * t + (2.0 / geom.L) * np.asarray(protocol.integral(t))
    out = np.exp(-1j * phase) / math.sqrt(geom.L)
    return complex(out) if out.ndim == 0 else out


def default_grid(protocol: Protocol, horizon: float | None = None) -> TimeGrid:
    horizon = horizon if horizon is not None else protocol.horizon
    if horizon is None:
        raise ConfigurationError("protocol has no natural horizon; pass one")
    return TimeGrid(horizon, DEFAULT_RK2_STEPS)


def integrate_truncated(m: int, protocol: Protocol, geom: BoxGeometry,
                        grid: TimeGrid | None = None) -> TruncatedModeTrace:
    """RK2 integration of the ``m``-mode system over ``grid``."""
    _require_symmetric(geom)
    if m < 1:
        raise ConfigurationError("need at least one mode")
    grid = grid or default_grid(protocol)
    k2, L = geom.k**2, geom.L
    omega = (2 * np.arange(m) + 1) ** 2 * k2
    amp = 1.0 / math.sqrt(L)
    bound = 10.0 / L

    def psi_of(g, t):
        return amp * np.exp(-1j * k2 * t) - g.sum()

    def rhs(g, t, c):
        return -1j * omega * g + (2j / L) * c * psi_of(g, t)

    h = grid.eps
    times = grid.times
    c_start = np.asarray(protocol(times), dtype=float)
    c_mid = np.asarray(protocol(times[:-1] + 0.5 * h), dtype=float)
    g = np.zeros(m, dtype=complex)
    G = np.empty((times.size, m), dtype=complex)
    psi = np.empty(times.size, dtype=complex)
    G[0], psi[0] = g, psi_of(g, 0.0)
    for i in range(grid.M):
        t = times[i]
        k1 = h * rhs(g, t, c_start[i])
        g = g + h * rhs(g + 0.5 * k1, t + 0.5 * h, c_mid[i])
        G[i + 1] = g
        psi[i + 1] = psi_of(g, times[i + 1])
        if abs(psi[i + 1]) ** 2 > bound:
            raise InstabilityError(f"RK2 amplitude grew past {bound:.3g} at t={times[i + 1]:.6g}; reduce the step")
    return TruncatedModeTrace(m, times, psi, G)


def integrate_two_mode_scalar(protocol: Protocol, geom: BoxGeometry,
                              grid: TimeGrid | None = None) -> tuple[np.ndarray, np.ndarray]:
    """RK2 integration of the second-order scalar two-mode ODE for ``psi(0, t)``.

    Uses the analytic ``c_t``. Returns ``(t, psi0)``; used to cross-check
    :func:`integrate_truncated` with ``m = 2``.
    """
    _require_symmetric(geom)
    grid = grid or default_grid(protocol)
    k, L = geom.k, geom.L
    pi = math.pi

    def rhs(y, t):
        c = protocol(t)
        ct = protocol.derivative(t)
        psi, dpsi = y
        ddpsi = -((10j * pi * k**2 + 8j * k * c) * dpsi
                  + (-9 * pi * k**4 - 40 * k**3 * c + 8j * k * ct) * psi) / pi
        return np.array([dpsi, ddpsi])

    amp = 1.0 / math.sqrt(L)
    c0 = protocol(0.0)
    y = np.array([amp, -1j * k**2 * amp - 2 * (2j / L) * c0 * amp], dtype=complex)
    h = grid.eps
    times = grid.times
    out = np.empty(times.size, dtype=complex)
    out[0] = y[0]
    for i in range(grid.M):
        t = times[i]
        k1 = h * rhs(y, t)
        y = y + h * rhs(y + 0.5 * k1, t + 0.5 * h)
        out[i + 1] = y[0]
    return times, out


def asymptotic_phase_velocity(c: float, geom: BoxGeometry) -> float:
    """Two-mode phase velocity of ``psi(0, t)`` at constant ``c`` with no amplitude decay."""
    from .design import amplitude_decay_phase

    return amplitude_decay_phase(0.0, c, geom)


def truncation_errors(full_t: np.ndarray, full_psi0: np.ndarray, traces) -> dict[int, float]:
    """Sup-norm gap between ``|psi_m(0,t)|^2`` and the full solution, per trace.

    ``traces`` maps ``m`` to ``(t, psi0)``; the full solution is linearly
    interpolated onto each trace's times.
    """
    dens = np.abs(full_psi0) ** 2
    out = {}
    for m, (t, psi0) in sorted(traces.items()):
        ref = np.interp(t, full_t, dens)
        out[m] = float(np.max(np.abs(np.abs(psi0) ** 2 - ref)))
    return out
