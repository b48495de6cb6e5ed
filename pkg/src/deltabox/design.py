"""Protocol design within the two-mode approximation.

Given a desired boundary evolution ``psi(0, t)``, the two-mode ODE is a linear
first-order equation for ``c(t)``; its solution is

    c(t) = i L e^{-5ik^2 t} / (4 psi(0,t)) * int_0^t e^{5ik^2 t'} D(t') dt'
           + c(0) psi(0,0) e^{-5ik^2 t} / psi(0,t),

with ``D = (d/dt + i k^2)(d/dt + 9 i k^2) psi(0, t)``. A physical protocol must
be real, so the imaginary part of the result is kept as a consistency signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import BoxGeometry
from .errors import ConfigurationError, SingularityError

SINGULARITY_THRESHOLD = 1e-6
REALNESS_TOLERANCE = 1e-3


# --------------------------------------------------------------------------- targets


@dataclass(frozen=True)
class Eigenmode:
    """Boundary value locked to one of the two retained cosine modes (``index`` 1 or 2)."""

    index: int = 1

    def __post_init__(self):
        if self.index not in (1, 2):
            raise ConfigurationError("two-mode design only knows cosine modes 1 and 2")

    def sample(self, t: np.ndarray, geom: BoxGeometry):
        w = (2 * self.index - 1) ** 2 * geom.k**2
        psi = np.exp(-1j * w * t) / math.sqrt(geom.L)
        return psi, -1j * w * psi, -(w**2) * psi


@dataclass(frozen=True)
class AmplitudeDecay:
    """``psi(0, t) = A0 exp(-lambda t + i phi(t))`` with the phase rate tied to ``c(t)``.

    The phase follows the two-mode quadratic (plus-sign root) evaluated on the
    linearised decay protocol, ``phi(0) = 0``.
    """

    A0: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not self.A0 > 0 or self.lam < 0:
            raise ConfigurationError("amplitude decay needs A0 > 0 and lambda >= 0")

    def sample(self, t: np.ndarray, geom: BoxGeometry):
        c = linearized_decay_protocol(self.lam, t, geom)
        ct = 3.0 * math.pi * geom.k * self.lam * np.exp(4.0 * self.lam * t)
        rate = amplitude_decay_phase(self.lam, c, geom)
        rate_t = _phase_rate_dc(self.lam, c, geom) * ct
        phase = np.concatenate([[0.0], cumulative_trapezoid(rate, t)]) if t.size > 1 else np.zeros(1)
        psi = self.A0 * np.exp(-self.lam * t + 1j * phase)
        s = -self.lam + 1j * rate
        return psi, s * psi, (s**2 + 1j * rate_t) * psi


@dataclass(frozen=True)
class Sampled:
    """Tabulated ``psi(0, t)``; missing derivatives come from central differences."""

    t: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray | None = None
    ddpsi: np.ndarray | None = None

    def sample(self, t: np.ndarray | None, geom: BoxGeometry):
        if t is not None and (t.shape != self.t.shape or not np.allclose(t, self.t)):
            raise ConfigurationError("sampled targets are evaluated on their own time grid")
        psi = np.asarray(self.psi, dtype=complex)
        dpsi = self.dpsi if self.dpsi is not None else np.gradient(psi, self.t, edge_order=2)
        ddpsi = self.ddpsi if self.ddpsi is not None else _second_derivative(psi, np.asarray(self.t, float))
        return psi, np.asarray(dpsi, dtype=complex), np.asarray(ddpsi, dtype=complex)


def _second_derivative(y, t):
    """Second-order accurate ``y''``; a three-point stencil on uniform grids."""
    h = np.diff(t)
    if y.size < 4 or np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
        return np.gradient(np.gradient(y, t, edge_order=2), t, edge_order=2)
    h = h[0]
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / h**2
    out[0] = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / h**2
    out[-1] = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / h**2
    return out


@dataclass
class DesignedProtocol:
    t: np.ndarray
    c: np.ndarray
    imag_residual: np.ndarray

    @property
    def consistent(self) -> bool:
        """True when the imaginary residual is negligible against the real part."""
        scale = max(float(np.max(np.abs(self.c))), 1.0)
        return float(np.max(np.abs(self.imag_residual))) <= REALNESS_TOLERANCE * scale


# --------------------------------------------------------------------------- inversion


def protocol_from_boundary(target, c0: float, geom: BoxGeometry, t: np.ndarray | None = None,
                           threshold: float = SINGULARITY_THRESHOLD) -> DesignedProtocol:
    """Protocol that steers ``psi(0, t)`` along ``target`` (two-mode approximation).

    ``t`` must start at 0; sampled targets carry their own times.
    """
    if isinstance(target, Sampled):
        t = np.asarray(target.t, dtype=float)
    elif t is None:
        raise ConfigurationError("analytic targets need an evaluation time grid")
    t = np.asarray(t, dtype=float)
    if t[0] != 0 or np.any(np.diff(t) <= 0):
        raise ConfigurationError("design time grid must start at 0 and increase")
    psi, dpsi, ddpsi = target.sample(None if isinstance(target, Sampled) else t, geom)
    small = np.abs(psi) < threshold
    if np.any(small):
        t_bad = float(t[np.argmax(small)])
        raise SingularityError(f"|psi(0,t)| < {threshold:g} at t={t_bad:.6g}", t_bad)

    k2 = geom.k**2
    drive = ddpsi + 10j * k2 * dpsi - 9 * k2**2 * psi
    integral = np.concatenate([[0.0], cumulative_trapezoid(np.exp(5j * k2 * t) * drive, t)])
    back = np.exp(-5j * k2 * t) / psi
    c = 0.25j * geom.L * back * integral + c0 * psi[0] * back
    return DesignedProtocol(t, c.real, c.imag)


# --------------------------------------------------------------------------- decaying amplitude


def amplitude_decay_phase(lam, c, geom: BoxGeometry):
    """Phase rate of ``psi(0, t)`` when its amplitude decays at rate ``lam`` under strength ``c``.

    Plus-sign root of the two-mode quadratic, so that ``lam -> 0, c = 0`` gives
    the ground-state rate ``-k^2``; ``c -> infinity`` tends to ``-5 k^2``.
    """
    k, pi = geom.k, math.pi
    c = np.asarray(c, dtype=float)
    lam = np.asarray(lam, dtype=float)
    # -b + sqrt(b^2 - 4ac) rewritten to avoid cancellation as c grows
    b = 10 * pi * k**2 + 8 * k * c
    root = np.sqrt(64 * pi**2 * k**4 + 64 * k**2 * c**2 + 4 * pi**2 * lam**2)
    num = root**2 - b**2  # = -4 pi (9 pi k^4 + 40 k^3 c - pi lam^2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(b > 0, num / (2 * pi * (root + b)), (root - b) / (2 * pi))
    return float(out) if out.ndim == 0 else out


def _phase_rate_dc(lam, c, geom: BoxGeometry):
    k, pi = geom.k, math.pi
    root = np.sqrt(64 * pi**2 * k**4 + 64 * k**2 * c**2 + 4 * pi**2 * lam**2)
    return (-8 * k + 64 * k**2 * c / root) / (2 * pi)


def linearized_decay_protocol(lam, t, geom: BoxGeometry):
    """Barrier strength producing amplitude decay rate ``lam``, to first order in ``lam`` and ``c``."""
    out = 0.75 * math.pi * geom.k * np.expm1(4.0 * np.asarray(lam) * np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def decay_equation_residuals(lam: float, t, geom: BoxGeometry):
    """Residuals of the published real/imaginary split of the two-mode ODE.

    Evaluated on the linearised protocol and the plus-sign phase rate. The first
    vanishes identically by construction; the second is ``O(lam^2)``. Note the
    second equation carries ``+2 pi lam phi_t``; substituting
    ``A0 e^{-lam t + i phi}`` into the ODE itself gives ``-2 pi lam phi_t``
    (see :func:`two_mode_residual`).
    """
    k, pi = geom.k, math.pi
    t = np.asarray(t, dtype=float)
    c = linearized_decay_protocol(lam, t, geom)
    ct = 3.0 * pi * k * lam * np.exp(4.0 * lam * t)
    rate = amplitude_decay_phase(lam, c, geom)
    rate_t = _phase_rate_dc(lam, c, geom) * ct
    quad = pi * rate**2 + (10 * pi * k**2 + 8 * k * c) * rate + 9 * pi * k**4 + 40 * k**3 * c - pi * lam**2
    lin = pi * rate_t + 2 * pi * lam * rate - 10 * pi * lam * k**2 - 8 * lam * k * c + 8 * k * ct
    return quad, lin


def two_mode_residual(lam: float, t, geom: BoxGeometry):
    """Complex residual of the scalar two-mode ODE, divided by ``psi``.

    The target is ``A0 e^{-lam t + i phi(t)}`` with the plus-sign phase rate,
    driven by :func:`linearized_decay_protocol`. The real part equals minus the
    quadratic residual; the imaginary part is ``O(lam)``.
    """
    k, pi = geom.k, math.pi
    t = np.asarray(t, dtype=float)
    c = linearized_decay_protocol(lam, t, geom)
    ct = 3.0 * pi * k * lam * np.exp(4.0 * lam * t)
    rate = amplitude_decay_phase(lam, c, geom)
    rate_t = _phase_rate_dc(lam, c, geom) * ct
    s = -lam + 1j * rate
    return (pi * (s**2 + 1j * rate_t) + (10j * pi * k**2 + 8j * k * c) * s
            - 9 * pi * k**4 - 40 * k**3 * c + 8j * k * ct)
