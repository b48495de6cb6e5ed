"""Box geometry, eigenmodes, barrier-strength protocols and the convolution kernel.

Units are dimensionless: the Hamiltonian is ``-d^2/dx^2 + 2 c(t) delta(x - x0)``
on the box ``[-L, L]`` with hard walls, so the unperturbed energies are
``m^2 k^2`` with ``k = pi / (2 L)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError, DomainError, InterpolationError

__all__ = [
    "BoxGeometry",
    "Protocol",
    "TangentDivergent",
    "Linear",
    "Constant",
    "Table",
    "Reversed",
    "TimeGrid",
    "SpatialGrid",
    "eigenmode",
    "eigenenergy",
    "kernel_coeff",
    "protocol_value",
    "trapezoid",
]


@dataclass(frozen=True)
class BoxGeometry:
    """Box ``[-L, L]`` with a barrier at ``x0`` and initial eigenmode ``n``."""

    L: float = 1.0
    x0: float = 0.0
    n: int = 1

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError(f"box half-width must be positive, got L={self.L}")
        if not -self.L < self.x0 < self.L:
            raise DomainError(f"barrier position x0={self.x0} outside (-L, L)")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"initial mode index must be a positive integer, got {self.n}")

    @property
    def k(self) -> float:
        return math.pi / (2.0 * self.L)

    @property
    def t_star(self) -> float:
        """Divergence time ``2 pi / k^2`` of the standard ``tan(k^2 t / 4)`` protocol."""
        return 2.0 * math.pi / self.k**2

    @property
    def left_length(self) -> float:
        return self.L + self.x0

    @property
    def right_length(self) -> float:
        return self.L - self.x0


def eigenmode(geom: BoxGeometry, m, x):
    """Barrier-free box eigenfunction ``phi_m(x)``.

    ``L^{-1/2} cos(m k x)`` for odd ``m`` and ``L^{-1/2} sin(m k x)`` for even
    ``m``. Broadcasts over ``m`` and ``x``.
    """
    m_arr = np.asarray(m)
    x_arr = np.asarray(x, dtype=float)
    if np.any(m_arr < 1):
        raise DomainError("mode index must be >= 1")
    if np.any(np.abs(x_arr) > geom.L * (1 + 1e-12)):
        raise DomainError("position outside the box")
    arg = m_arr * geom.k * x_arr
    out = np.where(m_arr % 2 == 1, np.cos(arg), np.sin(arg)) / math.sqrt(geom.L)
    # cos((odd) * pi / 2) is only ~1e-17 in floating point; pin the walls.
    out = np.where(np.abs(x_arr) >= geom.L, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def eigenenergy(geom: BoxGeometry, m):
    return np.asarray(m, dtype=float) ** 2 * geom.k**2


def kernel_coeff(geom: BoxGeometry, nu, x):
    """Time-independent prefactor of the convolution kernel ``f_nu(x, t)``.

    The full kernel is ``kernel_coeff(nu, x) * exp(-i nu^2 k^2 t)``. The branch
    for ``x >= x0`` and the branch for ``x < x0`` coincide at the barrier.
    """
    nu_arr = np.asarray(nu)
    x_arr = np.asarray(x, dtype=float)
    if np.any(nu_arr < 1):
        raise DomainError("kernel mode index must be >= 1")
    if np.any(np.abs(x_arr) > geom.L * (1 + 1e-12)):
        raise DomainError("position outside the box")
    k, L, x0 = geom.k, geom.L, geom.x0
    sign = np.where(nu_arr % 2 == 0, 1.0, -1.0)
    pref = np.exp(-1j * nu_arr * k * (x_arr + x0)) / (2j * L)
    right = (sign - np.exp(2j * nu_arr * k * x_arr)) * (np.exp(2j * nu_arr * k * (L + x0)) - 1.0)
    left = (sign - np.exp(2j * nu_arr * k * x0)) * (np.exp(2j * nu_arr * k * (L + x_arr)) - 1.0)
    out = pref * np.where(x_arr >= x0, right, left)
    # The bracket factors vanish at the walls only up to rounding of e^{i nu pi}.
    out = np.where(np.abs(x_arr) >= L, 0.0, out)
    if out.ndim == 0:
        return complex(out)
    return out


def trapezoid(y, x):
    """Trapezoid rule along the last axis (thin wrapper, complex-safe)."""
    return np.trapezoid(y, x, axis=-1)


# --------------------------------------------------------------------------- protocols


class Protocol:
    """Barrier strength schedule ``c(t)``.

    Subclasses implement ``_value``, ``_integral`` (``int_0^t c``) and
    ``_derivative``. Calling the protocol evaluates ``c(t)``; arrays broadcast.
    """

    #: simulated horizon, ``None`` when the protocol does not fix one
    horizon: float | None = None

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("protocols are defined for t >= 0")
        return t

    def __call__(self, t):
        t = self._check(t)
        out = self._value(t)
        if not np.all(np.isfinite(out)):
            raise DivergenceError(f"protocol {self!r} is not finite on the requested times")
        return float(out) if out.ndim == 0 else out

    def integral(self, t):
        t = self._check(t)
        out = self._integral(t)
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, t):
        t = self._check(t)
        out = self._derivative(t)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TangentDivergent(Protocol):
    """``c(t) = tan(pi t / (2 t_star))``, divergent at ``t_star``.

    With ``t_star = 2 pi / k^2`` this is ``tan(k^2 t / 4)``.
    """

    t_star: float
    cap_fraction: float = 0.99

    def __post_init__(self):
        if not self.t_star > 0:
            raise ConfigurationError("t_star must be positive")
        if not 0 < self.cap_fraction < 1:
            raise ConfigurationError("cap_fraction must lie in (0, 1)")

    @classmethod
    def for_box(cls, geom: BoxGeometry, cap_fraction: float = 0.99) -> TangentDivergent:
        return cls(geom.t_star, cap_fraction)

    @property
    def horizon(self) -> float:
        return self.cap_fraction * self.t_star

    def _phase(self, t):
        if np.any(t >= self.t_star):
            raise DivergenceError(f"tan protocol diverges at t_star={self.t_star}")
        return 0.5 * np.pi * t / self.t_star

    def _value(self, t):
        return np.tan(self._phase(t))

    def _integral(self, t):
        return -(2.0 * self.t_star / np.pi) * np.log(np.cos(self._phase(t)))

    def _derivative(self, t):
        return (0.5 * np.pi / self.t_star) / np.cos(self._phase(t)) ** 2

    def time_at_strength(self, c: float) -> float:
        """Time at which the barrier strength first reaches ``c``."""
        return 2.0 * self.t_star / np.pi * math.atan(c)


@dataclass(frozen=True)
class Linear(Protocol):
    c0: float

    def _value(self, t):
        return self.c0 * t

    def _integral(self, t):
        return 0.5 * self.c0 * t**2

    def _derivative(self, t):
        return np.full_like(t, self.c0)


@dataclass(frozen=True)
class Constant(Protocol):
    c: float

    def _value(self, t):
        return np.full_like(t, self.c)

    def _integral(self, t):
        return self.c * t

    def _derivative(self, t):
        return np.zeros_like(t)


@dataclass(frozen=True)
class Table(Protocol):
    """Piecewise-linear protocol through ``(time, strength)`` points; no extrapolation."""

    times: tuple[float, ...]
    values: tuple[float, ...]
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _c: np.ndarray = field(init=False, repr=False, compare=False)
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        c = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != c.shape or t.size < 2:
            raise ConfigurationError("table protocol needs >= 2 matching (time, value) points")
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("table protocol times must be strictly increasing")
        if not np.all(np.isfinite(c)):
            raise ConfigurationError("table protocol values must be finite")
        if t[0] > 0:
            raise ConfigurationError("table protocol must start at t <= 0")
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (c[1:] + c[:-1]) * np.diff(t))])
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_c", c)
        object.__setattr__(self, "_cum", cum)

    @property
    def horizon(self) -> float:
        return float(self._t[-1])

    def _inside(self, t):
        if np.any(t > self._t[-1] * (1 + 1e-12)) or np.any(t < self._t[0]):
            raise DomainError("table protocol evaluated outside its time range")

    def _value(self, t):
        self._inside(t)
        return np.interp(t, self._t, self._c)

    def _from_first_node(self, t):
        i = np.clip(np.searchsorted(self._t, t, side="right") - 1, 0, self._t.size - 2)
        dt = t - self._t[i]
        slope = (self._c[i + 1] - self._c[i]) / (self._t[i + 1] - self._t[i])
        return self._cum[i] + self._c[i] * dt + 0.5 * slope * dt**2

    def _integral(self, t):
        self._inside(t)
        return self._from_first_node(t) - self._from_first_node(np.float64(0.0))

    def _derivative(self, t):
        self._inside(t)
        i = np.clip(np.searchsorted(self._t, t, side="right") - 1, 0, self._t.size - 2)
        return (self._c[i + 1] - self._c[i]) / (self._t[i + 1] - self._t[i])


@dataclass(frozen=True)
class Reversed(Protocol):
    """``c(t_split - t)``: the schedule that removes the barrier again."""

    base: Protocol
    t_split: float

    @property
    def horizon(self) -> float:
        return self.t_split

    def _flip(self, t):
        if np.any(t > self.t_split * (1 + 1e-12)):
            raise DomainError("reversed protocol evaluated beyond its split time")
        return np.clip(self.t_split - t, 0.0, None)

    def _value(self, t):
        return np.asarray(self.base(self._flip(t)), dtype=float)

    def _integral(self, t):
        s = self._flip(t)
        return self.base.integral(self.t_split) - np.asarray(self.base.integral(s))

    def _derivative(self, t):
        return -np.asarray(self.base.derivative(self._flip(t)))


def protocol_value(p: Protocol, t):
    return p(t)


# --------------------------------------------------------------------------- grids


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ConfigurationError(f"time grid needs M >= 1 steps, got {self.M}")
        if not self.horizon > 0:
            raise ConfigurationError("time horizon must be positive")

    @property
    def eps(self) -> float:
        return self.horizon / self.M

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.eps

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Step index of ``t``; ``t`` has to coincide with a grid time."""
        T = int(round(t / self.eps))
        if T < 0 or T > self.M or abs(T * self.eps - t) > tol * max(1.0, abs(t)):
            raise InterpolationError(f"t={t} is not a grid time (eps={self.eps})")
        return T

    def nearest_index(self, t: float) -> int:
        return int(min(max(round(t / self.eps), 0), self.M))


@dataclass(frozen=True)
class SpatialGrid:
    L: float = 1.0
    J: int = 513

    def __post_init__(self):
        if self.J < 3:
            raise ConfigurationError("spatial grid needs at least 3 points")

    @property
    def points(self) -> np.ndarray:
        x = np.linspace(-self.L, self.L, self.J)
        x[0], x[-1] = -self.L, self.L
        return x

    @property
    def dx(self) -> float:
        return 2.0 * self.L / (self.J - 1)
