"""Diagnostics of snapshots: norm, energy, adiabatic overlap, which-side probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import BoxGeometry, trapezoid
from .errors import ConfigurationError, DomainError
from .volterra import ModeCoefficients, WavefunctionSnapshot

SYMMETRIC_SPLIT = "symmetric-split"
WIDER_SIDE_GROUND = "wider-side-ground"
SIDE_GROUNDS = "side-grounds"
TARGETS = (SYMMETRIC_SPLIT, WIDER_SIDE_GROUND, SIDE_GROUNDS)


@dataclass
class EnergyBreakdown:
    kinetic: float
    potential: float
    t: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential


@dataclass
class AdiabaticDecomposition:
    a_par_sq: float
    a_perp_sq: float
    target: str


@dataclass
class SideProbabilities:
    p_left: float
    p_right: float

    @property
    def ratio(self) -> float:
        return self.p_left / self.p_right if self.p_right > 0 else math.inf


def norm(obj) -> float:
    """``sum |sigma_m|^2`` for coefficients, trapezoid ``int |psi|^2`` for snapshots."""
    if isinstance(obj, ModeCoefficients):
        return obj.norm
    if isinstance(obj, WavefunctionSnapshot):
        return obj.norm
    raise TypeError(f"cannot take the norm of {type(obj).__name__}")


def energy(coeffs: ModeCoefficients, psi_at_barrier: complex, c: float, geom: BoxGeometry) -> EnergyBreakdown:
    """Kinetic part from the mode populations, potential part ``2 c |psi(x0)|^2``."""
    kinetic = float(np.sum(coeffs.modes**2 * geom.k**2 * np.abs(coeffs.sigma) ** 2))
    return EnergyBreakdown(kinetic, 2.0 * c * abs(psi_at_barrier) ** 2, coeffs.t)


# --------------------------------------------------------------------------- adiabatic overlap


def sub_box_mode(geom: BoxGeometry, side: str, m, x):
    """Normalised ``m``-th sine mode of the left ``[-L, x0]`` or right ``[x0, L]`` sub-box, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    m = np.asarray(m)
    if side == "left":
        length = geom.left_length
        inside = x <= geom.x0
        arg = m * math.pi * (x + geom.L) / length
    elif side == "right":
        length = geom.right_length
        inside = x >= geom.x0
        arg = m * math.pi * (geom.L - x) / length
    else:
        raise ConfigurationError(f"unknown side {side!r}")
    return np.where(inside, math.sqrt(2.0 / length) * np.sin(arg), 0.0)


def adiabatic_target(kind: str, geom: BoxGeometry, x: np.ndarray) -> list[np.ndarray]:
    """Orthonormal (by quadrature on ``x``) functions spanning the adiabatic end state.

    ``symmetric-split``: ``|sin 2kx| / sqrt(L)``, the centred-barrier limit.
    ``wider-side-ground``: ground mode of the wider sub-box.
    ``side-grounds``: ground modes of both sub-boxes, compared side by side.
    """
    if kind == SYMMETRIC_SPLIT:
        if geom.x0 != 0:
            raise ConfigurationError("the symmetric-split target needs x0 = 0")
        funcs = [np.abs(np.sin(2 * geom.k * x)) / math.sqrt(geom.L)]
    elif kind == WIDER_SIDE_GROUND:
        side = "left" if geom.x0 >= 0 else "right"
        funcs = [sub_box_mode(geom, side, 1, x)]
    elif kind == SIDE_GROUNDS:
        funcs = [sub_box_mode(geom, "left", 1, x), sub_box_mode(geom, "right", 1, x)]
    else:
        raise ConfigurationError(f"unknown adiabatic target {kind!r}; choose from {TARGETS}")
    return [f / math.sqrt(trapezoid(f**2, x)) for f in funcs]


def adiabatic_decomposition(snapshot: WavefunctionSnapshot, target, geom: BoxGeometry | None = None
                            ) -> AdiabaticDecomposition:
    """Split ``snapshot`` into the part along the adiabatic target and the rest.

    ``target`` is a target name or an explicit normalised array on the
    snapshot grid. Only the modulus of the overlap enters, so global phases
    are irrelevant. The snapshot is normalised by its quadrature norm first.
    """
    x = snapshot.x
    if isinstance(target, str):
        geom = geom or BoxGeometry(L=snapshot.L)
        funcs, label = adiabatic_target(target, geom, x), target
    else:
        f = np.asarray(target)
        if f.shape != x.shape:
            raise ConfigurationError("target array does not match the snapshot grid")
        if abs(trapezoid(np.abs(f) ** 2, x) - 1.0) > 1e-3:
            raise ConfigurationError("adiabatic target is not normalised")
        funcs, label = [f], "custom"
    nrm = snapshot.norm
    a_par = sum(abs(trapezoid(np.conj(f) * snapshot.psi, x)) ** 2 for f in funcs) / nrm
    return AdiabaticDecomposition(float(a_par), float(1.0 - a_par), label)


# --------------------------------------------------------------------------- which side


def side_probabilities(snapshot: WavefunctionSnapshot, geom: BoxGeometry) -> SideProbabilities:
    """Probabilities left and right of the barrier.

    The cumulative trapezoid integral is interpolated linearly at ``x0``, so
    the grid cell containing the barrier is shared between the two sides.
    """
    x = snapshot.x
    if not x[0] <= geom.x0 <= x[-1]:
        raise DomainError("barrier position outside the snapshot grid")
    cum = np.concatenate([[0.0], cumulative_trapezoid(snapshot.density, x)])
    total = cum[-1]
    left = float(np.interp(geom.x0, x, cum))
    return SideProbabilities(left / total, (total - left) / total)


def density_distance(a: WavefunctionSnapshot, b) -> float:
    """L2 distance between ``|psi_a|^2`` and a reference density (snapshot or array)."""
    ref = b.density if isinstance(b, WavefunctionSnapshot) else np.asarray(b, dtype=float)
    if isinstance(b, WavefunctionSnapshot) and (b.x.shape != a.x.shape or not np.allclose(a.x, b.x)):
        raise ConfigurationError("snapshots live on different grids")
    if ref.shape != a.x.shape:
        raise ConfigurationError("reference density does not match the snapshot grid")
    return float(math.sqrt(trapezoid((a.density - ref) ** 2, a.x)))


def wavefunction_distance(a: WavefunctionSnapshot, b: WavefunctionSnapshot) -> float:
    """L2 distance between the complex wave functions (phase sensitive)."""
    if b.x.shape != a.x.shape or not np.allclose(a.x, b.x):
        raise ConfigurationError("snapshots live on different grids")
    return float(math.sqrt(trapezoid(np.abs(a.psi - b.psi) ** 2, a.x)))
