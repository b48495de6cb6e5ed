"""After the split: sub-box spectral evolution, the phi_2 superposition, and time reversal."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BoxGeometry, eigenmode, trapezoid
from .errors import ConfigurationError, ResolutionError
from .observables import side_probabilities, sub_box_mode
from .volterra import WavefunctionSnapshot

DEFAULT_SUBMODES = 64
DEFAULT_T0_SAMPLES = 256
PROJECTION_TOLERANCE = 1e-3


@dataclass
class SubBoxSpectrum:
    side: str
    length: float
    coeffs: np.ndarray

    @property
    def energies(self) -> np.ndarray:
        m = np.arange(1, self.coeffs.size + 1)
        return (m * math.pi / self.length) ** 2


def project_sub_boxes(snapshot: WavefunctionSnapshot, geom: BoxGeometry, n_modes: int = DEFAULT_SUBMODES
                      ) -> tuple[SubBoxSpectrum, SubBoxSpectrum, float]:
    """Sine-mode projections on each side of an impenetrable barrier, plus the lost norm fraction."""
    x = snapshot.x
    m = np.arange(1, n_modes + 1)[:, None]
    out = []
    for side, length in (("left", geom.left_length), ("right", geom.right_length)):
        basis = sub_box_mode(geom, side, m, x[None, :])
        if np.count_nonzero(basis[0]) < 2 * n_modes:
            raise ResolutionError(f"{side} sub-box has too few grid points for {n_modes} modes")
        out.append(SubBoxSpectrum(side, length, trapezoid(basis * snapshot.psi[None, :], x)))
    captured = sum(np.sum(np.abs(s.coeffs) ** 2) for s in out)
    residual = 1.0 - captured / snapshot.norm
    return out[0], out[1], float(residual)


def synthesize(spectra, geom: BoxGeometry, x: np.ndarray) -> np.ndarray:
    psi = np.zeros(x.size, dtype=complex)
    for s in spectra:
        m = np.arange(1, s.coeffs.size + 1)[:, None]
        psi += s.coeffs @ sub_box_mode(geom, s.side, m, x[None, :])
    return psi


def spectral_evolve(snapshot: WavefunctionSnapshot, geom: BoxGeometry, dt: float,
                    n_modes: int = DEFAULT_SUBMODES, tolerance: float = PROJECTION_TOLERANCE
                    ) -> WavefunctionSnapshot:
    """Evolve by ``dt`` with the barrier treated as an infinite wall."""
    left, right, residual = project_sub_boxes(snapshot, geom, n_modes)
    if residual > tolerance:
        raise ResolutionError(f"sub-box projection loses {residual:.3g} of the norm")
    for s in (left, right):
        s.coeffs = s.coeffs * np.exp(-1j * s.energies * dt)
    return WavefunctionSnapshot(snapshot.t + dt, snapshot.x, synthesize((left, right), geom, snapshot.x),
                                snapshot.L)


def spectral_trajectory(snapshot: WavefunctionSnapshot, geom: BoxGeometry, times,
                        n_modes: int = DEFAULT_SUBMODES) -> list[WavefunctionSnapshot]:
    """Snapshots at ``snapshot.t + times`` from a single projection."""
    left, right, residual = project_sub_boxes(snapshot, geom, n_modes)
    if residual > PROJECTION_TOLERANCE:
        raise ResolutionError(f"sub-box projection loses {residual:.3g} of the norm")
    out = []
    for dt in times:
        spectra = [SubBoxSpectrum(s.side, s.length, s.coeffs * np.exp(-1j * s.energies * dt))
                   for s in (left, right)]
        out.append(WavefunctionSnapshot(snapshot.t + dt, snapshot.x, synthesize(spectra, geom, snapshot.x),
                                        snapshot.L))
    return out


# --------------------------------------------------------------------------- superposition


@dataclass
class SuperposedState:
    """``Psi = (psi + phi_2 e^{-4ik^2 (t - t0)}) / sqrt(2)`` sampled at the trajectory times."""

    t0: float
    snapshots: list[WavefunctionSnapshot]
    weight: float = 1.0 / math.sqrt(2.0)


def _first_excited(geom: BoxGeometry, x, t, t0):
    return eigenmode(geom, 2, x) * np.exp(-4j * geom.k**2 * (t - t0))


def superpose(snapshots, geom: BoxGeometry, t0: float) -> SuperposedState:
    w = 1.0 / math.sqrt(2.0)
    out = [WavefunctionSnapshot(s.t, s.x, w * (s.psi + _first_excited(geom, s.x, s.t, t0)), s.L)
           for s in snapshots]
    return SuperposedState(t0, out, w)


def build_superposition(snapshots, geom: BoxGeometry, t_eval: float | None = None,
                        samples: int = DEFAULT_T0_SAMPLES) -> SuperposedState:
    """Choose ``t0`` so the left half is emptied at ``t_eval`` (default: last snapshot).

    ``t0`` is scanned over one period ``2 pi / (4 k^2)`` of the ``phi_2`` phase.
    """
    if geom.x0 != 0:
        raise ConfigurationError("the phi_2 superposition needs the barrier at the node x0 = 0")
    snapshots = list(snapshots)
    ref = snapshots[-1] if t_eval is None else min(snapshots, key=lambda s: abs(s.t - t_eval))
    period = 2.0 * math.pi / (4.0 * geom.k**2)
    t0s = np.arange(samples) * period / samples
    x = ref.x
    left = x <= geom.x0
    phi2 = eigenmode(geom, 2, x)
    # density of Psi on the left as a function of t0, all candidates at once
    cand = (ref.psi[None, :] + phi2[None, :] * np.exp(-4j * geom.k**2 * (ref.t - t0s))[:, None]) / math.sqrt(2)
    dens = np.abs(cand) ** 2
    p_left = trapezoid(np.where(left, dens, 0.0), x)
    best = float(t0s[int(np.argmin(p_left))])
    return superpose(snapshots, geom, best)


def left_probabilities(snapshots, geom: BoxGeometry) -> np.ndarray:
    return np.array([side_probabilities(s, geom).p_left for s in snapshots])


# --------------------------------------------------------------------------- time reversal


def time_reverse(snapshots, t_split: float, rtol: float = 1e-9) -> list[WavefunctionSnapshot]:
    """``Psi^T(x, t) = conj Psi(x, t_split - t)`` on the recorded grid, ascending in ``t``."""
    snapshots = sorted(snapshots, key=lambda s: s.t)
    t = np.array([s.t for s in snapshots])
    if t.size >= 2:
        dt = np.diff(t)
        if np.max(np.abs(dt - dt[0])) > rtol * max(dt[0], 1e-300) * 1e3:
            raise ConfigurationError("time reversal needs a uniform recording grid")
    if t.size and (t[-1] > t_split * (1 + rtol) + 1e-12):
        raise ConfigurationError("recorded times extend beyond the split time")
    return [WavefunctionSnapshot(t_split - s.t, s.x, np.conj(s.psi), s.L) for s in reversed(snapshots)]
