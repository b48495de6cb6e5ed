import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from deltabox.core import BoxGeometry, SpatialGrid, TangentDivergent, eigenmode, trapezoid
from deltabox.errors import ConfigurationError, DomainError
from deltabox.observables import (SIDE_GROUNDS, SYMMETRIC_SPLIT, WIDER_SIDE_GROUND, adiabatic_decomposition,
                                  adiabatic_target, density_distance, energy, norm, side_probabilities,
                                  sub_box_mode, wavefunction_distance)
from deltabox.volterra import ModeCoefficients, WavefunctionSnapshot, mode_coefficients, run

G = BoxGeometry()
X = SpatialGrid(1.0, 1025).points


def snap(psi, x=X, t=0.0):
    return WavefunctionSnapshot(t, x, np.asarray(psi, dtype=complex))


def test_ground_state_energy_and_norm():
    s = snap(eigenmode(G, 1, X))
    c = mode_coefficients(s, 64)
    e = energy(c, s.psi[X.size // 2], 0.0, G)
    assert e.total == pytest.approx(math.pi**2 / 4, rel=1e-10)
    assert e.potential == 0
    assert norm(s) == pytest.approx(1.0, abs=1e-12)
    assert norm(c) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(TypeError):
        norm(np.ones(3))


def test_excited_state_feels_no_barrier():
    s = snap(eigenmode(G, 2, X))
    c = mode_coefficients(s, 64)
    e = energy(c, eigenmode(G, 2, 0.0), 1e4, G)
    assert e.potential == 0
    assert e.total == pytest.approx(4 * G.k**2, rel=1e-10)


def test_energy_components_signs():
    c = ModeCoefficients(np.array([0.6, 0.8j]), 0.0)
    e = energy(c, 0.3 + 0.1j, 2.0, G)
    assert e.kinetic == pytest.approx(0.36 * G.k**2 + 0.64 * 4 * G.k**2)
    assert e.potential == pytest.approx(2 * 2.0 * 0.1)
    assert e.total == e.kinetic + e.potential


def test_initial_state_overlap_with_split_target():
    s = snap(eigenmode(G, 1, X))
    d = adiabatic_decomposition(s, SYMMETRIC_SPLIT, G)
    # int |sin 2kx| cos kx dx over [-1, 1] = 8 / (3 pi); the kinks cost O(h^2) in the trapezoid rule
    exact, _ = quad(lambda x: abs(math.sin(2 * G.k * x)) * math.cos(G.k * x), -1, 1, points=[0.0])
    assert exact == pytest.approx(8 / (3 * math.pi), rel=1e-12)
    assert d.a_par_sq == pytest.approx(exact**2, abs=1e-5)
    assert d.a_par_sq + d.a_perp_sq == pytest.approx(1.0, abs=1e-12)


def test_target_itself_has_no_perpendicular_part():
    f = adiabatic_target(SYMMETRIC_SPLIT, G, X)[0]
    assert adiabatic_decomposition(snap(f), SYMMETRIC_SPLIT, G).a_perp_sq == pytest.approx(0, abs=1e-12)
    assert adiabatic_decomposition(snap(1j * f), f).a_perp_sq == pytest.approx(0, abs=1e-12)


def test_targets_for_offset_barrier():
    g = BoxGeometry(x0=0.3)
    with pytest.raises(ConfigurationError):
        adiabatic_target(SYMMETRIC_SPLIT, g, X)
    with pytest.raises(ConfigurationError):
        adiabatic_target("nope", g, X)
    (wide,) = adiabatic_target(WIDER_SIDE_GROUND, g, X)
    assert np.all(wide[X > 0.3] == 0) and trapezoid(wide**2, X) == pytest.approx(1.0)
    left, right = adiabatic_target(SIDE_GROUNDS, g, X)
    assert trapezoid(left * right, X) == 0


@settings(max_examples=40, deadline=None)
@given(coeffs=st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False),
                       min_size=1, max_size=8).filter(lambda c: sum(abs(z) ** 2 for z in c) > 1e-3),
       x0=st.floats(-0.8, 0.8))
def test_decomposition_is_complete(coeffs, x0):
    g = BoxGeometry(x0=x0)
    psi = sum(z * eigenmode(g, m + 1, X) for m, z in enumerate(coeffs))
    psi = psi / math.sqrt(trapezoid(np.abs(psi) ** 2, X))
    for kind in (WIDER_SIDE_GROUND, SIDE_GROUNDS):
        d = adiabatic_decomposition(snap(psi), kind, g)
        assert d.a_par_sq + d.a_perp_sq == pytest.approx(1.0, abs=1e-6)
        assert -1e-12 <= d.a_perp_sq <= 1 + 1e-12


def test_unnormalised_target_rejected():
    f = 2 * eigenmode(G, 1, X)
    with pytest.raises(ConfigurationError, match="normalised"):
        adiabatic_decomposition(snap(eigenmode(G, 1, X)), f)
    with pytest.raises(ConfigurationError):
        adiabatic_decomposition(snap(eigenmode(G, 1, X)), f[:-1])


def test_symmetric_state_sides_balance():
    p = side_probabilities(snap(eigenmode(G, 1, X)), G)
    assert p.ratio == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(x0=st.floats(-0.99, 0.99), m=st.integers(1, 6))
def test_side_probabilities_add_up(x0, m):
    g = BoxGeometry(x0=x0)
    p = side_probabilities(snap(eigenmode(g, m, X)), g)
    assert p.p_left + p.p_right == pytest.approx(1.0, abs=1e-6)
    assert 0 <= p.p_left <= 1


def test_side_probability_of_a_sub_box_mode():
    g = BoxGeometry(x0=0.3)
    p = side_probabilities(snap(sub_box_mode(g, "left", 1, X)), g)
    assert p.p_left == pytest.approx(1.0, abs=1e-7) and p.ratio > 1e6


def test_barrier_outside_grid():
    x = np.linspace(-1, -0.5, 101)
    with pytest.raises(DomainError):
        side_probabilities(snap(np.sin(x), x), BoxGeometry(x0=0.2))


def test_distances():
    a = snap(eigenmode(G, 1, X))
    assert density_distance(a, a) == 0 and wavefunction_distance(a, a) == 0
    b = snap(-eigenmode(G, 1, X))
    assert density_distance(a, b) == 0
    assert wavefunction_distance(a, b) == pytest.approx(2.0, rel=1e-9)
    coarse = snap(eigenmode(G, 1, X[::2]), X[::2])
    with pytest.raises(ConfigurationError):
        density_distance(a, coarse)
    with pytest.raises(ConfigurationError):
        density_distance(a, np.ones(5))
    with pytest.raises(ConfigurationError):
        wavefunction_distance(a, coarse)


def test_parseval_at_default_resolution(default_run):
    _, tr = default_run
    for s, c in zip(tr.snapshots, tr.coefficients):
        assert abs(norm(s) - norm(c)) < 1e-4


def test_truncated_run_flags_norm_error():
    p = TangentDivergent.for_box(G)
    tr = run(G, p, N=4, snapshot_times=np.linspace(0, p.horizon, 11))
    assert max(abs(norm(c) - 1) for c in tr.coefficients) > 1e-3


def test_slow_symmetric_insertion_reaches_excited_energy(default_run):
    _, tr = default_run
    c = tr.coefficients[-1]
    e = energy(c, tr.boundary[-1], tr.strength[-1], G)
    assert e.total == pytest.approx(4 * G.k**2, rel=0.05)
    assert e.kinetic >= 0 and e.potential >= 0


def test_energy_falls_as_insertion_slows():
    totals = []
    for ts in (0.08 / math.pi, 0.8 / math.pi, 8 / math.pi):
        p = TangentDivergent(ts)
        tr = run(G, p, snapshot_times=[p.horizon])
        totals.append(energy(tr.coefficients[-1], tr.boundary[-1], tr.strength[-1], G).total)
    assert totals[0] > totals[1] > totals[2]


def test_offset_barrier_asymmetry_grows_with_slower_insertion():
    g = BoxGeometry(x0=0.1)
    ratios = []
    for ts in (0.08 / math.pi, 0.8 / math.pi, 8 / math.pi):
        p = TangentDivergent(ts)
        tr = run(g, p, snapshot_times=[p.horizon])
        ratios.append(side_probabilities(tr.snapshots[-1], g).ratio)
    assert ratios[0] < ratios[1] < ratios[2]
    assert 1 < ratios[2] < 30
