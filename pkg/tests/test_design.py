import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltabox.core import BoxGeometry, TangentDivergent, TimeGrid
from deltabox.design import (AmplitudeDecay, Eigenmode, Sampled, amplitude_decay_phase,
                             decay_equation_residuals, linearized_decay_protocol, protocol_from_boundary,
                             two_mode_residual)
from deltabox.errors import ConfigurationError, SingularityError
from deltabox.modes import integrate_truncated

G = BoxGeometry()
T = np.linspace(0, 2.0, 4001)


def quadratic_root(lam, c, k):
    """Larger root of pi p^2 + (10 pi k^2 + 8 k c) p + 9 pi k^4 + 40 k^3 c - pi lam^2 = 0."""
    roots = np.roots([math.pi, 10 * math.pi * k**2 + 8 * k * c, 9 * math.pi * k**4 + 40 * k**3 * c - math.pi * lam**2])
    return max(roots.real)


@pytest.mark.parametrize("index", [1, 2])
def test_eigenmode_hold_needs_no_barrier(index):
    d = protocol_from_boundary(Eigenmode(index), 0.0, G, T)
    assert np.max(np.abs(d.c)) <= 1e-12
    assert np.max(np.abs(d.imag_residual)) <= 1e-12
    assert d.consistent


def test_eigenmode_hold_with_initial_barrier_is_contradictory():
    d = protocol_from_boundary(Eigenmode(1), 1.0, G, T)
    expected = np.exp(-4j * G.k**2 * T)
    np.testing.assert_allclose(d.c + 1j * d.imag_residual, expected, atol=1e-12)
    assert not d.consistent


def test_roundtrip_recovers_protocol():
    p = TangentDivergent.for_box(G)
    trace = integrate_truncated(2, p, G)
    d = protocol_from_boundary(Sampled(trace.t, trace.psi0), 0.0, G)
    c_in = p(trace.t)
    mask = (np.abs(trace.psi0) > 0.1) & (c_in > 0)
    assert np.max(np.abs(d.c - c_in)[mask] / c_in[mask]) <= 0.01
    assert np.max(np.abs(d.imag_residual[mask])) <= 1e-3 * np.max(np.abs(d.c[mask]))


def test_singularity_reports_time():
    t = np.linspace(0, 1, 101)
    psi = np.cos(math.pi * t).astype(complex)  # crosses zero at t = 0.5
    with pytest.raises(SingularityError) as info:
        protocol_from_boundary(Sampled(t, psi), 0.0, G)
    assert info.value.t == pytest.approx(0.5)


def test_design_grid_validation():
    with pytest.raises(ConfigurationError):
        protocol_from_boundary(Eigenmode(1), 0.0, G)
    with pytest.raises(ConfigurationError):
        protocol_from_boundary(Eigenmode(1), 0.0, G, np.linspace(0.1, 1, 5))
    with pytest.raises(ConfigurationError):
        Eigenmode(3)
    with pytest.raises(ConfigurationError):
        AmplitudeDecay(0.0, 0.1)


def test_sampled_derivatives_match_analytic():
    t = np.linspace(0, 1, 2001)
    psi, dpsi, ddpsi = Eigenmode(2).sample(t, G)
    s_psi, s_d, s_dd = Sampled(t, psi).sample(None, G)
    assert np.max(np.abs(s_d - dpsi)) < 1e-3 * np.max(np.abs(dpsi))
    scale = np.max(np.abs(ddpsi))
    assert np.max(np.abs(s_dd - ddpsi)[1:-1]) < 2e-5 * scale
    assert np.max(np.abs(s_dd - ddpsi)) < 2e-4 * scale  # one-sided stencil at the ends


def test_phase_rate_limits():
    assert amplitude_decay_phase(0.0, 0.0, G) == pytest.approx(-G.k**2, rel=1e-14)
    assert amplitude_decay_phase(0.0, 1e6, G) == pytest.approx(-5 * G.k**2, rel=1e-4)


def test_phase_rate_example_against_quadratic():
    assert amplitude_decay_phase(0.1, 0.0, G) == pytest.approx(quadratic_root(0.1, 0.0, G.k), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(lam=st.floats(0, 2), c=st.floats(0, 1e3))
def test_phase_rate_is_the_plus_root(lam, c):
    assert amplitude_decay_phase(lam, c, G) == pytest.approx(quadratic_root(lam, c, G.k), rel=1e-9, abs=1e-9)


def test_phase_rate_vectorised():
    c = np.array([0.0, 1.0, 10.0])
    np.testing.assert_array_equal(amplitude_decay_phase(0.0, c, G), [amplitude_decay_phase(0.0, v, G) for v in c])


def test_linearized_protocol():
    assert np.all(linearized_decay_protocol(0.0, T, G) == 0)
    lam, t = 0.01, 1.0
    small = 3 * math.pi * G.k * lam * t
    # relative Taylor gap of (e^x - 1) / x with x = 4 lam t is x/2 + x^2/6 + ...
    x = 4 * lam * t
    gap = linearized_decay_protocol(lam, t, G) / small - 1
    assert gap == pytest.approx(x / 2 + x**2 / 6, rel=1e-3)
    assert linearized_decay_protocol(0.001, 1.0, G) == pytest.approx(3 * math.pi * G.k * 0.001, rel=0.005)


def test_decay_residuals_shrink_quadratically():
    t = np.linspace(0, 2, 201)
    worst = []
    for lam in (0.0125, 0.00625, 0.003125):
        quad, lin = decay_equation_residuals(lam, t, G)
        assert np.max(np.abs(quad)) < 1e-10
        worst.append(np.max(np.abs(lin)))
    assert worst[0] / worst[1] == pytest.approx(4, rel=0.15)
    assert worst[1] / worst[2] == pytest.approx(4, rel=0.15)


def test_full_ode_residual_shrinks_with_lambda():
    t = np.linspace(0, 2, 201)
    worst = [np.max(np.abs(two_mode_residual(lam, t, G))) for lam in (0.05, 0.025, 0.0125, 0.00625)]
    assert all(a > b for a, b in zip(worst, worst[1:]))
    assert 1.8 < worst[-2] / worst[-1] < 3  # first order, from the sign gap below


def test_published_phase_equation_sign():
    """The imaginary part of the ODE differs from the published form by 4 pi lam phi_t."""
    lam = 0.05
    t = np.linspace(0, 2, 51)
    quad, lin = decay_equation_residuals(lam, t, G)
    full = two_mode_residual(lam, t, G)
    c = linearized_decay_protocol(lam, t, G)
    rate = amplitude_decay_phase(lam, c, G)
    np.testing.assert_allclose(full.real, -quad, atol=1e-10)
    np.testing.assert_allclose(full.imag, lin - 4 * math.pi * lam * rate, atol=1e-10)


def test_decay_target_ramps_linearly_at_first():
    lam = 0.05
    t = np.linspace(0, 0.02, 2001)
    d = protocol_from_boundary(AmplitudeDecay(1.0, lam), 0.0, G, t)
    slope = d.c[1:] / t[1:]
    # near-linear: slope steady to a few percent; its value 5 k^2 lam follows from D(0) = -20 i k^2 lam
    assert np.ptp(slope) < 0.05 * slope.mean()
    assert slope[0] == pytest.approx(5 * G.k**2 * lam, rel=1e-3)
