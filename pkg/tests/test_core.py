import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltabox.core import (BoxGeometry, Constant, Linear, Reversed, SpatialGrid, Table, TangentDivergent,
                           TimeGrid, eigenenergy, eigenmode, kernel_coeff, protocol_value, trapezoid)
from deltabox.errors import ConfigurationError, DivergenceError, DomainError, InterpolationError

positions = st.floats(-0.999, 0.999)
barriers = st.floats(-0.95, 0.95)
kernel_modes = st.integers(1, 64)


def left_branch(geom, nu, x):
    """The x < x0 branch of the kernel prefactor, evaluated at any x."""
    k, L, x0 = geom.k, geom.L, geom.x0
    sign = 1.0 if nu % 2 == 0 else -1.0
    pref = np.exp(-1j * nu * k * (x + x0)) / (2j * L)
    return pref * (sign - np.exp(2j * nu * k * x0)) * (np.exp(2j * nu * k * (L + x)) - 1.0)


# ---------------------------------------------------------------- geometry and modes


def test_geometry_invariants():
    g = BoxGeometry(L=2.5, x0=-0.4, n=3)
    assert g.k * 2 * g.L == pytest.approx(math.pi, abs=1e-15)
    assert g.left_length + g.right_length == pytest.approx(2 * g.L)
    for bad in (dict(L=0), dict(x0=1.0), dict(x0=-1.0), dict(n=0), dict(n=1.5)):
        with pytest.raises(DomainError):
            BoxGeometry(**bad)


@pytest.mark.parametrize("m,x,expected", [(1, 0.0, 1.0), (2, 0.0, 0.0), (1, 1.0, 0.0)])
def test_eigenmode_examples(m, x, expected):
    assert eigenmode(BoxGeometry(), m, x) == pytest.approx(expected, abs=1e-15)


def test_eigenmode_domain():
    g = BoxGeometry()
    with pytest.raises(DomainError):
        eigenmode(g, 0, 0.1)
    with pytest.raises(DomainError):
        eigenmode(g, 1, 1.01)


def test_eigenmodes_orthonormal_by_quadrature():
    g = BoxGeometry(L=1.3)
    x = SpatialGrid(g.L, 513).points
    phi = eigenmode(g, np.arange(1, 41)[:, None], x[None, :])
    gram = trapezoid(phi[:, None, :] * phi[None, :, :], x)
    np.testing.assert_allclose(gram, np.eye(40), atol=1e-12)


def test_eigenenergy():
    g = BoxGeometry()
    assert eigenenergy(g, 2) == pytest.approx(math.pi**2)


@given(m=st.integers(1, 200))
def test_walls_vanish(m):
    g = BoxGeometry()
    assert eigenmode(g, m, -1.0) == 0.0 and eigenmode(g, m, 1.0) == 0.0


# ---------------------------------------------------------------- kernel


@settings(max_examples=200, deadline=None)
@given(nu=kernel_modes, x0=barriers)
def test_kernel_branch_continuity(nu, x0):
    g = BoxGeometry(x0=x0)
    right = kernel_coeff(g, nu, x0)
    assert abs(right - left_branch(g, nu, x0)) <= 1e-12
    just_left = np.nextafter(x0, -2.0)
    assert abs(kernel_coeff(g, nu, just_left) - right) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(nu=kernel_modes, x0=barriers)
def test_kernel_boundary_vanishing(nu, x0):
    g = BoxGeometry(x0=x0)
    for wall in (-1.0, 1.0):
        assert kernel_coeff(g, nu, wall) == 0
        inner = np.nextafter(wall, 0.0)
        assert abs(kernel_coeff(g, nu, inner)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(nu=kernel_modes, x=positions)
def test_kernel_parity_centred(nu, x):
    g = BoxGeometry()
    assert abs(kernel_coeff(g, nu, x) - kernel_coeff(g, nu, -x)) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(nu=kernel_modes, x=positions, x0=barriers)
def test_kernel_factorises(nu, x, x0):
    g = BoxGeometry(x0=x0)
    expected = -2j * eigenmode(g, nu, x) * eigenmode(g, nu, x0)
    assert abs(kernel_coeff(g, nu, x) - expected) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(mu=st.integers(0, 31), x=positions)
def test_kernel_reduces_to_cosine_series(mu, x):
    """Centred barrier: odd modes give -(2i/L) cos, even modes drop out."""
    g = BoxGeometry()
    nu = 2 * mu + 1
    assert abs(kernel_coeff(g, nu, x) + 2j / g.L * math.cos(nu * g.k * x)) <= 1e-12
    assert abs(kernel_coeff(g, nu + 1, x)) <= 1e-12


def test_kernel_vectorised_matches_scalar():
    g = BoxGeometry(x0=0.3)
    x = np.linspace(-1, 1, 17)
    nu = np.arange(1, 9)[:, None]
    grid = kernel_coeff(g, nu, x[None, :])
    assert grid.shape == (8, 17)
    assert grid[3, 5] == kernel_coeff(g, 4, x[5])


# ---------------------------------------------------------------- protocols


def test_tan_protocol_examples():
    p = TangentDivergent(8 / math.pi)
    assert protocol_value(p, 0.0) == 0.0
    assert protocol_value(p, 4 / math.pi) == pytest.approx(1.0, abs=1e-15)
    assert TangentDivergent.for_box(BoxGeometry()).t_star == pytest.approx(8 / math.pi)
    with pytest.raises(DivergenceError):
        p(8 / math.pi)
    with pytest.raises(DivergenceError):
        p(3.0)


def test_tan_matches_box_form():
    g = BoxGeometry()
    p = TangentDivergent.for_box(g)
    t = np.linspace(0, p.horizon, 50)
    np.testing.assert_allclose(p(t), np.tan(g.k**2 * t / 4), rtol=1e-13, atol=1e-15)


def test_time_at_strength_inverts():
    p = TangentDivergent(2.0)
    assert p(p.time_at_strength(50.0)) == pytest.approx(50.0)


def test_linear_and_constant():
    assert protocol_value(Linear(2.0), 3.0) == 6.0
    assert Constant(1.5)(np.array([0.0, 7.0])).tolist() == [1.5, 1.5]
    assert Linear(2.0).integral(3.0) == 9.0
    assert Constant(1.5).integral(2.0) == 3.0


def test_protocols_reject_negative_time():
    with pytest.raises(DomainError):
        Linear(1.0)(-0.1)


def test_table_protocol():
    p = Table((0.0, 1.0, 3.0), (0.0, 2.0, 0.0))
    assert p(0.5) == 1.0 and p(2.0) == 1.0
    assert p.integral(3.0) == pytest.approx(3.0)
    assert p.integral(0.5) == pytest.approx(0.25)
    assert p.horizon == 3.0
    with pytest.raises(DomainError):
        p(3.5)
    with pytest.raises(ConfigurationError):
        Table((0.0, 0.0), (1.0, 2.0))


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0.01, 2.4))
def test_integrals_and_derivatives_consistent(t):
    h = 1e-5
    protocols = [TangentDivergent(8 / math.pi), Linear(0.7), Constant(-0.3)]
    if abs(t - 1.0) > 2 * h:  # the table has a kink there
        protocols.append(Table((0.0, 1.0, 2.5), (0.1, 2.0, 1.0)))
    for p in protocols:
        num = (p.integral(t + h) - p.integral(t - h)) / (2 * h)
        assert num == pytest.approx(p(t), rel=1e-6, abs=1e-8)
    q = TangentDivergent(8 / math.pi)
    assert (q(t + h) - q(t - h)) / (2 * h) == pytest.approx(q.derivative(t), rel=1e-6)


def test_reversed_protocol():
    base = TangentDivergent(8 / math.pi)
    r = Reversed(base, 2.0)
    assert r(0.0) == pytest.approx(base(2.0))
    assert r(2.0) == 0.0
    assert r.integral(2.0) == pytest.approx(base.integral(2.0))
    with pytest.raises(DomainError):
        r(2.5)


# ---------------------------------------------------------------- grids


@given(h=st.floats(0.01, 100), M=st.integers(1, 10**6))
def test_time_grid_consistency(h, M):
    g = TimeGrid(h, M)
    assert abs(g.eps * M - h) <= 2 * np.spacing(h)


def test_time_grid_lookup():
    g = TimeGrid(1.0, 10)
    assert g.index_of(0.3) == 3
    with pytest.raises(InterpolationError):
        g.index_of(0.35)
    with pytest.raises(ConfigurationError):
        TimeGrid(1.0, 0)


def test_spatial_grid():
    x = SpatialGrid(2.0, 9).points
    assert x[0] == -2.0 and x[-1] == 2.0
    np.testing.assert_allclose(np.diff(x), SpatialGrid(2.0, 9).dx)
