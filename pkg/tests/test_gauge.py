import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from css_lab.gauge import (
    a_t,
    a_theta,
    a_theta_bilinear,
    bogomolnyi,
    cell_bogomolnyi,
    covariant_D,
    gauge_data,
    linearized_LQ,
    prefix_trapezoid,
    suffix_trapezoid,
)
from css_lab.grid import EquivariantField, make_grid, planar_norm
from css_lab.solutions import apply_scaling, soliton


def _bump(grid, m, c=1.0 + 0.5j, center=2.0):
    r = grid.nodes
    return EquivariantField(grid, c * r**m * np.exp(-((r - center) ** 2)), m=m)


def test_prefix_suffix_sums():
    g = make_grid(3.0, 301)
    f = g.nodes**2
    p = prefix_trapezoid(f, g)
    s = suffix_trapezoid(f, g)
    assert p[0] == 0.0 and s[-1] == 0.0
    np.testing.assert_allclose(p + s, p[-1], atol=1e-12)
    np.testing.assert_allclose(p, g.nodes**3 / 3, atol=1e-4)


def test_zero_field_potentials():
    g = make_grid(8.0, 256)
    z = EquivariantField(g, np.zeros(g.N))
    assert not np.any(a_theta(z))
    assert not np.any(a_t(z))
    assert not np.any(covariant_D(_bump(g, 1), z).values)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_a_theta_vortex_limit(m):
    g = make_grid(64.0, 4096)
    ath = a_theta(soliton(m, g))
    assert ath[0] == 0.0
    assert np.all(np.diff(ath) <= 0)
    # total flux -M/(4 pi) = -2(m+1), minus the truncated tail
    assert ath[-1] == pytest.approx(-2 * (m + 1), rel=1e-4)
    assert m + ath[-1] == pytest.approx(-(m + 2), rel=1e-4)


def test_a_theta_bilinear():
    g = make_grid(16.0, 512)
    Q = soliton(1, g)
    np.testing.assert_array_equal(a_theta_bilinear(Q, Q), a_theta(Q))
    assert not np.any(a_theta_bilinear(Q, Q.with_values(1j * Q.values)))
    assert not np.any(a_theta_bilinear(Q, Q.with_values(np.zeros(g.N))))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-np.pi, np.pi))
def test_a_theta_quadratic_and_phase_blind(c, phase):
    g = make_grid(8.0, 128)
    u = _bump(g, 1)
    v = u.with_values(c * np.exp(1j * phase) * u.values)
    np.testing.assert_allclose(a_theta(v), c**2 * a_theta(u), rtol=1e-12, atol=1e-14)


def test_a_t_vortex_closed_form():
    # self-duality gives (m + A_theta) Q^2 / r = (Q^2 / 2)', so A_t[Q] = (Q^2 - Q(R_max)^2) / 2
    errs = []
    for N in (1024, 2048, 4096):
        g = make_grid(32.0, N)
        dens = np.abs(soliton(1, g).values) ** 2
        errs.append(np.max(np.abs(a_t(soliton(1, g)) - 0.5 * (dens - dens[-1]))))
    assert errs[-1] < 1e-3
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_a_t_origin_regression():
    # A_t(0) = 0 in the continuum since Q(0) = 0
    vals = [a_t(soliton(1, make_grid(64.0, N)))[0] for N in (2048, 4096, 8192)]
    assert abs(vals[-1]) < 1e-3
    assert abs(vals[1]) / abs(vals[2]) > 3.5


def test_a_t_scaling_law():
    g = make_grid(32.0, 4096)
    u = _bump(g, 1)
    lam = 1.5
    ul = apply_scaling(u, lam)
    lhs = a_t(ul)
    # A_t[u_lam](r) = lam^-2 A_t[u](r / lam) with u_lam = u(r/lam)/lam
    rhs = np.interp(g.nodes / lam, g.nodes, a_t(u)) / lam**2
    k = g.nodes < 16.0
    assert np.max(np.abs(lhs[k] - rhs[k])) < 1e-4 * np.max(np.abs(rhs))


def test_gauge_data_bundle():
    g = make_grid(32.0, 1024)
    Q = soliton(1, g)
    gd = gauge_data(Q)
    np.testing.assert_array_equal(gd.a_theta, a_theta(Q))
    np.testing.assert_array_equal(gd.a_t, a_t(Q))
    assert gd.source_mass == pytest.approx(16 * np.pi, rel=1e-3)
    assert 0 < gd.a_t_tail_bound < 1e-4


@pytest.mark.parametrize("m", [1, 2, 3])
def test_vortex_self_dual(m):
    errs = []
    for N in (512, 1024, 2048):
        g = make_grid(16.0, N)
        errs.append(planar_norm(bogomolnyi(soliton(m, g)).values, g))
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_cell_bogomolnyi_second_order():
    errs = []
    for N in (512, 1024, 2048):
        g = make_grid(16.0, N)
        errs.append(np.max(np.abs(cell_bogomolnyi(soliton(1, g)))))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_covariant_D_free():
    g = make_grid(4.0, 401)
    f = EquivariantField(g, g.nodes**2, m=2)
    z = f.with_values(np.zeros(g.N))
    out = covariant_D(z, f).values
    assert np.max(np.abs(out)) < 1e-10
    assert not np.any(covariant_D(f, z).values)


def test_linearized_zero_and_phase_direction():
    g = make_grid(16.0, 1024)
    Q = soliton(1, g)
    z = Q.with_values(np.zeros(g.N))
    assert not np.any(linearized_LQ(z).values)
    iQ = Q.with_values(1j * Q.values)
    assert planar_norm(linearized_LQ(iQ).values, g) == pytest.approx(planar_norm(bogomolnyi(Q).values, g), rel=1e-12)


def test_linearized_gateaux():
    g = make_grid(16.0, 1024)
    Q = soliton(1, g)
    eps = _bump(g, 1)
    L = linearized_LQ(eps, Q).values
    base = bogomolnyi(Q).values
    errs = []
    for s in (1e-2, 5e-3, 2.5e-3):
        moved = bogomolnyi(Q.with_values(Q.values + s * eps.values)).values
        errs.append(planar_norm((moved - base) / s - L, g))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.05)


def test_compatibility_checks():
    a = soliton(1, make_grid(8.0, 64))
    b = soliton(2, a.grid)
    with pytest.raises(ValueError):
        covariant_D(a, b)
    with pytest.raises(ValueError):
        a_theta_bilinear(a, soliton(1, make_grid(8.0, 65)))
