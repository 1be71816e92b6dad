"""Nonlocal gauge potentials and the Bogomol'nyi operators.

The angular potential is the prefix integral

    A_theta[u](r) = -1/2 int_0^r |u|^2 r' dr'

and the temporal potential the suffix integral

    A_t[u](r) = -int_r^R_max (m + A_theta[u]) |u|^2 dr'/r'

both evaluated with trapezoid sums over the grid nodes, so the full prefix sum
coincides with the grid quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import EquivariantField, RadialGrid, _check_compatible, derivative, divide_by_r


def prefix_trapezoid(f: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``int_0^{r_i} f dr`` for every node (trapezoid)."""
    out = np.zeros(f.shape, dtype=f.dtype)
    np.cumsum(0.5 * (f[1:] + f[:-1]) * grid.spacing, out=out[1:])
    return out


def suffix_trapezoid(f: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``int_{r_i}^{R_max} f dr`` for every node (trapezoid)."""
    cells = 0.5 * (f[1:] + f[:-1]) * grid.spacing
    out = np.zeros(f.shape, dtype=f.dtype)
    out[:-1] = np.cumsum(cells[::-1])[::-1]
    return out


def a_theta_values(density: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``-1/2 int_0^r density r' dr'`` for a real density sampled on the grid."""
    return -0.5 * prefix_trapezoid(density * grid.nodes, grid)


def a_t_values(u: np.ndarray, m: int, grid: RadialGrid, a_theta: np.ndarray | None = None) -> np.ndarray:
    density = np.abs(u) ** 2
    if a_theta is None:
        a_theta = a_theta_values(density, grid)
    # |u|^2 / r -> 0 at the origin for m >= 1
    integrand = (m + a_theta) * divide_by_r(density, grid)
    return -suffix_trapezoid(integrand, grid)


def a_theta_bilinear(p: EquivariantField, q: EquivariantField) -> np.ndarray:
    """``-1/2 int_0^r Re(conj(p) q) r' dr'``; symmetric and real-bilinear."""
    _check_compatible(p, q)
    return a_theta_values((np.conj(p.values) * q.values).real, p.grid)


def a_theta(u: EquivariantField) -> np.ndarray:
    """Angular gauge potential; nonincreasing, ending at ``-M[u]/(4 pi)``."""
    return a_theta_bilinear(u, u)


def a_t(u: EquivariantField) -> np.ndarray:
    """Temporal gauge potential, normalized to vanish at ``R_max``."""
    return a_t_values(u.values, u.m, u.grid, a_theta(u))


@dataclass(frozen=True)
class GaugeData:
    """Gauge potentials attached to a field snapshot.

    ``a_t_tail_bound`` bounds the part of the ``A_t`` integral beyond
    ``R_max`` that the truncation drops, ``|m + A_theta(R_max)| * T / (2 pi R_max^2)``
    with ``T`` the planar mass outside ``R_max / 2`` used as a proxy for the
    mass outside ``R_max``.
    """

    a_theta: np.ndarray
    a_t: np.ndarray
    source_mass: float
    a_t_tail_bound: float


def gauge_data(u: EquivariantField) -> GaugeData:
    from .observables import mass, tail_mass

    ath = a_theta(u)
    at = a_t_values(u.values, u.m, u.grid, ath)
    R = u.grid.R_max
    tail = tail_mass(u, 0.5 * R)
    bound = abs(u.m + ath[-1]) * tail / (2.0 * np.pi * R**2)
    return GaugeData(a_theta=ath, a_t=at, source_mass=mass(u), a_t_tail_bound=float(bound))


def covariant_D(background: EquivariantField, f: EquivariantField) -> EquivariantField:
    """Covariant Cauchy-Riemann operator ``d_r f - (m + A_theta[background]) f / r``."""
    _check_compatible(background, f)
    ath = a_theta(background)
    grid = f.grid
    out = derivative(f.values, grid) - (f.m + ath) * divide_by_r(f.values, grid)
    return f.with_values(out)


def bogomolnyi(u: EquivariantField) -> EquivariantField:
    """``D_u u``; vanishes exactly at the vortex in the continuum."""
    return covariant_D(u, u)


def linearized_LQ(eps: EquivariantField, Q: EquivariantField | None = None) -> EquivariantField:
    """Linearization of ``u -> D_u u`` at the vortex.

    ``L_Q eps = D_Q eps - 2 A_theta[Q, eps] Q / r``.  ``Q`` defaults to the
    vortex sampled on ``eps``'s grid.
    """
    if Q is None:
        from .solutions import soliton

        Q = soliton(eps.m, eps.grid)
    _check_compatible(Q, eps)
    grid = eps.grid
    ath_q = a_theta(Q)
    cross = a_theta_bilinear(Q, eps)
    out = (
        derivative(eps.values, grid)
        - (eps.m + ath_q) * divide_by_r(eps.values, grid)
        - 2.0 * cross * divide_by_r(Q.values, grid)
    )
    return eps.with_values(out)


# -- cell-centred forms -------------------------------------------------------
#
# The energy and the evolution use a staggered layout: differences live on the
# cells [r_i, r_{i+1}], the angular potential on a cell is the node sum
# -1/2 sum_{j<=i} w_j r_j |u_j|^2, and the field on a cell is the average of its
# end values.  With this pairing the integration by parts that turns the
# direct energy into the self-dual one is exact on the grid.


def cell_midpoints(grid: RadialGrid) -> np.ndarray:
    return 0.5 * (grid.nodes[1:] + grid.nodes[:-1])


def cell_a_theta_values(density: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Angular potential on each cell, ``-1/2 sum_{j<=i} w_j r_j rho_j``."""
    return -0.5 * np.cumsum(grid.weights * grid.nodes * density)[:-1]


def cell_a_theta(u: EquivariantField) -> np.ndarray:
    return cell_a_theta_values(np.abs(u.values) ** 2, u.grid)


def cell_bogomolnyi(u: EquivariantField) -> np.ndarray:
    """``D_u u`` sampled at cell midpoints."""
    grid = u.grid
    v = u.values
    ath = cell_a_theta(u)
    return (v[1:] - v[:-1]) / grid.spacing - (u.m + ath) * 0.5 * (v[1:] + v[:-1]) / cell_midpoints(grid)
