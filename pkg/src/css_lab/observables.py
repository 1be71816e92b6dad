"""Mass, energy in direct and self-dual form, virial, variance, tail mass and
the localized-virial cutoff family."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gauge import cell_a_theta_values, cell_bogomolnyi, cell_midpoints, prefix_trapezoid
from .grid import (
    EquivariantField,
    RadialGrid,
    derivative,
    integrate_planar,
)


@dataclass(frozen=True)
class EnergyTerms:
    kinetic: float
    gauge_potential_term: float
    quartic_term: float

    @property
    def total(self) -> float:
        return self.kinetic + self.gauge_potential_term - self.quartic_term


@dataclass(frozen=True)
class ConservedReport:
    mass: float
    energy_direct: float
    energy_selfdual: float
    kinetic: float
    gauge_potential_term: float
    quartic_term: float
    virial: float
    variance: float


@dataclass(frozen=True, eq=False)
class CutoffFamily:
    """``chi`` (smooth step 1 -> 0 on ``[R, 2R]``), ``phi = chi**2`` and
    ``psi = (1/r) int_0^r phi`` so that ``d_r(r psi) = phi``.

    For ``r >= 2R``, ``psi = R (1 + tail_constant) / r``.
    """

    R: float
    chi: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    tail_constant: float


def mass(u: EquivariantField) -> float:
    return integrate_planar(np.abs(u.values) ** 2, u.grid)


def cell_integral(samples: np.ndarray, grid: RadialGrid) -> float:
    """Midpoint rule ``2*pi * sum_c h_c r_c f_c`` for samples on cell midpoints."""
    return float(2.0 * np.pi * np.sum(grid.spacing * cell_midpoints(grid) * samples))


def energy_terms(u: EquivariantField) -> EnergyTerms:
    """Kinetic, gauge-potential and quartic parts of the energy.

    Kinetic and gauge-potential densities live on cell midpoints (see
    :mod:`css_lab.gauge`), the quartic term uses the node quadrature.
    """
    grid = u.grid
    v = u.values
    density = np.abs(v) ** 2
    rc = cell_midpoints(grid)
    grad = (v[1:] - v[:-1]) / grid.spacing
    avg = 0.5 * (v[1:] + v[:-1])
    coeff = (u.m + cell_a_theta_values(density, grid)) / rc
    return EnergyTerms(
        kinetic=0.5 * cell_integral(np.abs(grad) ** 2, grid),
        gauge_potential_term=0.5 * cell_integral(coeff**2 * np.abs(avg) ** 2, grid),
        quartic_term=0.25 * integrate_planar(density**2, grid),
    )


def energy_direct(u: EquivariantField) -> float:
    """``int 1/2 |d_r u|^2 + 1/2 ((m + A_theta)/r)^2 |u|^2 - 1/4 |u|^4``."""
    return energy_terms(u).total


def energy_selfdual(u: EquivariantField) -> float:
    """``int 1/2 |D_u u|^2``; nonnegative.

    Equals :func:`energy_direct` up to rounding for fields vanishing at
    ``R_max``.
    """
    return 0.5 * cell_integral(np.abs(cell_bogomolnyi(u)) ** 2, u.grid)


def virial_density(u: EquivariantField) -> np.ndarray:
    return (np.conj(u.values) * u.grid.nodes * derivative(u.values, u.grid)).imag


def virial(u: EquivariantField) -> float:
    """``int Im(conj(u) r d_r u)``; its time derivative is ``4 E[u]``."""
    return integrate_planar(virial_density(u), u.grid)


def localized_virial(u: EquivariantField, cutoffs: CutoffFamily) -> float:
    if cutoffs.psi.shape != u.values.shape:
        raise ValueError("cutoff family built on a different grid")
    return integrate_planar(cutoffs.psi * virial_density(u), u.grid)


def localized_energy(u: EquivariantField, cutoffs: CutoffFamily) -> float:
    """``E[chi_R u]``, the energy of the field truncated by the cutoff ``chi``."""
    if cutoffs.chi.shape != u.values.shape:
        raise ValueError("cutoff family built on a different grid")
    return energy_direct(u.with_values(cutoffs.chi * u.values))


def variance(u: EquivariantField) -> float:
    """``int r^2 |u|^2``."""
    return integrate_planar(u.grid.nodes**2 * np.abs(u.values) ** 2, u.grid)


def tail_mass(u: EquivariantField, R: float) -> float:
    """Planar mass of ``|u|^2`` on ``r >= R``.

    The cell containing ``R`` contributes a trapezoid on ``[R, r_{k+1}]`` with
    ``|u|^2`` linearly interpolated at ``R``.
    """
    grid = u.grid
    r = grid.nodes
    if R >= grid.R_max:
        return 0.0
    if R <= 0:
        return mass(u)
    density = np.abs(u.values) ** 2
    k = int(np.searchsorted(r, R, side="right")) - 1
    # full cells [r_j, r_{j+1}] for j > k
    g = density * r
    h = grid.spacing
    full = float(np.sum(0.5 * (g[k + 1 : -1] + g[k + 2 :]) * h[k + 1 :]))
    frac = (R - r[k]) / h[k]
    dens_R = (1.0 - frac) * density[k] + frac * density[k + 1]
    partial = 0.5 * (dens_R * R + g[k + 1]) * (r[k + 1] - R)
    return 2.0 * np.pi * (full + partial)


def smoothstep5(x: np.ndarray) -> np.ndarray:
    """Quintic smoothstep, ``0`` for ``x <= 0``, ``1`` for ``x >= 1``, C^2."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def step_down(r: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """1 on ``[0, inner]``, 0 beyond ``outer``, quintic bridge in between."""
    return 1.0 - smoothstep5((r - inner) / (outer - inner))


# int_0^1 smoothstep5(x)^2 dx, the bridge mass of chi^2 in units of R
SMOOTHSTEP5_SQUARE_INTEGRAL = 181.0 / 462.0


def make_cutoffs(grid: RadialGrid, R: float) -> CutoffFamily:
    """Cutoff family at scale ``R``.

    ``R >= R_max`` yields the trivial family ``psi = 1`` on the grid.

    Raises
    ------
    ValueError
        If ``R <= 0`` or the bridge ``[R, 2R]`` is only partly on the grid.
    """
    if R <= 0:
        raise ValueError(f"cutoff scale must be positive, got {R!r}")
    r = grid.nodes
    if R >= grid.R_max:
        ones = np.ones_like(r)
        return CutoffFamily(R=R, chi=ones, phi=ones.copy(), psi=ones.copy(),
                            tail_constant=SMOOTHSTEP5_SQUARE_INTEGRAL)
    if 2.0 * R > grid.R_max:
        raise ValueError(f"cutoff bridge [{R}, {2 * R}] exceeds R_max = {grid.R_max}")
    chi = step_down(r, R, 2.0 * R)
    phi = chi**2
    primitive = prefix_trapezoid(phi, grid)
    psi = np.ones_like(r)
    psi[1:] = primitive[1:] / r[1:]
    return CutoffFamily(R=R, chi=chi, phi=phi, psi=psi, tail_constant=float(primitive[-1] / R - 1.0))


def conserved_report(u: EquivariantField) -> ConservedReport:
    terms = energy_terms(u)
    return ConservedReport(
        mass=mass(u),
        energy_direct=terms.total,
        energy_selfdual=energy_selfdual(u),
        kinetic=terms.kinetic,
        gauge_potential_term=terms.gauge_potential_term,
        quartic_term=terms.quartic_term,
        virial=virial(u),
        variance=variance(u),
    )
