"""Jackiw-Pi vortex, its symmetry transforms and the explicit blowup solution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .gauge import suffix_trapezoid
from .grid import EquivariantField, RadialGrid


@dataclass(frozen=True)
class SymmetryParams:
    """Scale, phase and (for the pseudoconformal map) time."""

    lam: float = 1.0
    gamma: float = 0.0
    t: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"scale must be positive, got {self.lam!r}")
        object.__setattr__(self, "gamma", float(np.mod(self.gamma, 2.0 * np.pi)))


def _check_m(m: int) -> int:
    if int(m) != m or m < 1:
        raise ValueError(f"equivariance index must be an integer >= 1, got {m!r}")
    return int(m)


def soliton_profile(m: int, r) -> np.ndarray:
    """``sqrt(8) (m+1) r^m / (1 + r^(2m+2))``."""
    r = np.asarray(r, dtype=float)
    return np.sqrt(8.0) * (m + 1) * r**m / (1.0 + r ** (2 * m + 2))


def soliton_derivative(m: int, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    s = r ** (2 * m + 2)
    return np.sqrt(8.0) * (m + 1) * r ** (m - 1) * (m - (m + 2) * s) / (1.0 + s) ** 2


def soliton_mass(m: int) -> float:
    """``8 pi (m + 1)``."""
    return 8.0 * np.pi * (_check_m(m) + 1)


def soliton_tail_mass(m: int, R: float) -> float:
    """Exact planar mass of ``Q`` on ``r >= R``: ``8 pi (m+1) / (1 + R^(2m+2))``."""
    m = _check_m(m)
    return float(8.0 * np.pi * (m + 1) / (1.0 + float(R) ** (2 * m + 2)))


def soliton(m: int, grid: RadialGrid) -> EquivariantField:
    """The vortex ``Q`` sampled on ``grid``."""
    m = _check_m(m)
    return EquivariantField(grid, soliton_profile(m, grid.nodes), m)


def lambda_Q_profile(m: int, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    s = r ** (2 * m + 2)
    return np.sqrt(8.0) * (m + 1) ** 2 * r**m * (1.0 - s) / (1.0 + s) ** 2


def lambda_Q(m: int, grid: RadialGrid) -> EquivariantField:
    """Scaling generator ``(r d_r + 1) Q`` from the closed-form derivative; changes sign at ``r = 1``."""
    m = _check_m(m)
    return EquivariantField(grid, lambda_Q_profile(m, grid.nodes), m)


def tilde_Q(m: int, grid: RadialGrid) -> np.ndarray:
    """``-int_r^R_max Q dr`` (suffix trapezoid); nonpositive, zero at ``R_max``."""
    m = _check_m(m)
    return -suffix_trapezoid(soliton_profile(m, grid.nodes), grid)


def tilde_Q_tail_bound(m: int, grid: RadialGrid) -> float:
    """Bound on the truncated ``int_{R_max}^inf Q dr`` using ``Q <= C r^-(m+2)``."""
    R = grid.R_max
    C = np.sqrt(8.0) * (m + 1)
    return float(C * R ** (-(m + 1)) / (m + 1))


def blowup_profile(m: int, t: float, grid: RadialGrid) -> EquivariantField:
    """Explicit finite-time blowup solution at time ``t < 0``.

    ``S(t, r) = Q(r/|t|)/|t| * exp(i r^2 / (4 t))``, the pseudoconformal image
    of the vortex.  Evaluated from the closed form, no interpolation.
    """
    m = _check_m(m)
    if not t < 0:
        raise ValueError(f"blowup profile is defined for t < 0, got {t!r}")
    r = grid.nodes
    a = abs(t)
    vals = soliton_profile(m, r / a) / a * np.exp(1j * r**2 / (4.0 * t))
    return EquivariantField(grid, vals, m)


def spline(u: EquivariantField) -> CubicSpline:
    return CubicSpline(u.grid.nodes, u.values)


def sample_spline(sp: CubicSpline, x: np.ndarray, R_max: float) -> np.ndarray:
    """Evaluate ``sp`` at ``x``, zero outside ``[0, R_max]``."""
    out = np.zeros(x.shape, dtype=complex)
    inside = x <= R_max
    out[inside] = sp(x[inside])
    return out


def apply_scaling(u: EquivariantField, lam: float, *, return_leakage: bool = False):
    """Resample ``u(r/lam)/lam`` onto ``u``'s grid by cubic interpolation.

    Source values beyond ``R_max`` are taken as zero.  With
    ``return_leakage=True`` also returns the planar mass of ``u`` that falls
    outside the grid after scaling.
    """
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"scale must be positive, got {lam!r}")
    grid = u.grid
    if lam == 1.0:
        out = u.with_values(u.values.copy())
    else:
        vals = sample_spline(spline(u), grid.nodes / lam, grid.R_max) / lam
        vals[0] = u.values[0] / lam
        out = u.with_values(vals)
    if not return_leakage:
        return out
    from .observables import tail_mass

    leak = tail_mass(u, grid.R_max / lam) if lam > 1.0 else 0.0
    return out, leak


def apply_phase(u: EquivariantField, gamma: float) -> EquivariantField:
    """Multiply by ``exp(i gamma)``."""
    if gamma == 0:
        return u.with_values(u.values.copy())
    return u.with_values(u.values * np.exp(1j * gamma))


def pseudoconformal(u_snapshot: EquivariantField, s: float, t: float) -> EquivariantField:
    """Pseudoconformal image at time ``t`` of the snapshot ``u(s)``, ``s = -1/t``.

    ``[C u](t, r) = u(-1/t, r/|t|)/|t| * exp(i r^2 / (4 t))``.
    """
    if t == 0:
        raise ValueError("pseudoconformal transform is undefined at t = 0")
    if not np.isclose(s, -1.0 / t, rtol=1e-12, atol=0.0):
        raise ValueError(f"snapshot time {s!r} does not match -1/t = {-1.0 / t!r}")
    scaled = apply_scaling(u_snapshot, abs(t))
    r = u_snapshot.grid.nodes
    return scaled.with_values(scaled.values * np.exp(1j * r**2 / (4.0 * t)))
