"""Radial grids, equivariant fields, quadrature and differentiation.

Functions of the radial variable live on a node set ``0 = r_0 < ... < r_{N-1} = R_max``
with composite trapezoid weights.  Planar integrals use the measure
``2*pi*r dr``; the real pairing used by the modulation code omits the ``2*pi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_NODES = 16


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes and trapezoid weights on ``[0, R_max]``."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def R_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def N(self) -> int:
        return int(self.nodes.size)

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h_min(self) -> float:
        return float(self.spacing.min())

    @property
    def h_max(self) -> float:
        return float(self.spacing.max())

    @property
    def planar_weights(self) -> np.ndarray:
        """Weights ``2*pi*w_i*r_i`` of the planar measure."""
        return 2.0 * np.pi * self.weights * self.nodes

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.N == other.N and np.array_equal(self.nodes, other.nodes)
        )


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    h = np.diff(nodes)
    w = np.zeros_like(nodes)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def make_grid(R_max: float, N: int, stretch: float = 1.0, *, min_nodes: int = MIN_NODES) -> RadialGrid:
    """Build a radial grid on ``[0, R_max]``.

    ``stretch = 1`` gives uniform spacing.  For ``stretch > 1`` the node spacing
    grows linearly in the index so that the last cell is ``stretch`` times wider
    than the first, i.e. nodes near the origin are ``stretch`` times denser than
    near ``R_max``.

    Raises
    ------
    ValueError
        If ``R_max`` is not a positive finite number, ``N < min_nodes`` or
        ``stretch < 1``.
    """
    R_max = float(R_max)
    if not np.isfinite(R_max) or R_max <= 0.0:
        raise ValueError(f"R_max must be positive and finite, got {R_max!r}")
    if int(N) != N or N < max(min_nodes, 2):
        raise ValueError(f"need at least {max(min_nodes, 2)} nodes, got {N!r}")
    stretch = float(stretch)
    if not np.isfinite(stretch) or stretch < 1.0:
        raise ValueError(f"stretch must be >= 1, got {stretch!r}")
    N = int(N)

    xi = np.linspace(0.0, 1.0, N)
    if stretch == 1.0:
        nodes = R_max * xi
    else:
        # dr/dxi proportional to 1 + (stretch - 1) * xi
        a = 0.5 * (stretch - 1.0)
        nodes = R_max * (xi + a * xi**2) / (1.0 + a)
    nodes[0] = 0.0
    nodes[-1] = R_max
    return RadialGrid(nodes=nodes, weights=trapezoid_weights(nodes))


@dataclass(frozen=True, eq=False)
class EquivariantField:
    """Complex radial profile ``u(r)`` of the field ``u(r) exp(i m theta)``.

    Profiles produced by differentiation are stored in the same container;
    only fields that enter a division by ``r`` are required to vanish at the
    origin.
    """

    grid: RadialGrid
    values: np.ndarray
    m: int = 1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(
                f"field has {values.shape} samples, grid has {self.grid.nodes.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite samples")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "m", int(self.m))

    @property
    def tail_sample(self) -> float:
        """``|u(R_max)|``, a truncation diagnostic."""
        return float(abs(self.values[-1]))

    @property
    def vanishes_at_origin(self) -> bool:
        return self.values[0] == 0

    def with_values(self, values) -> "EquivariantField":
        return EquivariantField(self.grid, values, self.m)

    def __add__(self, other):
        if isinstance(other, EquivariantField):
            _check_compatible(self, other)
            return self.with_values(self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, EquivariantField):
            _check_compatible(self, other)
            return self.with_values(self.values - other.values)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return self.with_values(self.values * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _check_compatible(f: EquivariantField, g: EquivariantField) -> None:
    if not f.grid.same_as(g.grid):
        raise ValueError("fields live on different grids")
    if f.m != g.m:
        raise ValueError(f"equivariance mismatch: m={f.m} vs m={g.m}")


def integrate_planar(samples, grid: RadialGrid) -> float:
    """``2*pi * sum_i w_i f_i r_i``, the planar integral of a radial function."""
    samples = np.asarray(samples)
    if samples.shape != grid.nodes.shape:
        raise ValueError(
            f"{samples.shape[0] if samples.ndim else 0} samples for a grid of {grid.N} nodes"
        )
    return float(np.sum(grid.planar_weights * samples))


def inner_product(f: EquivariantField, g: EquivariantField) -> float:
    """Real pairing ``Re sum_i w_i f_i conj(g_i) r_i`` (no ``2*pi``)."""
    _check_compatible(f, g)
    return float(np.sum(f.grid.weights * f.grid.nodes * (f.values * np.conj(g.values)).real))


def derivative(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    # 2nd-order centered interior, 2nd-order one-sided ends (non-uniform aware)
    return np.gradient(values, grid.nodes, edge_order=2)


def d_dr(f: EquivariantField) -> EquivariantField:
    """Radial derivative; second order in the node spacing."""
    if f.grid.N < 3:
        raise ValueError("d_dr needs at least 3 nodes")
    return f.with_values(derivative(f.values, f.grid))


def divide_by_r(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``values / r`` with the convention ``f(0)/0 = 0``.

    Raises
    ------
    ValueError
        If the profile does not vanish at the origin.
    """
    if values[0] != 0:
        raise ValueError("profile does not vanish at r = 0; cannot divide by r")
    out = np.zeros_like(values)
    out[1:] = values[1:] / grid.nodes[1:]
    return out


def planar_norm(values: np.ndarray, grid: RadialGrid) -> float:
    return float(np.sqrt(integrate_planar(np.abs(values) ** 2, grid)))


def h1m_norm(f: EquivariantField, *, homogeneous: bool = False) -> float:
    """Discrete equivariant H^1 norm.

    ``(||d_r f||^2 + ||(m/r) f||^2 + ||f||^2)^(1/2)`` in the planar L^2 norm.
    With ``homogeneous=True`` the ``||f||^2`` term is dropped.
    """
    if f.m < 1:
        raise ValueError("h1m_norm requires m >= 1")
    grid = f.grid
    df = derivative(f.values, grid)
    hardy = f.m * divide_by_r(f.values, grid)
    total = integrate_planar(np.abs(df) ** 2 + np.abs(hardy) ** 2, grid)
    if not homogeneous:
        total += integrate_planar(np.abs(f.values) ** 2, grid)
    return float(np.sqrt(total))


def h1m_seminorm(f: EquivariantField) -> float:
    return h1m_norm(f, homogeneous=True)
