"""Method-of-lines time integration of the equivariant self-dual CSS equation.

The semi-discrete system is the exact Hamiltonian flow of the grid energy of
:func:`css_lab.observables.energy_selfdual` with respect to the node pairing
``sum_i w_i r_i Re(f_i conj(g_i))``: ``du/dt = -i grad E_h``.  Mass and energy
are therefore invariants of the semi-discrete flow; only the RK4 stepping
perturbs them.  ``u(0) = 0`` is pinned; the outer node evolves under the
natural boundary condition of the self-dual energy, which the vortex tail
satisfies to truncation order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import EquivariantField, RadialGrid, make_grid
from .observables import (
    ConservedReport,
    conserved_report,
    localized_virial,
    make_cutoffs,
    tail_mass,
)

try:  # optional compiled stepper
    from . import _kernels
except ImportError:  # pragma: no cover - numba missing
    _kernels = None

log = logging.getLogger(__name__)

BACKENDS = ("auto", "numba", "numpy")

C_CFL = 0.2

COMPLETED = "completed"
BLOWUP_UNDERRESOLVED = "blowup_underresolved"
INSTABILITY_DETECTED = "instability_detected"


class InstabilityError(FloatingPointError):
    """Non-finite values appeared during time stepping."""


class Stencil:
    """Precomputed grid arrays for the right-hand side."""

    def __init__(self, grid: RadialGrid, m: int):
        r = grid.nodes
        self.grid = grid
        self.m = int(m)
        self.h = grid.spacing
        self.rc = 0.5 * (r[1:] + r[:-1])
        self.wr = grid.weights * r
        self.inv_wr = np.zeros_like(r)
        self.inv_wr[1:] = 1.0 / self.wr[1:]
        self.inv_h = 1.0 / self.h
        self.inv_rc = 1.0 / self.rc

    def cell_operator(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bogomol'nyi operator on cells, with the cell potential and cell average."""
        rho = (u * u.conjugate()).real
        a_cell = -0.5 * np.cumsum(self.wr * rho)[:-1]
        avg = 0.5 * (u[1:] + u[:-1])
        d = (u[1:] - u[:-1]) * self.inv_h - (self.m + a_cell) * avg * self.inv_rc
        return d, a_cell, avg

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Gradient of ``E_h / (2 pi)`` in the node pairing; zero at the origin.

        ``E_h = pi sum_c h_c r_c |D_c u|^2`` with ``D_c`` the cell Bogomol'nyi
        operator, so the flow is Hamiltonian for the self-dual grid energy.
        """
        d, a_cell, avg = self.cell_operator(u)
        x = np.zeros_like(u)
        rd = self.rc * d
        x[1:] += rd
        x[:-1] -= rd
        half = 0.5 * self.h * (self.m + a_cell) * d
        x[1:] -= half
        x[:-1] -= half
        # A_theta variation: S_j = sum_{c >= j} h_c Re(conj(D_c) avg_c)
        cells = self.h * (d.conjugate() * avg).real
        s = np.zeros(u.shape, dtype=float)
        s[:-1] = np.cumsum(cells[::-1])[::-1]
        g = x * self.inv_wr + s * u
        g[0] = 0.0
        return g

    def rhs(self, u: np.ndarray) -> np.ndarray:
        return -1j * self.gradient(u)

    def step(self, u: np.ndarray, dt: float, backend: str = "auto") -> np.ndarray:
        """One RK4 step on raw values with the chosen backend."""
        if resolve_backend(backend) == "numba":
            return _kernels.rk4(u, dt, float(self.m), self.h, self.inv_h, self.rc, self.inv_rc, self.wr, self.inv_wr)
        return rk4_values(self, u, dt)


def resolve_backend(backend: str) -> str:
    """``auto`` picks numba when it imports, numpy otherwise."""
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {backend!r}")
    if backend == "auto":
        return "numba" if _kernels is not None else "numpy"
    if backend == "numba" and _kernels is None:
        raise ValueError("backend 'numba' requested but numba is not installed")
    return backend


def rhs(u: EquivariantField, stencil: Stencil | None = None) -> EquivariantField:
    """``du/dt`` for the snapshot ``u``; gauge potentials recomputed from ``u``.

    Raises
    ------
    InstabilityError
        If the result is not finite.
    """
    stencil = stencil or Stencil(u.grid, u.m)
    with np.errstate(all="ignore"):
        out = stencil.rhs(u.values)
    if not np.all(np.isfinite(out)):
        raise InstabilityError("non-finite right-hand side")
    return u.with_values(out)


def cfl_dt(grid: RadialGrid, c_cfl: float = C_CFL) -> float:
    """``c_cfl * h_min**2``."""
    return c_cfl * grid.h_min**2


def rk4_values(stencil: Stencil, u: np.ndarray, dt: float) -> np.ndarray:
    f = stencil.rhs
    k1 = f(u)
    k2 = f(u + 0.5 * dt * k1)
    k3 = f(u + 0.5 * dt * k2)
    k4 = f(u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(u: EquivariantField, dt: float, stencil: Stencil | None = None) -> EquivariantField:
    """One classical RK4 step (``dt`` may be negative).

    Raises
    ------
    InstabilityError
        On non-finite values.
    """
    stencil = stencil or Stencil(u.grid, u.m)
    with np.errstate(all="ignore"):
        out = rk4_values(stencil, u.values, dt)
    if not np.all(np.isfinite(out)):
        raise InstabilityError("non-finite values after RK4 step")
    return u.with_values(out)


@dataclass
class EvolutionConfig:
    m: int = 1
    R_max: float = 32.0
    N: int = 2048
    stretch: float = 1.0
    dt: float | str = "auto"
    c_cfl: float = C_CFL
    t_start: float = 0.0
    t_end: float = 1.0
    monitor_every: int = 100
    cutoff_R: tuple = ()
    tail_R: tuple = ()
    store_snapshots: bool = True
    fit: bool = False
    min_core_nodes: int = 8
    backend: str = "auto"

    def __post_init__(self):
        resolve_backend(self.backend)
        if self.t_end == self.t_start:
            raise ValueError("t_end must differ from t_start")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError(f"dt must be positive or 'auto', got {self.dt!r}")
        if int(self.monitor_every) < 1:
            raise ValueError("monitor_every must be >= 1")
        self.cutoff_R = tuple(float(x) for x in self.cutoff_R)
        self.tail_R = tuple(float(x) for x in self.tail_R)

    def make_grid(self) -> RadialGrid:
        return make_grid(self.R_max, self.N, self.stretch)

    def time_steps(self, grid: RadialGrid) -> tuple[int, float]:
        """Step count and signed step that land exactly on ``t_end``."""
        dt = cfl_dt(grid, self.c_cfl) if self.dt == "auto" else float(self.dt)
        span = self.t_end - self.t_start
        n = max(1, math.ceil(abs(span) / dt - 1e-9))
        return n, span / n


@dataclass
class MonitorRecord:
    t: float
    report: ConservedReport
    tail_mass: dict
    localized_virial: dict
    fit: object | None = None


@dataclass
class TrajectoryRecord:
    times: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    status: str = COMPLETED
    message: str = ""
    steps: int = 0
    dt: float = 0.0

    @property
    def observables(self) -> list:
        return [mon.report for mon in self.monitors]

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(mon.report, name) for mon in self.monitors])


def evolve(config: EvolutionConfig, u0: EquivariantField, *, fitter=None) -> TrajectoryRecord:
    """Integrate from ``t_start`` to ``t_end`` and record monitors.

    ``fitter`` (optional) maps ``(u, previous_fit)`` to a modulation fit; when
    given, the run stops with ``blowup_underresolved`` once the fitted scale
    spans fewer than ``min_core_nodes`` nodes.  A partial record is returned
    on instability.
    """
    grid = u0.grid
    if u0.m != config.m:
        raise ValueError(f"initial data has m={u0.m}, config m={config.m}")
    stencil = Stencil(grid, config.m)
    n_steps, dt = config.time_steps(grid)
    cutoffs = {R: make_cutoffs(grid, R) for R in config.cutoff_R}
    record = TrajectoryRecord(dt=dt)
    u = u0.values.copy()
    u[0] = 0.0
    prev_fit = None

    def monitor(t, values):
        nonlocal prev_fit
        snap = u0.with_values(values)
        fit = None
        if fitter is not None:
            fit = fitter(snap, prev_fit)
            prev_fit = fit
        record.times.append(t)
        record.monitors.append(
            MonitorRecord(
                t=t,
                report=conserved_report(snap),
                tail_mass={R: tail_mass(snap, R) for R in config.tail_R},
                localized_virial={R: localized_virial(snap, c) for R, c in cutoffs.items()},
                fit=fit,
            )
        )
        if config.store_snapshots:
            record.snapshots.append(values.copy())
        if fit is not None and fit.lam < config.min_core_nodes * _local_spacing(grid, fit.lam):
            return False
        return True

    every = int(config.monitor_every)
    if not monitor(config.t_start, u):
        record.status = BLOWUP_UNDERRESOLVED
        return record
    with np.errstate(all="ignore"):
        for k in range(1, n_steps + 1):
            u = stencil.step(u, dt, config.backend)
            record.steps = k
            if k % every == 0 or k == n_steps:
                if not np.all(np.isfinite(u)):
                    record.status = INSTABILITY_DETECTED
                    record.message = f"non-finite values by step {k}"
                    log.warning(record.message)
                    return record
                t = config.t_start + k * dt
                if k == n_steps:
                    t = config.t_end
                if not monitor(t, u):
                    record.status = BLOWUP_UNDERRESOLVED
                    record.message = f"core scale under-resolved at t={t:.6g}"
                    log.info(record.message)
                    return record
    return record


def _local_spacing(grid: RadialGrid, r: float) -> float:
    k = min(int(np.searchsorted(grid.nodes, r)), grid.N - 1)
    return float(grid.spacing[max(k - 1, 0)])
