"""Scenario runner, configuration and report emission.

A scenario run produces

* ``rows``: one dict per monitor time with the series columns,
* ``snapshots``: field samples at monitor times (when stored),
* ``tables``: per-trial tables of the randomized sweeps,

and :func:`summarize` derives every summary metric from those three alone, so
re-reading the emitted files reproduces the summary exactly.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evolution import (
    BLOWUP_UNDERRESOLVED,
    COMPLETED,
    INSTABILITY_DETECTED,
    BACKENDS,
    EvolutionConfig,
    evolve,
    resolve_backend,
)
from .grid import EquivariantField, RadialGrid, make_grid, planar_norm, trapezoid_weights
from .modulation import (
    ALPHA_STAR,
    NEWTON_TOL,
    ModulationError,
    coercivity_ratio,
    decompose,
    lq_spectral_bounds,
    make_profiles,
    project_orthogonal,
    synthesize,
)
from .observables import mass
from .solutions import SymmetryParams, blowup_profile, soliton, soliton_mass, soliton_tail_mass

log = logging.getLogger(__name__)

SCENARIOS = (
    "soliton_static",
    "blowup_track",
    "subthreshold_scatter",
    "virial_check",
    "coercivity_sweep",
    "spectral_gap",
    "liouville_diagnostic",
)
EVOLUTION_SCENARIOS = frozenset(SCENARIOS) - {"coercivity_sweep", "spectral_gap"}
INITIAL_DATA = ("Q", "bump", "blowup")

EXIT_OK = 0
EXIT_INSTABILITY = 1
EXIT_CONFIG = 2

MAX_DENSE_N = 512


class ConfigError(ValueError):
    """Invalid or incomplete scenario configuration."""


@dataclass
class ScenarioConfig:
    """Flat scenario configuration; every field is a JSON scalar or list."""

    scenario: str = "soliton_static"
    m: int = 1
    R_max: float = 32.0
    N: int = 2048
    stretch: float = 1.0
    t_start: float = 0.0
    t_end: float = 1.0
    dt: float | str = "auto"
    c_cfl: float = 0.2
    tail_R: list = field(default_factory=list)
    cutoff_R: list = field(default_factory=list)
    monitor_every: int = 100
    seed: int = 0
    out_dir: str = "runs"
    store_snapshots: bool = False
    fit: bool = False
    alpha_star: float = ALPHA_STAR
    newton_tol: float = NEWTON_TOL
    backend: str = "auto"
    initial: str = "Q"
    mass_fraction: float = 0.5
    bump_chirp: float = 0.0
    trials: int = 100
    eps_size: float = 0.01
    gap_N: list = field(default_factory=lambda: [128, 256, 512])
    eta: list = field(default_factory=lambda: [1e-2, 1e-3])

    @classmethod
    def from_mapping(cls, data: dict) -> "ScenarioConfig":
        """Defaults, then the scenario preset, then ``data``."""
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        scenario = data.get("scenario", cls.scenario)
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
        merged = {**PRESETS.get(scenario, {}), **data, "scenario": scenario}
        try:
            cfg = cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
        return cls.from_mapping(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.m, int) and not isinstance(self.m, bool) and self.m >= 1, "m must be an integer >= 1")
        need(_finite(self.R_max) and self.R_max > 0, "R_max must be positive")
        need(isinstance(self.N, int) and self.N >= 16, "N must be an integer >= 16")
        need(_finite(self.stretch) and self.stretch >= 1, "stretch must be >= 1")
        need(self.dt == "auto" or (_finite(self.dt) and self.dt > 0), "dt must be 'auto' or positive")
        need(_finite(self.c_cfl) and self.c_cfl > 0, "c_cfl must be positive")
        need(isinstance(self.monitor_every, int) and self.monitor_every >= 1, "monitor_every must be >= 1")
        need(isinstance(self.seed, int), "seed must be an integer")
        for name in ("tail_R", "cutoff_R", "gap_N", "eta"):
            need(isinstance(getattr(self, name), list), f"{name} must be a list")
        need(all(_finite(R) and R > 0 for R in self.tail_R), "tail_R entries must be positive")
        need(all(_finite(R) and R > 0 for R in self.cutoff_R), "cutoff_R entries must be positive")
        for R in self.cutoff_R:
            need(R >= self.R_max or 2 * R <= self.R_max,
                 f"cutoff_R {R} needs its bridge [R, 2R] inside R_max = {self.R_max}")
        need(self.initial in INITIAL_DATA, f"initial must be one of {INITIAL_DATA}")
        need(_finite(self.newton_tol) and self.newton_tol > 0, "newton_tol must be positive")
        need(self.backend in BACKENDS, f"backend must be one of {BACKENDS}")
        try:
            resolve_backend(self.backend)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        if self.scenario in EVOLUTION_SCENARIOS:
            need(_finite(self.t_start) and _finite(self.t_end) and self.t_end != self.t_start,
                 "t_start and t_end must be finite and different")
        if self.scenario == "blowup_track" or (self.scenario == "liouville_diagnostic" and self.initial == "blowup"):
            need(self.t_start < self.t_end < 0, "blowup data needs t_start < t_end < 0")
        if self.scenario == "blowup_track":
            need(self.initial == "blowup", "blowup_track compares against the exact blowup solution; initial must be 'blowup'")
        if self.scenario in ("subthreshold_scatter", "virial_check") or self.initial == "bump":
            need(_finite(self.mass_fraction) and 0 < self.mass_fraction, "mass_fraction must be positive")
            need(_finite(self.bump_chirp), "bump_chirp must be finite")
        if self.scenario == "subthreshold_scatter":
            need(self.mass_fraction < 1, "sub-threshold data needs mass_fraction < 1")
            need(8.0 in [float(R) for R in self.tail_R], "subthreshold_scatter monitors tail_mass at R = 8")
        if self.scenario == "coercivity_sweep":
            need(isinstance(self.trials, int) and self.trials >= 1, "trials must be >= 1")
            need(_finite(self.eps_size) and 0 < self.eps_size <= 0.1, "eps_size must lie in (0, 0.1]")
        if self.scenario == "spectral_gap":
            need(len(self.gap_N) >= 1, "gap_N must list at least one size")
            need(all(isinstance(n, int) and 16 <= n <= MAX_DENSE_N for n in self.gap_N),
                 f"gap_N entries must be integers in [16, {MAX_DENSE_N}]")
        if self.scenario == "liouville_diagnostic":
            need(len(self.tail_R) >= 1, "liouville_diagnostic needs a tail_R ladder")
            need(len(self.eta) >= 1 and all(_finite(e) and e > 0 for e in self.eta), "eta must list positive values")
        if self.scenario in ("coercivity_sweep", "spectral_gap", "blowup_track") or self.fit:
            need(self.R_max >= 8.0, "modulation profiles need R_max >= 8")

    def grid(self, N: int | None = None) -> RadialGrid:
        return make_grid(self.R_max, N or self.N, self.stretch)

    def evolution(self) -> EvolutionConfig:
        return EvolutionConfig(
            m=self.m,
            R_max=self.R_max,
            N=self.N,
            stretch=self.stretch,
            dt=self.dt,
            c_cfl=self.c_cfl,
            t_start=self.t_start,
            t_end=self.t_end,
            monitor_every=self.monitor_every,
            cutoff_R=tuple(self.cutoff_R),
            tail_R=tuple(self.tail_R),
            store_snapshots=self.store_snapshots,
            backend=self.backend,
        )


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


# Scenario presets; only what differs from the general defaults.
PRESETS = {
    "soliton_static": dict(stretch=4.0, t_start=0.0, t_end=1.0, monitor_every=2000, store_snapshots=True),
    "blowup_track": dict(stretch=4.0, t_start=-1.0, t_end=-0.125, monitor_every=2000,
                         store_snapshots=True, fit=True, initial="blowup"),
    "subthreshold_scatter": dict(t_start=0.0, t_end=2.0, monitor_every=500, tail_R=[8.0],
                                 store_snapshots=True, initial="bump", mass_fraction=0.5),
    "virial_check": dict(t_start=0.0, t_end=0.5, monitor_every=200, initial="bump",
                         mass_fraction=0.7, bump_chirp=0.5),
    "coercivity_sweep": dict(),
    "spectral_gap": dict(R_max=16.0),
    "liouville_diagnostic": dict(stretch=4.0, t_start=0.0, t_end=1.0, monitor_every=2000,
                                 tail_R=[4.0, 8.0, 16.0], fit=True),
}


# -- initial data --------------------------------------------------------------


def bump_profile(m: int, grid: RadialGrid, amplitude: float, chirp: float = 0.0) -> EquivariantField:
    """``A r^m exp(-r^2) exp(i b r^2)``."""
    r = grid.nodes
    return EquivariantField(grid, amplitude * r**m * np.exp(-(r**2)) * np.exp(1j * chirp * r**2), m)


def bump_with_mass(m: int, grid: RadialGrid, target: float, chirp: float = 0.0, *, rtol: float = 1e-13) -> EquivariantField:
    """Bump whose grid mass equals ``target``; amplitude found by bisection."""
    if not target > 0:
        raise ValueError("target mass must be positive")
    lo, hi = 0.0, 1.0
    while mass(bump_profile(m, grid, hi, chirp)) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass(bump_profile(m, grid, mid, chirp)) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return bump_profile(m, grid, 0.5 * (lo + hi), chirp)


def initial_data(config: ScenarioConfig, grid: RadialGrid) -> EquivariantField:
    if config.initial == "Q":
        return soliton(config.m, grid)
    if config.initial == "blowup":
        return blowup_profile(config.m, config.t_start, grid)
    target = config.mass_fraction * soliton_mass(config.m)
    return bump_with_mass(config.m, grid, target, config.bump_chirp)


# -- reports -------------------------------------------------------------------


def series_columns(config: ScenarioConfig) -> list[str]:
    cols = ["t", "mass", "energy_direct", "energy_selfdual", "virial", "variance"]
    cols += [f"tail_mass_R{float(R):g}" for R in config.tail_R]
    cols += [f"localized_virial_R{float(R):g}" for R in config.cutoff_R]
    cols += ["lambda_fit", "gamma_fit", "eps_l2", "eps_h1m"]
    return cols


@dataclass
class Snapshot:
    r: np.ndarray
    values: np.ndarray


@dataclass
class RunReport:
    config: dict
    rows: list
    summary: dict
    status: str
    wall_time: float
    snapshots: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    columns: list = field(default_factory=list)
    message: str = ""

    @property
    def exit_code(self) -> int:
        return EXIT_INSTABILITY if self.status == INSTABILITY_DETECTED else EXIT_OK


def run_scenario(config: ScenarioConfig) -> RunReport:
    """Run one scenario; the returned report carries rows, snapshots and summary."""
    config.validate()
    start = time.perf_counter()
    rows: list = []
    snapshots: list = []
    tables: dict = {}
    status, message = COMPLETED, ""
    if config.scenario in EVOLUTION_SCENARIOS:
        rows, snapshots, status, message = _run_evolution(config)
    elif config.scenario == "coercivity_sweep":
        tables = _run_coercivity(config)
    elif config.scenario == "spectral_gap":
        tables = _run_gaps(config)
    summary = summarize(config, rows, snapshots, tables)
    return RunReport(
        config=config.to_dict(),
        rows=rows,
        summary=summary,
        status=status,
        wall_time=time.perf_counter() - start,
        snapshots=snapshots,
        tables=tables,
        columns=series_columns(config),
        message=message,
    )


def _run_evolution(config: ScenarioConfig):
    grid = config.grid()
    u0 = initial_data(config, grid)
    fitter = None
    if config.fit or config.scenario == "blowup_track":
        profiles = make_profiles(config.m, grid)
        t_ref = config.t_start

        def fitter(u, prev):
            if prev is None:
                lam0 = abs(t_ref) if config.initial == "blowup" or config.scenario == "blowup_track" else 1.0
                guess = SymmetryParams(lam=lam0)
            else:
                guess = prev.params
            try:
                return decompose(u, guess, profiles=profiles, tol=config.newton_tol)
            except ModulationError as exc:
                log.warning("modulation fit failed: %s", exc)
                return None

    evo = config.evolution()
    record = evolve(evo, u0, fitter=fitter)
    rows = []
    for mon in record.monitors:
        rep = mon.report
        row = {
            "t": float(mon.t),
            "mass": rep.mass,
            "energy_direct": rep.energy_direct,
            "energy_selfdual": rep.energy_selfdual,
            "virial": rep.virial,
            "variance": rep.variance,
        }
        for R in config.tail_R:
            row[f"tail_mass_R{float(R):g}"] = float(mon.tail_mass[float(R)])
        for R in config.cutoff_R:
            row[f"localized_virial_R{float(R):g}"] = float(mon.localized_virial[float(R)])
        fit = mon.fit
        row["lambda_fit"] = fit.lam if fit is not None else None
        row["gamma_fit"] = fit.gamma if fit is not None else None
        row["eps_l2"] = fit.eps_l2 if fit is not None else None
        row["eps_h1m"] = fit.eps_h1m if fit is not None else None
        rows.append(row)
    snapshots = [Snapshot(grid.nodes.copy(), v) for v in record.snapshots]
    return rows, snapshots, record.status, record.message


def random_bump(rng: np.random.Generator, m: int, grid: RadialGrid) -> EquivariantField:
    """Smooth localized complex perturbation ``(a + b r) r^m exp(-(r - c)^2 / w)``."""
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
    c = rng.uniform(0.0, 3.0)
    w = rng.uniform(0.3, 3.0)
    r = grid.nodes
    return EquivariantField(grid, (a + b * r) * r**m * np.exp(-((r - c) ** 2) / w), m)


TRIAL_COLUMNS = [
    "trial", "lam_true", "gamma_true", "eps0_l2", "lam_fit", "gamma_fit",
    "lam_err", "gamma_err", "orth_residual", "converged", "ratio", "ratio_refined",
]
GAP_COLUMNS = ["N", "restrict", "gap_min", "gap_max"]


def _run_coercivity(config: ScenarioConfig) -> dict:
    from .grid import h1m_seminorm

    grid = config.grid()
    fine = config.grid(2 * config.N - 1)
    profiles = make_profiles(config.m, grid)
    profiles_fine = make_profiles(config.m, fine)
    rng = np.random.default_rng(config.seed)
    rows = []
    for k in range(config.trials):
        lam_true = float(np.exp(rng.uniform(np.log(0.5), np.log(2.0))))
        gamma_true = float(rng.uniform(0.0, 2.0 * np.pi))
        size = float(rng.uniform(0.0, config.eps_size))
        state = rng.bit_generator.state
        shape, _ = project_orthogonal(random_bump(rng, config.m, grid), profiles)
        eps0 = shape * (size / planar_norm(shape.values, grid))
        u = synthesize(eps0, lam_true, gamma_true)
        fit = decompose(u, SymmetryParams(), profiles=profiles, tol=config.newton_tol)
        dgamma = float(np.angle(np.exp(1j * (fit.gamma - gamma_true))))
        # coercivity on the same random shape at both resolutions
        ratios = []
        for g, prof in ((grid, profiles), (fine, profiles_fine)):
            rng_k = np.random.default_rng()
            rng_k.bit_generator.state = state
            eps, _ = project_orthogonal(random_bump(rng_k, config.m, g), prof)
            eps = eps * (config.eps_size / h1m_seminorm(eps))
            ratios.append(coercivity_ratio(eps, profiles=prof))
        rows.append({
            "trial": k,
            "lam_true": lam_true,
            "gamma_true": gamma_true,
            "eps0_l2": size,
            "lam_fit": fit.lam,
            "gamma_fit": fit.gamma,
            "lam_err": abs(fit.lam / lam_true - 1.0),
            "gamma_err": abs(dgamma),
            "orth_residual": float(max(abs(x) for x in fit.orth_residuals)),
            "converged": int(fit.converged),
            "ratio": float(ratios[0]),
            "ratio_refined": float(ratios[1]),
        })
    return {"trials": (TRIAL_COLUMNS, rows)}


def _run_gaps(config: ScenarioConfig) -> dict:
    rows = []
    for n in config.gap_N:
        grid = config.grid(int(n))
        profiles = make_profiles(config.m, grid)
        for restrict in ("both", "Z1", "Z2", "none"):
            lo, hi = lq_spectral_bounds(config.m, grid, profiles, restrict=restrict)
            rows.append({"N": int(n), "restrict": restrict, "gap_min": lo, "gap_max": hi})
    return {"gaps": (GAP_COLUMNS, rows)}


# -- summaries -----------------------------------------------------------------


def _col(rows: list, name: str) -> np.ndarray:
    return np.array([np.nan if row.get(name) is None else float(row[name]) for row in rows])


def _rel_drift(x: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(x - x[0])) / scale) if x.size else 0.0


def _snapshot_grid(snap: Snapshot) -> RadialGrid:
    r = np.asarray(snap.r, dtype=float)
    return RadialGrid(nodes=r, weights=trapezoid_weights(r))


def rate_violations(rows: list, R_max: float) -> dict:
    """Centered-difference checks ``dV/dt = 4E`` and ``d Var/dt = 4V`` on monitor rows.

    Interior rows only, with the three-point formula of ``numpy.gradient``; it
    stays second order when the last monitor interval is short.  Errors are normalized by the peak of the right-hand side over the run, with
    the energy floor ``M^2 / R_max^2`` (and the same floor for the virial) so
    that trajectories with vanishing energy are not divided by zero.
    """
    t = _col(rows, "t")
    if t.size < 3:
        return {"virial_rate_error": None, "variance_rate_error": None}
    E = _col(rows, "energy_direct")
    V = _col(rows, "virial")
    Var = _col(rows, "variance")
    M = _col(rows, "mass")
    floor = float(M[0] ** 2 / R_max**2)
    dV = np.gradient(V, t)[1:-1]
    dVar = np.gradient(Var, t)[1:-1]
    err_v = np.max(np.abs(dV - 4.0 * E[1:-1])) / max(np.max(np.abs(4.0 * E)), floor)
    err_var = np.max(np.abs(dVar - 4.0 * V[1:-1])) / max(np.max(np.abs(4.0 * V)), floor)
    return {"virial_rate_error": float(err_v), "variance_rate_error": float(err_var)}


def _conservation(rows: list, R_max: float) -> dict:
    M = _col(rows, "mass")
    E = _col(rows, "energy_direct")
    if not M.size:
        return {}
    return {
        "mass_drift": _rel_drift(M, abs(M[0])),
        "energy_drift": _rel_drift(E, max(abs(E[0]), M[0] ** 2 / R_max**2)),
    }


def _first_increasing_index(x: np.ndarray) -> int | None:
    """Smallest ``k`` such that ``x[k:]`` is strictly increasing."""
    if x.size < 2:
        return None
    k = x.size - 1
    while k > 0 and x[k - 1] < x[k]:
        k -= 1
    return k if k < x.size - 1 else None


def summarize(config: ScenarioConfig, rows: list, snapshots: list, tables: dict) -> dict:
    """Summary metrics; a pure function of the emitted rows, snapshots and tables."""
    sc = config.scenario
    out: dict = {"monitors": len(rows)}
    if rows:
        out["t_final"] = float(rows[-1]["t"])
        out.update(_conservation(rows, config.R_max))
        out.update(rate_violations(rows, config.R_max))
    if sc == "soliton_static" and snapshots:
        grid = _snapshot_grid(snapshots[0])
        Q = soliton(config.m, grid).values
        nq = planar_norm(Q, grid)
        out["max_deviation"] = max(planar_norm(s.values - Q, grid) / nq for s in snapshots)
    elif sc == "blowup_track":
        if snapshots:
            grid = _snapshot_grid(snapshots[0])
            errs = []
            for row, s in zip(rows, snapshots):
                exact = blowup_profile(config.m, float(row["t"]), grid).values
                errs.append(planar_norm(s.values - exact, grid) / planar_norm(exact, grid))
            out["max_oracle_error"] = float(max(errs))
            out["final_oracle_error"] = float(errs[-1])
        lam = _col(rows, "lambda_fit")
        t = _col(rows, "t")
        ok = np.isfinite(lam)
        # inverse fitted scale against 1/|t|
        out["max_scale_error"] = float(np.max(np.abs(np.abs(t[ok]) / lam[ok] - 1.0))) if ok.any() else None
    elif sc == "subthreshold_scatter":
        if snapshots:
            sup = [float(np.max(np.abs(s.values))) for s in snapshots]
            out["sup_initial"] = sup[0]
            out["sup_final"] = sup[-1]
            out["sup_decay_factor"] = sup[0] / sup[-1]
        tail = _col(rows, "tail_mass_R8")
        k = _first_increasing_index(tail)
        out["tail_monotone_from_t"] = None if k is None else float(rows[k]["t"])
        out["tail_growth"] = float(tail[-1] - tail[0]) if tail.size else None
    elif sc == "liouville_diagnostic":
        mono = {}
        for R in config.tail_R:
            tail = _col(rows, f"tail_mass_R{float(R):g}")
            sup = float(np.max(tail))
            mono[f"R{float(R):g}"] = {
                "sup_tail_mass": sup,
                "below_eta": {f"{e:g}": bool(sup <= e) for e in config.eta},
            }
            if config.initial == "Q":
                mono[f"R{float(R):g}"]["q_tail_bound"] = soliton_tail_mass(config.m, R)
        out["tail"] = mono
        eps = _col(rows, "eps_l2")
        ok = np.isfinite(eps)
        if ok.any():
            e = eps[ok]
            out["eps_max"] = float(np.max(e))
            out["eps_min"] = float(np.min(e))
            out["eps_final"] = float(e[-1])
            # decaying if the last third sits below half of the first third
            third = max(1, e.size // 3)
            out["eps_trend"] = "decaying" if np.mean(e[-third:]) < 0.5 * np.mean(e[:third]) else "bounded"
    elif sc == "coercivity_sweep" and "trials" in tables:
        trows = tables["trials"][1]
        ratio = _col(trows, "ratio")
        fine = _col(trows, "ratio_refined")
        out.update({
            "trials": len(trows),
            "max_lam_err": float(np.max(_col(trows, "lam_err"))),
            "max_gamma_err": float(np.max(_col(trows, "gamma_err"))),
            "max_orth_residual": float(np.max(_col(trows, "orth_residual"))),
            "all_converged": bool(np.all(_col(trows, "converged") == 1)),
            "c1": float(np.min(ratio)),
            "c2": float(np.max(ratio)),
            "band_ratio": float(np.max(ratio) / np.min(ratio)),
            "c1_refined": float(np.min(fine)),
            "c2_refined": float(np.max(fine)),
            "band_refinement_change": float(max(abs(np.min(fine) / np.min(ratio) - 1.0),
                                                abs(np.max(fine) / np.max(ratio) - 1.0))),
        })
    elif sc == "spectral_gap" and "gaps" in tables:
        grows = tables["gaps"][1]
        gaps = {int(r["N"]): float(r["gap_min"]) for r in grows if r["restrict"] == "both"}
        free = {int(r["N"]): float(r["gap_min"]) for r in grows if r["restrict"] == "none"}
        single = {(int(r["N"]), r["restrict"]): float(r["gap_min"]) for r in grows if r["restrict"] in ("Z1", "Z2")}
        vals = np.array(list(gaps.values()))
        out["gap"] = {str(n): g for n, g in gaps.items()}
        out["gap_spread"] = float((vals.max() - vals.min()) / vals.min()) if vals.size else None
        out["upper"] = {str(int(r["N"])): float(r["gap_max"]) for r in grows if r["restrict"] == "both"}
        # collapse factor gap / unrestricted minimum; inf when the latter is exactly zero
        out["collapse_factor"] = {
            str(n): (gaps[n] / free[n] if free[n] > 0 else math.inf) for n in gaps
        }
        out["single_restriction"] = {f"{n}_{k}": v for (n, k), v in single.items()}
    return out


# -- emission ------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(columns: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def emit_reports(report: RunReport, out_dir) -> list[Path]:
    """Write ``run.json``, ``series.csv`` and the optional snapshot and table files.

    Raises
    ------
    OSError
        If ``out_dir`` cannot be created or written.
    """
    out = Path(out_dir)
    written = []
    meta = {
        "config": report.config,
        "summary": _json_safe(report.summary),
        "status": report.status,
        "message": report.message,
        "wall_time": report.wall_time,
    }
    path = out / "series.csv"
    _atomic_write(path, _csv_text(report.columns, report.rows))
    written.append(path)
    for k, snap in enumerate(report.snapshots):
        rows = [{"r": r, "re_u": v.real, "im_u": v.imag} for r, v in zip(snap.r, snap.values)]
        path = out / "snapshots" / f"snapshot_{k:05d}.csv"
        _atomic_write(path, _csv_text(["r", "re_u", "im_u"], rows))
        written.append(path)
    for name, (columns, rows) in sorted(report.tables.items()):
        path = out / f"{name}.csv"
        _atomic_write(path, _csv_text(columns, rows))
        written.append(path)
    path = out / "run.json"
    _atomic_write(path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


# -- re-ingestion ----------------------------------------------------------------


def _parse(v: str):
    if v == "":
        return None
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def read_snapshots(out_dir) -> list[Snapshot]:
    snaps = []
    for path in sorted(Path(out_dir, "snapshots").glob("snapshot_*.csv")):
        rows = read_table(path)
        r = np.array([float(x["r"]) for x in rows])
        v = np.array([float(x["re_u"]) + 1j * float(x["im_u"]) for x in rows])
        snaps.append(Snapshot(r, v))
    return snaps


def load_run(out_dir) -> tuple[ScenarioConfig, list, list, dict, dict]:
    """Parse an emitted run back into ``(config, rows, snapshots, tables, summary)``."""
    out = Path(out_dir)
    meta = json.loads((out / "run.json").read_text())
    config = ScenarioConfig.from_mapping(meta["config"])
    rows = read_table(out / "series.csv")
    for row in rows:
        row["t"] = float(row["t"])
    tables = {}
    for name, columns in (("trials", TRIAL_COLUMNS), ("gaps", GAP_COLUMNS)):
        if (out / f"{name}.csv").exists():
            tables[name] = (columns, read_table(out / f"{name}.csv"))
    return config, rows, read_snapshots(out), tables, meta["summary"]
