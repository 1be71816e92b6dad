"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The evolution criteria run full scenarios (several minutes in total with the
compiled backend).
"""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from css_lab.grid import make_grid
from css_lab.harness import ScenarioConfig, random_bump, run_scenario
from css_lab.observables import energy_direct, energy_selfdual, mass, variance
from css_lab.solutions import blowup_profile, soliton, soliton_mass

MODES = (1, 2, 3)


def _monitor_every(cfg: ScenarioConfig, count: int) -> int:
    n, _ = cfg.evolution().time_steps(cfg.grid())
    return max(1, n // count)


def _blowup_config(N: int) -> ScenarioConfig:
    # m = 2 decays like r^-4, so R_max = 16 keeps the truncation floor well
    # below the threshold; m = 1 needs R_max = 64 and several times the work
    base = dict(scenario="blowup_track", m=2, R_max=16.0, N=N, stretch=4.0, t_end=-0.25)
    cfg = ScenarioConfig.from_mapping(base)
    return ScenarioConfig.from_mapping({**base, "monitor_every": _monitor_every(cfg, 30)})


@pytest.fixture(scope="module")
def soliton_run():
    return run_scenario(ScenarioConfig.from_mapping({"scenario": "soliton_static"}))


@pytest.fixture(scope="module")
def blowup_runs():
    return {N: run_scenario(_blowup_config(N)) for N in (1024, 2048, 4096)}


def test_c01_vortex_mass(verdict):
    g = make_grid(64.0, 4096)
    errs = [abs(mass(soliton(m, g)) / soliton_mass(m) - 1.0) for m in MODES]
    verdict(1, max(errs) <= 1e-6, "max relative mass error %.2e (m = 1, 2, 3)" % max(errs))


def test_c02_self_duality(verdict):
    ok, worst, worst_ratio = True, 0.0, np.inf
    for m in MODES:
        M = soliton_mass(m)
        for form in (energy_direct, energy_selfdual):
            vals = [abs(form(soliton(m, make_grid(64.0, N)))) for N in (1024, 2048, 4096)]
            scaled = vals[-1] / (M**2 / 64.0)
            ratios = [vals[0] / vals[1], vals[1] / vals[2]]
            worst = max(worst, scaled)
            worst_ratio = min(worst_ratio, *ratios)
            ok &= scaled <= 1e-6 and min(ratios) >= 3.5
    verdict(2, ok, "max E/(M^2/R_max) %.2e, min refinement ratio %.1f (h^2 needs 4)" % (worst, worst_ratio))


def test_c03_energy_forms_agree(verdict):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(20):
        m = int(rng.integers(1, 4))
        g = make_grid(32.0, 2048, float(rng.uniform(1.0, 4.0)))
        u = random_bump(rng, m, g) * float(rng.uniform(0.2, 3.0))
        Ed, Es = energy_direct(u), energy_selfdual(u)
        scale = abs(Ed) + mass(u) ** 2 / g.R_max**2
        worst = max(worst, abs(Ed - Es) / scale)
    verdict(3, worst <= 1e-5, "max |E_direct - E_selfdual| / (|E| + M^2/R^2) = %.2e over 20 fields" % worst)


def test_c04_soliton_staticity(verdict, soliton_run):
    s = soliton_run.summary
    ok = (soliton_run.status == "completed" and s["t_final"] == 1.0 and s["max_deviation"] <= 1e-4
          and s["mass_drift"] <= 1e-6 and s["energy_drift"] <= 1e-5)
    verdict(4, ok, "deviation %.2e, mass drift %.2e, energy drift %.2e (%.0f s)"
            % (s["max_deviation"], s["mass_drift"], s["energy_drift"], soliton_run.wall_time))


def test_c05_blowup_oracle(verdict, blowup_runs):
    errs = {N: r.summary["final_oracle_error"] for N, r in blowup_runs.items()}
    scale = max(r.summary["max_scale_error"] for r in blowup_runs.values())
    done = all(r.status == "completed" and r.summary["t_final"] == -0.25 for r in blowup_runs.values())
    order = np.log2(errs[1024] / errs[2048])
    ok = done and errs[4096] <= 1e-3 and order >= 1.8 and errs[2048] / errs[4096] > 2.5 and scale <= 0.02
    verdict(5, ok, "error at t=-0.25: %.2e / %.2e / %.2e (N=1024/2048/4096), order %.2f, max |t|/lam - 1 = %.1e"
            % (errs[1024], errs[2048], errs[4096], order, scale))


def test_c05_blowup_preset_scale_fit(verdict):
    rep = run_scenario(ScenarioConfig.from_mapping({"scenario": "blowup_track"}))
    s = rep.summary
    ok = rep.status == "completed" and s["t_final"] == -0.125 and s["max_scale_error"] <= 0.02
    verdict(5, ok, "preset run to t=-0.125: max |t|/lam - 1 = %.1e" % s["max_scale_error"])


def test_c06_virial_and_variance_rates(verdict, soliton_run, blowup_runs):
    runs = {"soliton": soliton_run, "blowup N=4096": blowup_runs[4096]}
    worst = {k: max(r.summary["virial_rate_error"], r.summary["variance_rate_error"]) for k, r in runs.items()}
    verdict(6, max(worst.values()) <= 1e-3,
            ", ".join("%s %.2e" % kv for kv in worst.items()) + " (max relative rate error)")


def test_c07_variance_law(verdict):
    worst = 0.0
    for m in MODES:
        g = make_grid(64.0, 2**18, 4.0)
        for t in (-1.0, -0.5, -0.25):
            S = blowup_profile(m, t, g)
            worst = max(worst, abs(variance(S) / (8 * energy_direct(S) * t**2) - 1.0))
    verdict(7, worst <= 1e-6, "max relative error of Var = 8 E t^2: %.2e" % worst)


@pytest.fixture(scope="module")
def sweep():
    return run_scenario(ScenarioConfig.from_mapping({"scenario": "coercivity_sweep"}))


def test_c08_decomposition_recovery(verdict, sweep):
    cols, rows = sweep.tables["trials"]
    bad = [r for r in rows
           if r["lam_err"] > 1e-6 + r["eps0_l2"] ** 2 or r["gamma_err"] > 1e-6 + r["eps0_l2"] ** 2
           or r["orth_residual"] > 1e-10 or not r["converged"]]
    s = sweep.summary
    verdict(8, len(rows) == 100 and not bad,
            "%d trials, %d outside 1e-6 + |eps0|^2; max lam err %.1e, max gamma err %.1e, max orth residual %.1e"
            % (len(rows), len(bad), s["max_lam_err"], s["max_gamma_err"], s["max_orth_residual"]))


def test_c09_coercivity_and_gap(verdict, sweep):
    s = sweep.summary
    gap = run_scenario(ScenarioConfig.from_mapping({"scenario": "spectral_gap"})).summary
    gaps = [gap["gap"][k] for k in ("128", "256", "512")]
    collapse = min(gap["collapse_factor"].values())
    ok = (s["band_ratio"] <= 10 and s["band_refinement_change"] <= 0.05 and min(gaps) > 0
          and gap["gap_spread"] <= 0.05 and collapse >= 100)
    verdict(9, ok, "band [%.3f, %.3f] ratio %.2f, refinement change %.1e; gap %s spread %.1e, collapse %s"
            % (s["c1"], s["c2"], s["band_ratio"], s["band_refinement_change"],
               "/".join("%.4f" % x for x in gaps), gap["gap_spread"], collapse))


def test_c10_subthreshold_dispersion(verdict):
    rep = run_scenario(ScenarioConfig.from_mapping({"scenario": "subthreshold_scatter"}))
    s = rep.summary
    # "after an initial transient": the monotone stretch must start in the first half
    t0 = s["tail_monotone_from_t"]
    ok = (rep.status == "completed" and s["t_final"] == 2.0 and s["sup_decay_factor"] >= 2
          and t0 is not None and t0 <= 1.0 and s["tail_growth"] > 0)
    verdict(10, ok, "sup decay x%.2f, tail_mass(8) increasing from t=%s, growth %.3f"
            % (s["sup_decay_factor"], t0, s["tail_growth"]))


SMALL = {
    "soliton_static": {"N": 512, "t_end": 0.05, "monitor_every": 100, "tail_R": [4.0], "cutoff_R": [2.0]},
    "blowup_track": {"N": 512, "t_end": -0.9, "monitor_every": 100},
    "subthreshold_scatter": {"N": 512, "t_end": 0.1},
    "virial_check": {"N": 512, "t_end": 0.05, "monitor_every": 50},
    "coercivity_sweep": {"N": 512, "trials": 4, "seed": 11},
    "spectral_gap": {"gap_N": [64, 96]},
    "liouville_diagnostic": {"N": 512, "t_end": 0.05, "monitor_every": 100},
}


def test_c11_determinism(verdict, tmp_path):
    files = {"coercivity_sweep": "trials.csv", "spectral_gap": "gaps.csv"}
    differ = []
    for scenario, overrides in SMALL.items():
        cfg = tmp_path / f"{scenario}.json"
        cfg.write_text(json.dumps({"scenario": scenario, **overrides}))
        outputs = []
        for k, threads in enumerate(("1", "2", "1")):
            out = tmp_path / f"{scenario}_{k}"
            env = {**os.environ, "CSS_LAB_THREADS": threads}
            res = subprocess.run([sys.executable, "-m", "css_lab.cli", "--scenario", scenario,
                                  "--config", str(cfg), "--out", str(out)], env=env, capture_output=True)
            assert res.returncode == 0, res.stderr
            data = (out / "series.csv").read_bytes()
            if scenario in files:
                data += (out / files[scenario]).read_bytes()
            outputs.append(data)
        if len(set(outputs)) != 1:
            differ.append(scenario)
    verdict(11, not differ, "byte-identical outputs over 3 runs (thread caps 1, 2, 1) for %d scenarios%s"
            % (len(SMALL), "; differing: " + ", ".join(differ) if differ else ""))
