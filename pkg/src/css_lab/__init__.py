"""Numerical laboratory for the equivariant self-dual Chern-Simons-Schroedinger equation."""
from .grid import (
    EquivariantField,
    RadialGrid,
    d_dr,
    h1m_norm,
    h1m_seminorm,
    inner_product,
    integrate_planar,
    make_grid,
)
from .gauge import GaugeData, a_t, a_theta, bogomolnyi, covariant_D, gauge_data, linearized_LQ
from .observables import (
    ConservedReport,
    CutoffFamily,
    EnergyTerms,
    conserved_report,
    energy_direct,
    energy_selfdual,
    energy_terms,
    localized_energy,
    localized_virial,
    make_cutoffs,
    mass,
    tail_mass,
    variance,
    virial,
)
from .solutions import (
    SymmetryParams,
    apply_phase,
    apply_scaling,
    blowup_profile,
    lambda_Q,
    pseudoconformal,
    soliton,
    soliton_mass,
    soliton_tail_mass,
    tilde_Q,
)
from .evolution import EvolutionConfig, InstabilityError, TrajectoryRecord, cfl_dt, evolve, rhs, step_rk4
from .modulation import (
    ModulationFit,
    ProfilePair,
    coercivity_ratio,
    decompose,
    lq_spectral_bounds,
    lq_spectral_gap,
    make_profiles,
    project_orthogonal,
    synthesize,
)

__version__ = "0.1.0"
