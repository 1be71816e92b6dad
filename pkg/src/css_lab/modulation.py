"""Modulation decomposition ``u = [Q + eps]_{lam, gamma}`` and coercivity checks.

The bracket is ``[f]_{lam, gamma}(r) = exp(i gamma) f(r / lam) / lam``.  The
remainder ``eps`` lives in the reference frame (``lam = 1``) and is fixed by
two orthogonality conditions ``(eps, Z1)_r = (eps, Z2)_r = 0`` in the real
pairing :func:`css_lab.grid.inner_product`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from threadpoolctl import threadpool_limits

from .grid import (
    EquivariantField,
    RadialGrid,
    _check_compatible,
    h1m_norm,
    h1m_seminorm,
    inner_product,
    planar_norm,
)
from .observables import energy_direct, step_down
from .solutions import SymmetryParams, apply_phase, apply_scaling, lambda_Q, sample_spline, soliton, spline

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
MAX_ITER = 50
FD_STEP = 1e-6
MAX_STEP = 0.5
ALPHA_STAR = 0.1
ETA = 0.1
# a tight cutoff keeps far-field phase structure (e.g. the pseudoconformal
# chirp) out of the orthogonality conditions
CUTOFF_INNER = 1.0
CUTOFF_OUTER = 2.0
SCAN_RANGE = 4.0
SCAN_POINTS = 41


class ModulationError(RuntimeError):
    """The Newton iteration left the admissible scale range."""


class DegenerateProfilesError(ValueError):
    """The orthogonality profiles do not fix the modulation parameters."""


@dataclass(frozen=True, eq=False)
class ProfilePair:
    """Orthogonality profiles and the determinant of their pairing matrix.

    ``matrix[i, j] = (Y_i, Z_j)_r`` with ``Y = (Lambda Q, i Q)`` the symmetry
    generators.  With cut-off generators as profiles the matrix is diagonal.
    """

    Z1: EquivariantField
    Z2: EquivariantField
    matrix: np.ndarray
    det_value: float

    @property
    def grid(self) -> RadialGrid:
        return self.Z1.grid


@dataclass(frozen=True, eq=False)
class ModulationFit:
    lam: float
    gamma: float
    eps: EquivariantField
    eps_l2: float
    eps_h1m: float
    orth_residuals: tuple
    converged: bool
    iterations: int

    @property
    def params(self) -> SymmetryParams:
        return SymmetryParams(lam=self.lam, gamma=self.gamma)


def generators(m: int, grid: RadialGrid) -> tuple[EquivariantField, EquivariantField]:
    """``(Lambda Q, i Q)``: derivatives of ``[Q]_{lam, gamma}`` at the identity (up to sign)."""
    Q = soliton(m, grid)
    return lambda_Q(m, grid), Q.with_values(1j * Q.values)


def make_profiles(m: int, grid: RadialGrid, *, inner: float = CUTOFF_INNER,
                  outer: float = CUTOFF_OUTER) -> ProfilePair:
    """``Z1 = chi LambdaQ``, ``Z2 = chi iQ`` with ``chi`` a smooth step from 1 on
    ``r <= inner`` to 0 on ``r >= outer``.

    Raises
    ------
    ValueError
        If the grid does not reach ``outer``.
    DegenerateProfilesError
        If ``|det|`` falls below ``1e-6 ||Lambda Q|| ||Q||``.
    """
    if grid.R_max < outer:
        raise ValueError(f"grid ends at {grid.R_max}, profiles need r up to {outer}")
    chi = step_down(grid.nodes, inner, outer)
    lq, iq = generators(m, grid)
    Z1 = lq.with_values(chi * lq.values)
    Z2 = iq.with_values(chi * iq.values)
    matrix = np.array([[inner_product(y, z) for z in (Z1, Z2)] for y in (lq, iq)])
    det = float(np.linalg.det(matrix))
    scale = np.sqrt(inner_product(lq, lq) * inner_product(iq, iq))
    if not abs(det) >= 1e-6 * scale:
        raise DegenerateProfilesError(f"profile determinant {det:.3e} below threshold {1e-6 * scale:.3e}")
    return ProfilePair(Z1=Z1, Z2=Z2, matrix=matrix, det_value=det)


def synthesize(eps: EquivariantField, lam: float, gamma: float) -> EquivariantField:
    """``[Q + eps]_{lam, gamma}`` resampled on ``eps``'s grid."""
    Q = soliton(eps.m, eps.grid)
    return apply_phase(apply_scaling(Q + eps, lam), gamma)


class _Unscaler:
    """Evaluates ``lam exp(-i gamma) u(lam r)`` repeatedly from one spline."""

    def __init__(self, u: EquivariantField):
        self.u = u
        self.sp = spline(u)
        self.r = u.grid.nodes
        self.R_max = u.grid.R_max

    def __call__(self, lam: float, gamma: float) -> np.ndarray:
        vals = sample_spline(self.sp, lam * self.r, self.R_max)
        vals[0] = self.u.values[0]
        return lam * np.exp(-1j * gamma) * vals


def _pair(values: np.ndarray, z: EquivariantField) -> float:
    g = z.grid
    return float(np.sum(g.weights * g.nodes * (values * np.conj(z.values)).real))


def _scan_seed(unscale: _Unscaler, Q: np.ndarray, weights: np.ndarray, lam0: float) -> tuple[float, float]:
    """Best ``L^2`` match of ``unscale(u)`` to ``Q`` over a log-spaced scale ladder.

    For each scale the optimal phase is ``arg <unscale(u; lam, 0), Q>``.
    """
    best = (np.inf, lam0, 0.0)
    qq = np.sum(weights * Q**2)
    for lam in lam0 * np.geomspace(1.0 / SCAN_RANGE, SCAN_RANGE, SCAN_POINTS):
        v = unscale(lam, 0.0)
        overlap = np.sum(weights * v * Q)
        # ||v e^{-i g} - Q||^2 minimized over g
        dist = np.sum(weights * np.abs(v) ** 2) + qq - 2.0 * abs(overlap)
        if dist < best[0]:
            best = (dist, lam, float(np.angle(overlap)))
    return best[1], best[2]


def decompose(u: EquivariantField, guess: SymmetryParams | None = None, *,
              profiles: ProfilePair | None = None, tol: float = NEWTON_TOL,
              max_iter: int = MAX_ITER, scan: bool = True) -> ModulationFit:
    """Find ``(lam, gamma)`` with ``eps = unscale(u) - Q`` orthogonal to ``Z1, Z2``.

    Newton iteration in ``(log lam, gamma)`` with a centered finite-difference
    Jacobian (relative step ``1e-6``).  Steps are capped at 0.5 in each
    coordinate and halved while the residual grows.  The orthogonality map has
    spurious zeros far from the vortex, so by default Newton starts from the
    best ``L^2`` match on a scale ladder within a factor 4 of the guess.
    The returned ``eps`` is set to zero at nodes with ``lam r > R_max``, where
    ``u`` is not known.

    Parameters
    ----------
    u : EquivariantField
    guess : SymmetryParams, optional
        Starting point, default ``(1, 0)``.
    profiles : ProfilePair, optional
        Built with :func:`make_profiles` when omitted.
    tol : float
        Convergence when ``max |F| <= tol * ||u||_{L^2}``.
    scan : bool
        Seed Newton from the scale-ladder match instead of ``guess`` itself.

    Raises
    ------
    ModulationError
        If ``lam`` leaves ``(1e-3, 1e3) * guess.lam``.
    """
    guess = guess or SymmetryParams()
    profiles = profiles or make_profiles(u.m, u.grid)
    _check_compatible(u, profiles.Z1)
    Q = soliton(u.m, u.grid).values
    unscale = _Unscaler(u)
    target = tol * planar_norm(u.values, u.grid)

    def residual(x):
        lam, gamma = np.exp(x[0]), x[1]
        eps = unscale(lam, gamma) - Q
        return np.array([_pair(eps, profiles.Z1), _pair(eps, profiles.Z2)])

    x = np.array([np.log(guess.lam), guess.gamma])
    if scan:
        weights = u.grid.weights * u.grid.nodes
        lam_s, gamma_s = _scan_seed(unscale, Q.real, weights, guess.lam)
        x = np.array([np.log(lam_s), guess.gamma + np.angle(np.exp(1j * (gamma_s - guess.gamma)))])
    log_lo, log_hi = np.log(guess.lam * 1e-3), np.log(guess.lam * 1e3)
    F = residual(x)
    converged = bool(np.max(np.abs(F)) <= target)
    it = 0
    while not converged and it < max_iter:
        it += 1
        J = np.empty((2, 2))
        for k in range(2):
            dx = np.zeros(2)
            dx[k] = FD_STEP
            J[:, k] = (residual(x + dx) - residual(x - dx)) / (2.0 * FD_STEP)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            log.warning("singular modulation Jacobian at iteration %d", it)
            break
        # cap the step so that a distant guess cannot throw lam out of range
        t = min(1.0, MAX_STEP / np.max(np.abs(step)))
        while True:
            trial = x + t * step
            if not log_lo < trial[0] < log_hi:
                raise ModulationError(
                    f"scale {np.exp(trial[0]):.3e} left (1e-3, 1e3) x guess {guess.lam:.3e}"
                )
            F_trial = residual(trial)
            if np.linalg.norm(F_trial) < np.linalg.norm(F) or t < 1e-3:
                break
            t *= 0.5
        x, F = trial, F_trial
        converged = bool(np.max(np.abs(F)) <= target)
    lam = float(np.exp(x[0]))
    gamma = float(np.mod(x[1], 2.0 * np.pi))
    eps_vals = unscale(lam, x[1]) - Q
    eps_vals[u.grid.nodes * lam > u.grid.R_max] = 0.0
    eps = u.with_values(eps_vals)
    if not converged:
        log.info("modulation fit not converged after %d iterations, |F| = %.3e", it, np.max(np.abs(F)))
    return ModulationFit(
        lam=lam,
        gamma=gamma,
        eps=eps,
        eps_l2=planar_norm(eps.values, eps.grid),
        eps_h1m=h1m_norm(eps),
        orth_residuals=(float(F[0]), float(F[1])),
        converged=converged,
        iterations=it,
    )


def project_orthogonal(eps: EquivariantField, profiles: ProfilePair) -> tuple[EquivariantField, float]:
    """Remove the generator directions so that ``eps`` is orthogonal to ``Z1, Z2``.

    Returns the projected field and the planar norm of the removed part.
    """
    _check_compatible(eps, profiles.Z1)
    lq, iq = generators(eps.m, eps.grid)
    rhs = np.array([inner_product(eps, profiles.Z1), inner_product(eps, profiles.Z2)])
    # matrix[i, j] = (Y_i, Z_j); solve sum_i c_i (Y_i, Z_j) = (eps, Z_j)
    c = np.linalg.solve(profiles.matrix.T, rhs)
    removed = c[0] * lq.values + c[1] * iq.values
    return eps.with_values(eps.values - removed), planar_norm(removed, eps.grid)


def coercivity_ratio(eps: EquivariantField, *, profiles: ProfilePair | None = None,
                     eta: float = ETA, return_projection: bool = False):
    """``E[Q + eps] / ||eps||^2`` in the homogeneous equivariant H^1 seminorm.

    ``eps`` is first projected onto the orthogonal complement of ``Z1, Z2``.
    The grid vortex is a critical point of the grid energy only up to
    truncation error, so the numerator is the even part
    ``(E[Q + eps] + E[Q - eps]) / 2 - E[Q]``, which removes the ``O(h^2)``
    energy of ``Q`` and its first variation and equals ``E[Q + eps]`` in the
    continuum up to quartic order.

    Raises
    ------
    ValueError
        If ``eps`` vanishes (after projection) or exceeds ``eta``.
    """
    profiles = profiles or make_profiles(eps.m, eps.grid)
    eps_p, removed = project_orthogonal(eps, profiles)
    norm = h1m_seminorm(eps_p)
    if norm == 0.0:
        raise ValueError("coercivity ratio undefined for eps = 0")
    if norm > eta:
        raise ValueError(f"||eps|| = {norm:.3e} exceeds the smallness bound {eta}")
    Q = soliton(eps.m, eps.grid)
    even = 0.5 * (energy_direct(Q + eps_p) + energy_direct(Q - eps_p)) - energy_direct(Q)
    ratio = even / norm**2
    if return_projection:
        return ratio, removed
    return ratio


# -- linearized operator ------------------------------------------------------


def _cell_operators(m: int, grid: RadialGrid):
    """Real matrices of the cell-centred ``L_Q`` and the ``H^1_m`` Gram form.

    Unknowns are ``(Re f_1..f_{N-1}, Im f_1..f_{N-1})``; ``f_0 = 0``.  Returns
    ``(L, Wc, B)`` with ``||L_Q f||^2 = x^T L^T Wc L x`` and
    ``||f||^2_{H^1_m} = x^T B x``.
    """
    r = grid.nodes
    h = grid.spacing
    n = grid.N
    rc = 0.5 * (r[1:] + r[:-1])
    Q = soliton(m, grid).values.real
    wr = grid.weights * r
    a_cell = -0.5 * np.cumsum(wr * Q**2)[:-1]
    q_avg = 0.5 * (Q[1:] + Q[:-1])

    diff = (np.eye(n, k=1) - np.eye(n))[:-1] / h[:, None]
    avg = 0.5 * (np.eye(n, k=1) + np.eye(n))[:-1]
    base = diff - ((m + a_cell) / rc)[:, None] * avg
    # cross term: A_theta[Q, f] on cells, -1/2 sum_{j<=i} w_j r_j Q_j Re f_j
    prefix = np.tril(np.ones((n - 1, n)))
    prefix[:, -1] = 0.0
    cross = -0.5 * prefix * (wr * Q)[None, :]
    coupling = (2.0 * q_avg / rc)[:, None] * cross

    cells = n - 1
    L = np.zeros((2 * cells, 2 * (n - 1)))
    L[:cells, : n - 1] = (base - coupling)[:, 1:]
    L[cells:, n - 1 :] = base[:, 1:]
    Wc = np.tile(h * rc, 2)

    hardy = (m / rc)[:, None] * avg
    G = diff[:, 1:].T @ ((h * rc)[:, None] * diff[:, 1:]) + hardy[:, 1:].T @ ((h * rc)[:, None] * hardy[:, 1:])
    B = np.zeros((2 * (n - 1), 2 * (n - 1)))
    B[: n - 1, : n - 1] = G
    B[n - 1 :, n - 1 :] = G
    return L, Wc, B


def _constraint_rows(profiles: ProfilePair, restrict: str) -> np.ndarray:
    grid = profiles.grid
    wr = (grid.weights * grid.nodes)[1:]
    rows = []
    chosen = {"both": (profiles.Z1, profiles.Z2), "Z1": (profiles.Z1,), "Z2": (profiles.Z2,), "none": ()}
    if restrict not in chosen:
        raise ValueError(f"restrict must be one of {sorted(chosen)}, got {restrict!r}")
    for z in chosen[restrict]:
        rows.append(np.concatenate([wr * z.values.real[1:], wr * z.values.imag[1:]]))
    return np.array(rows).reshape(len(rows), 2 * wr.size)


def lq_spectral_bounds(m: int, grid: RadialGrid, profiles: ProfilePair | None = None, *,
                       restrict: str = "both") -> tuple[float, float]:
    """Extreme values of ``||L_Q f||_{L^2} / ||f||_{H^1_m}`` on a subspace.

    ``restrict`` selects which orthogonality conditions define the subspace:
    ``"both"``, ``"Z1"``, ``"Z2"`` or ``"none"``.  Dense generalized symmetric
    eigenproblem; intended for ``N <= 512``.  BLAS runs single-threaded here
    so that the result does not depend on the thread cap.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the restricted Gram form is numerically rank deficient.
    """
    profiles = profiles or make_profiles(m, grid)
    L, Wc, B = _cell_operators(m, grid)
    C = _constraint_rows(profiles, restrict)
    with threadpool_limits(limits=1):
        A = L.T @ (Wc[:, None] * L)
        if C.shape[0]:
            V = scipy.linalg.null_space(C)
            A = V.T @ A @ V
            B = V.T @ B @ V
        try:
            vals = scipy.linalg.eigh(0.5 * (A + A.T), 0.5 * (B + B.T), eigvals_only=True)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"H^1_m Gram form is rank deficient on the subspace: {exc}") from exc
    vals = np.clip(vals, 0.0, None)
    return float(np.sqrt(vals[0])), float(np.sqrt(vals[-1]))


def lq_spectral_gap(m: int, grid: RadialGrid, profiles: ProfilePair | None = None, *,
                    restrict: str = "both") -> float:
    """Smallest ``||L_Q f|| / ||f||_{H^1_m}`` over ``f`` orthogonal to the profiles."""
    return lq_spectral_bounds(m, grid, profiles, restrict=restrict)[0]
