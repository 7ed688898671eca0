"""Second-order sufficient condition certificates.

Each `certify_*` function searches a finite witness grid of auxiliary
parameters (beta, and where applicable gamma, delta) for which the sign
conditions of one sufficiency theorem hold at a strongly stationary bundle,
then samples admissible directions to confirm positive curvature on the
critical cone.  A certificate is a statement about the discrete problem
only; `not_certified` means no witness was found in the searched grid.

Variants:

* ``compat_local``  - sign conditions near the contact boundary only;
  certifies a strict local minimizer.
* ``compat_global`` - sign conditions on the whole domain plus the scalar
  inequality mu + 2*beta*omega - beta^2/alpha >= 0 (omega the Poincare
  constant); strict inequality certifies a unique global minimizer with
  quadratic growth.
* ``enhanced_local`` / ``enhanced_global`` - multiplier-free variants that
  only apply when max(0, -Delta psi) <= u_b; the global form additionally
  requires u to avoid the band (0, -2*Delta psi) off the contact set.
* ``subharmonic_convex`` - for Delta psi >= 0 the problem is equivalent to a
  convex state-constrained problem, so stationarity already certifies the
  unique global minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import GridFn, inner, norm_l2, poincare_constant
from .sensitivity import directional_derivative
from .stationarity import ObjectiveSpec, StationarityBundle, TOL_STAT
from .vi import TOL_ACT, ControlBounds

CURVATURE_MARGIN = 1e-8
N_DIRECTIONS = 500


@dataclass(frozen=True)
class SscReport:
    theorem: str
    verdict: str                     # certified / certified_unique_global /
                                     # not_certified / inapplicable
    witness: Optional[dict]
    residuals: dict = field(default_factory=dict)
    n_directions: int = 0
    n_critical: int = 0
    min_curvature: Optional[float] = None
    notes: str = ""

    @property
    def certified(self) -> bool:
        return self.verdict.startswith("certified")


def default_beta_grid(alpha: float, omega: float) -> np.ndarray:
    return np.concatenate([[0.0], alpha * omega * 1e-3 * 2.0 ** np.arange(21)])


def default_gamma_grid() -> np.ndarray:
    return np.logspace(-4, 0, 13)


def _sample_directions(b: StationarityBundle, n_dirs: int, seed: int):
    """Admissible directions: random smooth fields projected onto the cone
    of feasible control variations, plus signed coordinate directions on
    small grids."""
    grid = b.grid
    rng = np.random.default_rng(seed)
    dirs = []
    if grid.size <= 64:
        for i in range(grid.size):
            for s in (1.0, -1.0):
                e = np.zeros(grid.size)
                e[i] = s
                if (s < 0 and b.lower_active[i]) or (s > 0 and b.upper_active[i]):
                    continue
                dirs.append(e)
    while len(dirs) < n_dirs:
        v = rng.standard_normal(grid.size)
        v[b.lower_active] = np.abs(v[b.lower_active])
        v[b.upper_active] = -np.abs(v[b.upper_active])
        dirs.append(v)
    out = []
    for v in dirs[:n_dirs]:
        nrm = float(np.sqrt(np.sum(grid.weights * v * v)))
        if nrm > 0:
            out.append(GridFn(grid, v / nrm))
    return out


def _curvature_scan(b: StationarityBundle, n_dirs: int, seed: int,
                    critical_filter: str):
    """Sample directions, keep the critical ones, return curvature stats.

    ``critical_filter`` selects the cone: 'first_order' keeps directions with
    vanishing first-order value, 'eta_orthogonal' keeps those whose state
    derivative is orthogonal to the multiplier eta.
    """
    jg = b.spec.j_grad(b.y)
    scale = 1.0 + float(np.max(np.abs(jg.values)))
    n_crit = 0
    min_curv = None
    dirs = _sample_directions(b, n_dirs, seed)
    for h in dirs:
        delta = directional_derivative(b.sol, h)
        if critical_filter == "first_order":
            first = inner(jg, delta) + b.spec.alpha * inner(b.u, h)
        else:
            first = inner(b.eta, delta)
        if abs(first) > TOL_STAT * scale:
            continue
        n_crit += 1
        curv = b.spec.mu_j * norm_l2(delta) ** 2 \
            + b.spec.alpha * norm_l2(h) ** 2
        min_curv = curv if min_curv is None else min(min_curv, curv)
    return len(dirs), n_crit, min_curv


def _finish(theorem, witness, residuals, b, n_dirs, seed, critical_filter,
            global_note=""):
    if witness is None:
        return SscReport(theorem=theorem, verdict="not_certified",
                         witness=None, residuals=residuals)
    n_sampled, n_crit, min_curv = _curvature_scan(b, n_dirs, seed,
                                                  critical_filter)
    if min_curv is not None and min_curv <= CURVATURE_MARGIN:
        return SscReport(theorem=theorem, verdict="not_certified",
                         witness=witness, residuals=residuals,
                         n_directions=n_sampled, n_critical=n_crit,
                         min_curvature=min_curv,
                         notes="curvature not positive on a critical direction")
    verdict = witness.pop("_verdict", "certified")
    return SscReport(theorem=theorem, verdict=verdict, witness=witness,
                     residuals=residuals, n_directions=n_sampled,
                     n_critical=n_crit, min_curvature=min_curv,
                     notes=global_note)


def certify_compat_local(b: StationarityBundle,
                         beta_grid: Optional[Sequence[float]] = None,
                         gamma_grid: Optional[Sequence[float]] = None,
                         n_dirs: int = N_DIRECTIONS, seed: int = 0) -> SscReport:
    """Local sufficiency via compatible multipliers near the contact zone."""
    grid = b.grid
    if beta_grid is None:
        beta_grid = default_beta_grid(b.spec.alpha, poincare_constant(grid))
    if gamma_grid is None:
        gamma_grid = default_gamma_grid()
    gap = b.y.values - b.psi.values
    best = np.inf
    witness = None
    for beta in beta_grid:
        r_eta = float(np.max(-(b.eta.values + beta * b.lam.values), initial=0.0))
        for gamma in gamma_grid:
            band = b.sol.inactive & (gap < gamma)
            r_p = float(np.max(-(b.p.values + beta * gap)[band], initial=0.0))
            viol = max(r_eta, r_p)
            best = min(best, viol)
            if viol <= TOL_STAT:
                witness = {"beta": float(beta), "gamma": float(gamma)}
                break
        if witness:
            break
    return _finish("compat_local", witness, {"min_violation": best}, b,
                   n_dirs, seed, "first_order")


def certify_compat_global(b: StationarityBundle,
                          beta_grid: Optional[Sequence[float]] = None,
                          n_dirs: int = N_DIRECTIONS, seed: int = 0) -> SscReport:
    """Global sufficiency: domain-wide sign conditions plus the scalar
    curvature inequality in beta, omega, alpha and mu_j."""
    grid = b.grid
    omega = poincare_constant(grid)
    if beta_grid is None:
        beta_grid = default_beta_grid(b.spec.alpha, omega)
    gap = b.y.values - b.psi.values
    mu = b.spec.mu_j
    best = np.inf
    witness = None
    for beta in beta_grid:
        scalar = mu + 2.0 * beta * omega - beta * beta / b.spec.alpha
        viol = max(
            float(np.max(-(b.p.values + beta * gap), initial=0.0)),
            float(np.max(-(b.eta.values + beta * b.lam.values), initial=0.0)),
            max(0.0, -scalar),
        )
        best = min(best, viol)
        if viol <= TOL_STAT:
            witness = {"beta": float(beta), "omega": omega, "scalar": scalar}
            if scalar > TOL_STAT and beta > 0:
                witness["_verdict"] = "certified_unique_global"
            break
    return _finish("compat_global", witness, {"min_violation": best}, b,
                   n_dirs, seed, "first_order")


def _enhanced_gate(b: StationarityBundle):
    q = b.grid.neg_laplacian @ b.psi.values  # -Delta_h psi
    ok = np.all(np.maximum(0.0, q) <= b.bounds.upper + TOL_ACT)
    return q, bool(ok)


def certify_enhanced_local(b: StationarityBundle,
                           beta_grid: Optional[Sequence[float]] = None,
                           gamma_grid: Optional[Sequence[float]] = None,
                           delta_grid: Optional[Sequence[float]] = None,
                           n_dirs: int = N_DIRECTIONS, seed: int = 0) -> SscReport:
    """Multiplier-light local sufficiency; needs max(0,-Delta psi) <= u_b."""
    grid = b.grid
    q, gate = _enhanced_gate(b)
    if not gate:
        return SscReport(theorem="enhanced_local", verdict="inapplicable",
                         witness=None,
                         notes="max(0, -Delta psi) exceeds the upper bound")
    if beta_grid is None:
        beta_grid = default_beta_grid(b.spec.alpha, poincare_constant(grid))
    if gamma_grid is None:
        gamma_grid = default_gamma_grid()
    if delta_grid is None:
        delta_grid = default_gamma_grid()
    gap = b.y.values - b.psi.values
    u = b.u.values
    eta_aug_base = b.eta.values + 0.0
    contact_q = np.where(b.sol.active, np.maximum(0.0, q), 0.0)
    best = np.inf
    witness = None
    for beta in beta_grid:
        r_eta = float(np.max(-(eta_aug_base + beta * contact_q), initial=0.0))
        for delta in delta_grid:
            for gamma in gamma_grid:
                band = (b.sol.inactive & (gap < gamma) & (q > 0.0)
                        & (u > 0.0) & (u < (2.0 + delta) * q))
                r_u = float(np.max(
                    -(-b.spec.alpha * u + beta * gap)[band], initial=0.0))
                viol = max(r_eta, r_u)
                best = min(best, viol)
                if viol <= TOL_STAT:
                    witness = {"beta": float(beta), "gamma": float(gamma),
                               "delta": float(delta)}
                    break
            if witness:
                break
        if witness:
            break
    return _finish("enhanced_local", witness, {"min_violation": best}, b,
                   n_dirs, seed, "eta_orthogonal")


def certify_enhanced_global(b: StationarityBundle,
                            beta_grid: Optional[Sequence[float]] = None,
                            n_dirs: int = N_DIRECTIONS, seed: int = 0) -> SscReport:
    """Multiplier-light global sufficiency.  Off the contact set where the
    obstacle is strictly superharmonic the control must avoid the open band
    (0, -2*Delta psi); together with domain-wide signs and the scalar
    inequality this certifies a unique global minimizer when mu_j > 0."""
    grid = b.grid
    q, gate = _enhanced_gate(b)
    if not gate:
        return SscReport(theorem="enhanced_global", verdict="inapplicable",
                         witness=None,
                         notes="max(0, -Delta psi) exceeds the upper bound")
    u = b.u.values
    band = b.sol.inactive & (q > 0.0) & (u > 0.0) & (u < 2.0 * q)
    if band.any():
        return SscReport(
            theorem="enhanced_global", verdict="not_certified", witness=None,
            residuals={"band_nodes": int(band.sum())},
            notes="control enters the excluded band (0, -2*Delta psi) "
                  "off the contact set")
    omega = poincare_constant(grid)
    if beta_grid is None:
        beta_grid = default_beta_grid(b.spec.alpha, omega)
    mu = b.spec.mu_j
    contact_q = np.where(b.sol.active, np.maximum(0.0, q), 0.0)
    gap = b.y.values - b.psi.values
    best = np.inf
    witness = None
    for beta in beta_grid:
        scalar = mu + 2.0 * beta * omega - beta * beta / b.spec.alpha
        viol = max(
            float(np.max(-(-b.spec.alpha * u + beta * gap)[b.sol.inactive & (q > 0.0) & (u >= 2.0 * q) & (u > 0.0)], initial=0.0)),
            float(np.max(-(b.eta.values + beta * contact_q), initial=0.0)),
            max(0.0, -scalar),
        )
        best = min(best, viol)
        if viol <= TOL_STAT:
            witness = {"beta": float(beta), "omega": omega, "scalar": scalar}
            if scalar > TOL_STAT and mu > 0:
                witness["_verdict"] = "certified_unique_global"
            break
    return _finish("enhanced_global", witness, {"min_violation": best}, b,
                   n_dirs, seed, "eta_orthogonal")


def classify_subharmonic(psi: GridFn, tol: float = TOL_ACT) -> bool:
    """True iff Delta_h psi >= -tol at every node."""
    q = psi.grid.neg_laplacian @ psi.values
    return bool(np.all(-q >= -tol))


def certify_subharmonic_convex(spec: ObjectiveSpec, psi: GridFn,
                               bounds: Optional[ControlBounds] = None) -> SscReport:
    """For subharmonic obstacles the reduced problem is convex, so any
    stationary point is the unique global minimizer."""
    if not classify_subharmonic(psi):
        return SscReport(theorem="subharmonic_convex", verdict="inapplicable",
                         witness=None, notes="obstacle is not subharmonic")
    return SscReport(theorem="subharmonic_convex",
                     verdict="certified_unique_global",
                     witness={"convex": True},
                     notes="subharmonic obstacle, convex state cost")
