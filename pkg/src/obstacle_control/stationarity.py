"""Strong stationarity systems, Bouligand derivatives and exact expansions.

Objectives have the form

    J(y, u) = mu_j/2 ||y - y_D||^2 + (g, y) + alpha/2 ||u||^2,

so the state part j(y) is quadratic with constant curvature mu_j >= 0.  A
strongly stationary control comes with an adjoint state p, a control
multiplier nu and a state multiplier eta satisfying five sign/equation
conditions; `assemble_bundle` constructs the canonical candidate multipliers
and `check_strong_stationarity` reports one residual per condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, GridFn, check_same_grid, inner, norm_l2
from .sensitivity import directional_derivative
from .vi import TOL_ACT, ControlBounds, ObstacleSolution, solve_obstacle

TOL_STAT = 1e-7


@dataclass(frozen=True)
class ObjectiveSpec:
    """Tracking/linear state cost plus alpha/2 ||u||^2 control cost."""

    mu_j: float
    y_D: GridFn
    g: GridFn
    alpha: float

    def __post_init__(self):
        check_same_grid(self.y_D, self.g)
        if self.mu_j < 0.0:
            raise ValueError("mu_j must be nonnegative")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")

    @property
    def grid(self) -> Grid:
        return self.y_D.grid

    def j_value(self, y: GridFn) -> float:
        d = y - self.y_D
        return 0.5 * self.mu_j * inner(d, d) + inner(self.g, y)

    def j_grad(self, y: GridFn) -> GridFn:
        """Nodal density of j'(y)."""
        return GridFn(self.grid, self.mu_j * (y.values - self.y_D.values)
                      + self.g.values)

    def objective(self, y: GridFn, u: GridFn) -> float:
        return self.j_value(y) + 0.5 * self.alpha * inner(u, u)


@dataclass(frozen=True)
class StationarityBundle:
    """Control, state, multipliers and contact data at a candidate point."""

    spec: ObjectiveSpec
    psi: GridFn
    bounds: ControlBounds
    u: GridFn
    y: GridFn
    lam: GridFn
    p: GridFn
    nu: GridFn
    eta: GridFn
    sol: ObstacleSolution
    lower_active: np.ndarray
    upper_active: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.spec.grid


@dataclass(frozen=True)
class StationarityReport:
    residuals: dict
    tol: float
    is_strongly_stationary: bool
    scale: float


def _bound_activity(u: np.ndarray, bounds: ControlBounds):
    lower = np.isfinite(bounds.lower) & (u <= bounds.lower + TOL_ACT)
    upper = np.isfinite(bounds.upper) & (u >= bounds.upper - TOL_ACT)
    return lower, upper & ~lower


def assemble_bundle(spec: ObjectiveSpec, u: GridFn, psi: GridFn,
                    bounds: Optional[ControlBounds] = None) -> StationarityBundle:
    """Solve the state equation and build canonical candidate multipliers.

    The adjoint p is pinned to zero on strictly active nodes and to -alpha*u
    on free control nodes; where the control sits on a bound (and the state
    is off the obstacle or biactive) p is recovered from the adjoint rows.
    eta and nu then absorb the remaining defects, so every residual reported
    by `check_strong_stationarity` is attributable to a sign condition or to
    the adjoint equation itself.
    """
    grid = spec.grid
    if bounds is None:
        bounds = ControlBounds.unbounded(grid)
    sol = solve_obstacle(u, psi)
    jg = spec.j_grad(sol.y)
    A = grid.neg_laplacian

    lower_active, upper_active = _bound_activity(u.values, bounds)
    bound_active = lower_active | upper_active

    p = -spec.alpha * u.values.copy()
    p[sol.strictly_active] = 0.0
    undetermined = bound_active & ~sol.strictly_active
    if undetermined.any():
        # enforce the adjoint equation rows (with eta = 0 off the obstacle)
        # at nodes where neither p = 0 nor p = -alpha*u applies
        rows = A[undetermined]
        rhs = jg.values[undetermined] - rows @ np.where(undetermined, 0.0, p)
        B = rows[:, undetermined]
        p[undetermined] = np.atleast_1d(spla.spsolve(sp.csc_matrix(B), rhs))

    nu = np.where(bound_active, spec.alpha * u.values + p, 0.0)
    eta = np.where(sol.active, jg.values - A @ p, 0.0)

    return StationarityBundle(
        spec=spec, psi=psi, bounds=bounds, u=u, y=sol.y, lam=sol.lam,
        p=GridFn(grid, p), nu=GridFn(grid, nu), eta=GridFn(grid, eta),
        sol=sol, lower_active=lower_active, upper_active=upper_active,
    )


def check_strong_stationarity(b: StationarityBundle,
                              tol: float = TOL_STAT) -> StationarityReport:
    """Residuals of the five-part strong stationarity system."""
    A = b.grid.neg_laplacian
    jg = b.spec.j_grad(b.y)
    sol = b.sol

    adjoint = float(np.max(np.abs(A @ b.p.values + b.eta.values - jg.values)))
    gradient = float(np.max(np.abs(b.spec.alpha * b.u.values + b.p.values
                                   - b.nu.values)))
    p_cone = max(
        float(np.max(np.abs(b.p.values[sol.strictly_active]), initial=0.0)),
        float(np.max(-b.p.values[sol.biactive], initial=0.0)),
    )
    eta_cone = max(
        float(np.max(np.abs(b.eta.values[sol.inactive]), initial=0.0)),
        float(np.max(-b.eta.values[sol.biactive], initial=0.0)),
    )
    free = ~(b.lower_active | b.upper_active)
    nu_sign = max(
        float(np.max(-b.nu.values[b.lower_active], initial=0.0)),
        float(np.max(b.nu.values[b.upper_active], initial=0.0)),
        float(np.max(np.abs(b.nu.values[free]), initial=0.0)),
    )

    residuals = {
        "adjoint": adjoint,
        "gradient": gradient,
        "p_cone": p_cone,
        "eta_cone": eta_cone,
        "nu_sign": nu_sign,
    }
    scale = 1.0 + float(np.max(np.abs(jg.values))) \
        + b.spec.alpha * float(np.max(np.abs(b.u.values)))
    return StationarityReport(
        residuals=residuals,
        tol=tol,
        is_strongly_stationary=all(r <= tol * scale for r in residuals.values()),
        scale=scale,
    )


def admissible_direction(b: StationarityBundle, h: GridFn,
                         tol: float = TOL_ACT) -> bool:
    hv = h.values
    ok_lower = np.all(hv[b.lower_active] >= -tol)
    ok_upper = np.all(hv[b.upper_active] <= tol)
    return bool(ok_lower and ok_upper)


def bouligand_gap(b: StationarityBundle, directions: Sequence[GridFn]):
    """Minimal first-order value  <j'(y), S'(u;h)> + alpha (u, h)  over the
    given admissible directions.  Nonnegative iff no sampled direction is a
    first-order descent direction."""
    jg = b.spec.j_grad(b.y)
    values = []
    for h in directions:
        if not admissible_direction(b, h):
            raise ValueError("direction leaves the admissible cone")
        delta = directional_derivative(b.sol, h)
        values.append(inner(jg, delta) + b.spec.alpha * inner(b.u, h))
    return min(values), values


def taylor_gap_identity(b: StationarityBundle, u: GridFn):
    """Exact expansion of J(y,u) - J(y_bar,u_bar) around the bundle point.

    Returns (lhs, rhs) where rhs = <p, lam_u - lam> + <eta, y_u - y>
    + (nu, u - u_bar) + mu_j/2 ||y_u - y||^2 + alpha/2 ||u - u_bar||^2.
    For the quadratic objectives used here the two sides agree to roundoff
    whenever the adjoint and gradient equations hold exactly.
    """
    sol_u = solve_obstacle(u, b.psi)
    lhs = b.spec.objective(sol_u.y, u) - b.spec.objective(b.y, b.u)
    dy = sol_u.y - b.y
    du = u - b.u
    rhs = (inner(b.p, sol_u.lam - b.lam) + inner(b.eta, dy) + inner(b.nu, du)
           + 0.5 * b.spec.mu_j * norm_l2(dy) ** 2
           + 0.5 * b.spec.alpha * norm_l2(du) ** 2)
    return lhs, rhs


def aux_identities_check(b: StationarityBundle, u: GridFn,
                         betas: Sequence[float] = (0.0, 1.0, 5.0)) -> dict:
    """Algebraic identities satisfied by any competitor state y_u = S(u).

    Checks <eta, min(0, y_u - y)> = 0, <lam, min(0, y_u - y)> = 0 and, for
    each beta, the splitting of <p, lam_u - lam> + <eta, y_u - y> into
    obstacle-distance terms.
    """
    grid = b.grid
    sol_u = solve_obstacle(u, b.psi)
    dy = sol_u.y - b.y
    neg_part = GridFn(grid, np.minimum(0.0, dy.values))
    pos_part = GridFn(grid, np.maximum(0.0, dy.values))
    gap_bar = b.y - b.psi

    lhs = inner(b.p, sol_u.lam - b.lam) + inner(b.eta, dy)
    beta_residuals = {}
    for beta in betas:
        rhs = (inner(b.p + beta * gap_bar, sol_u.lam)
               + inner(b.eta + beta * b.lam, pos_part)
               + beta * inner(dy, sol_u.lam - b.lam))
        beta_residuals[beta] = lhs - rhs

    return {
        "eta_min": inner(b.eta, neg_part),
        "lam_min": inner(b.lam, neg_part),
        "beta_identity": beta_residuals,
    }
