"""Structure of controls realizing a given reachable state.

Any feasible state y = S(u) is also reached by the canonical control

    u_y = min(0, -Delta y)  on the contact set,   -Delta y  elsewhere,

which among all controls realizing y has the smallest L2 norm.  On the
contact set the associated multiplier is max(0, -Delta y); away from the
contact interface -Delta y coincides with -Delta psi there since y = psi
on the whole stencil.  This yields a
reformulation of the control problem as a state-constrained problem plus an
explicit penalty supported off the obstacle.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .grid import GridFn, check_same_grid, inner
from .stationarity import ObjectiveSpec, StationarityBundle
from .vi import TOL_ACT, ObstacleSolution, solve_obstacle


def _contact_mask(y: GridFn, psi: GridFn, sol: Optional[ObstacleSolution]):
    if sol is not None:
        return sol.active
    return (y.values - psi.values) <= TOL_ACT


def partially_optimal_control(y: GridFn, psi: GridFn,
                              sol: Optional[ObstacleSolution] = None) -> GridFn:
    """Minimum-norm control u_y with S(u_y) = y."""
    check_same_grid(y, psi)
    grid = y.grid
    active = _contact_mask(y, psi, sol)
    q = grid.neg_laplacian @ y.values            # -Delta_h y
    u = np.where(active, np.minimum(0.0, q), q)
    return GridFn(grid, u)


def partially_optimal_multiplier(y: GridFn, psi: GridFn,
                                 sol: Optional[ObstacleSolution] = None) -> GridFn:
    """Multiplier paired with `partially_optimal_control`."""
    check_same_grid(y, psi)
    grid = y.grid
    active = _contact_mask(y, psi, sol)
    q = grid.neg_laplacian @ y.values
    return GridFn(grid, np.where(active, np.maximum(0.0, q), 0.0))


def energy_inequality_check(u: GridFn, y: GridFn, psi: GridFn,
                            sol: Optional[ObstacleSolution] = None):
    """Return (||u||^2 - ||u_y||^2, ||u - u_y||^2) for u realizing y."""
    uy = partially_optimal_control(y, psi, sol)
    lhs = inner(u, u) - inner(uy, uy)
    d = u - uy
    return lhs, inner(d, d)


def double_complementarity_residual(b: StationarityBundle) -> float:
    """Max violation of 0 <= -u _|_ lam >= 0 on the contact set of a
    stationary point of the unconstrained-control problem."""
    active = b.sol.active
    a = -b.u.values[active]
    lam = b.lam.values[active]
    return max(
        float(np.max(-a, initial=0.0)),
        float(np.max(-lam, initial=0.0)),
        float(np.max(np.minimum(np.abs(a), np.abs(lam)), initial=0.0)),
    )


def reformulated_objective(spec: ObjectiveSpec, y: GridFn, psi: GridFn,
                           sol: Optional[ObstacleSolution] = None) -> float:
    """Objective as a functional of the state alone:

    j(y) + alpha/2 ||u_y||^2 + alpha/2 * integral over {y > psi} of
    max(0, -Delta psi)^2.  Equals J(y, u_y) plus the penalty term.
    """
    check_same_grid(y, psi)
    if np.any(y.values < psi.values - TOL_ACT):
        raise ValueError("state is infeasible (below the obstacle)")
    grid = y.grid
    active = _contact_mask(y, psi, sol)
    uy = partially_optimal_control(y, psi, sol)
    q = grid.neg_laplacian @ psi.values
    penalty = np.where(~active, np.maximum(0.0, q) ** 2, 0.0)
    return (spec.j_value(y) + 0.5 * spec.alpha * inner(uy, uy)
            + 0.5 * spec.alpha * float(np.sum(grid.weights * penalty)))


def roundtrip_state(y: GridFn, psi: GridFn,
                    sol: Optional[ObstacleSolution] = None) -> GridFn:
    """S(u_y): re-solving with the canonical control reproduces y."""
    return solve_obstacle(partially_optimal_control(y, psi, sol), psi).y
