"""Obstacle-problem solver: -Delta y = u + lambda, y >= psi, lambda >= 0.

The workhorse is a primal-dual active set iteration (equivalently, a
semismooth Newton method on min(lambda, y - psi) = 0), with projected SOR
as a fallback if the active sets ever cycle.  Solutions carry the nodal
three-way partition (strictly active / biactive / inactive) used by the
sensitivity and stationarity checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, GridFn, check_same_grid, laplacian, norm_l1

TOL_KKT = 1e-10
TOL_ACT = 1e-8
MAX_PDAS_ITER = 200
MAX_SOR_SWEEPS = 100_000


class SolverError(RuntimeError):
    """Raised when neither the active-set iteration nor SOR converges."""


@dataclass(frozen=True)
class ControlBounds:
    """Nodal control bounds u_a <= u <= u_b with u_a <= 0 <= u_b."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("bound arrays must have matching shapes")
        if np.any(lo > 0.0) or np.any(hi < 0.0):
            raise ValueError("control bounds must satisfy u_a <= 0 <= u_b")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unbounded(cls, grid: Grid) -> "ControlBounds":
        return cls(np.full(grid.size, -np.inf), np.full(grid.size, np.inf))

    @classmethod
    def box(cls, grid: Grid, lower: float, upper: float) -> "ControlBounds":
        return cls(np.full(grid.size, lower), np.full(grid.size, upper))

    def clip(self, v: np.ndarray) -> np.ndarray:
        return np.clip(v, self.lower, self.upper)


@dataclass(frozen=True)
class ObstacleSolution:
    """State, multiplier and contact partition for one obstacle solve."""

    y: GridFn
    lam: GridFn
    active: np.ndarray
    strictly_active: np.ndarray
    biactive: np.ndarray
    inactive: np.ndarray
    kkt_residual: float
    iterations: int
    method: str
    single_node_contact: bool

    @property
    def grid(self) -> Grid:
        return self.y.grid


def _greedy_coloring(A: sp.csr_matrix) -> np.ndarray:
    """Greedy vertex coloring of the sparsity graph (2 colors for the
    stencils used here; small color counts for any submatrix of them)."""
    m = A.shape[0]
    indptr, indices = A.indptr, A.indices
    colors = np.full(m, -1, dtype=np.int64)
    for i in range(m):
        nbr = indices[indptr[i]:indptr[i + 1]]
        used = set(colors[nbr[nbr != i]]) - {-1}
        c = 0
        while c in used:
            c += 1
        colors[i] = c
    return colors


def _projected_sor(A: sp.csr_matrix, q, lb, x0, omega=1.9, tol=1e-13,
                   max_sweeps=MAX_SOR_SWEEPS):
    """Projected SOR for the LCP  A x = q + mu, x >= lb, mu >= 0, mu(x-lb)=0.

    Multicolor sweeps so each color updates as one vectorized operation.
    """
    colors = _greedy_coloring(A)
    masks = [colors == c for c in range(int(colors.max()) + 1)]
    diag = A.diagonal()
    x = np.maximum(np.array(x0, dtype=float), np.where(np.isfinite(lb), lb, -np.inf))
    scale = 1.0 + float(np.max(np.abs(x)))
    for sweep in range(1, max_sweeps + 1):
        delta = 0.0
        for mask in masks:
            r = q - A @ x
            step = omega * r[mask] / diag[mask]
            xi = np.maximum(lb[mask], x[mask] + step)
            delta = max(delta, float(np.max(np.abs(xi - x[mask]), initial=0.0)))
            x[mask] = xi
        if delta <= tol * scale:
            return x, sweep
    return x, max_sweeps


def _tridiag_bands(A: sp.csr_matrix):
    """(lower, diag, upper) arrays if A is tridiagonal, else None."""
    coo = A.tocoo()
    if np.any(np.abs(coo.row - coo.col) > 1):
        return None
    n = A.shape[0]
    lower = np.zeros(n)
    upper = np.zeros(n)
    sub = coo.col == coo.row - 1
    lower[coo.row[sub]] = coo.data[sub]
    sup = coo.col == coo.row + 1
    upper[coo.row[sup]] = coo.data[sup]
    return lower, A.diagonal(), upper


def _solve_inactive_rows(A, bands, inactive, rhs):
    """Solve A[inactive][:, inactive] z = rhs, banded when possible."""
    if bands is None:
        Aii = A[inactive][:, inactive]
        return np.atleast_1d(spla.spsolve(sp.csc_matrix(Aii), rhs))
    lower, diag, upper = bands
    idx = np.flatnonzero(inactive)
    m = len(idx)
    ab = np.zeros((3, m))
    ab[1] = diag[idx]
    if m > 1:
        adjacent = np.diff(idx) == 1
        ab[0, 1:] = np.where(adjacent, upper[idx[:-1]], 0.0)
        ab[2, :-1] = np.where(adjacent, lower[idx[1:]], 0.0)
    return sla.solve_banded((1, 1), ab, rhs)


def _pdas_iterate(A: sp.csr_matrix, q, lb, bounded, active, max_iter,
                  bands=None):
    """Core primal-dual active set loop; returns (x, mu, iters, converged)."""
    m = len(q)
    seen = set()
    x = np.zeros(m)
    mu = np.zeros(m)
    for it in range(1, max_iter + 1):
        x = np.where(active, lb, 0.0)
        inactive = ~active
        if inactive.any():
            rhs = q[inactive]
            if active.any():
                rhs = rhs - (A @ np.where(active, lb, 0.0))[inactive]
            x[inactive] = _solve_inactive_rows(A, bands, inactive, rhs)
        mu = np.zeros(m)
        if active.any():
            mu[active] = (A @ x - q)[active]

        gap = np.where(bounded, x - lb, np.inf)
        new_active = (mu - gap) > 0.0
        feas = float(np.max(np.maximum(-gap[inactive & bounded], 0.0), initial=0.0))
        dual = float(np.max(np.maximum(-mu, 0.0), initial=0.0))
        if np.array_equal(new_active, active) or max(feas, dual) <= TOL_KKT:
            return x, mu, it, True
        key = new_active.tobytes()
        if key in seen:
            return x, mu, it, False  # cycling; let the fallback take over
        seen.add(key)
        active = new_active
    return x, mu, max_iter, False


def _pdas_lcp(A: sp.csr_matrix, q: np.ndarray, lb: np.ndarray,
              active0: Optional[np.ndarray] = None,
              max_iter: int = MAX_PDAS_ITER, omega: float = 1.9):
    """Solve the LCP  A x = q + mu, x >= lb, mu >= 0, mu (x - lb) = 0.

    ``lb`` entries may be -inf (genuinely free nodes).  Runs PDAS first; if
    the active sets cycle or fail to settle (the contact boundary can creep
    one node per iteration on shallow detachment profiles), a multicolor
    projected SOR pass relocates the free boundary and PDAS restarts from
    the SOR active set to polish to machine precision.
    Returns (x, mu, iterations, method).
    """
    m = len(q)
    bounded = np.isfinite(lb)
    if not bounded.any():
        x = spla.spsolve(sp.csc_matrix(A), q) if m else np.zeros(0)
        return np.atleast_1d(x), np.zeros(m), 1, "direct"

    if active0 is None:
        x0 = np.atleast_1d(spla.spsolve(sp.csc_matrix(A), q))
        active = bounded & (x0 < lb)
    else:
        active = np.asarray(active0, dtype=bool) & bounded

    bands = _tridiag_bands(A)
    x, mu, it1, ok = _pdas_iterate(A, q, lb, bounded, active, max_iter,
                                   bands=bands)
    if ok:
        return x, mu, it1, "pdas"

    # SOR identifies the contact set long before it converges in norm, so
    # run it in chunks and retry a PDAS polish from each chunk's active set
    scale = 1.0 + float(np.max(np.abs(lb[bounded]), initial=0.0))
    total = it1
    sweeps = 0
    chunk = 200
    last_key = None
    while sweeps < MAX_SOR_SWEEPS:
        x, done = _projected_sor(A, q, lb, x, omega=omega,
                                 max_sweeps=min(chunk, MAX_SOR_SWEEPS - sweeps))
        sweeps += done
        total += done
        active = bounded & (x - lb <= 1e-9 * scale)
        key = active.tobytes()
        if key != last_key:
            last_key = key
            x2, mu, it2, ok = _pdas_iterate(A, q, lb, bounded, active,
                                            max_iter, bands=bands)
            total += it2
            if ok:
                return x2, mu, total, "sor"
        if done < chunk:   # SOR itself converged; classify and polish once
            break
    x, mu, it2, ok = _pdas_iterate(
        A, q, lb, bounded, bounded & (x - lb <= 1e-9 * scale), max_iter,
        bands=bands)
    if not ok:
        raise SolverError(
            f"LCP unsolved after {max_iter} PDAS iterations and {sweeps} "
            f"SOR sweeps with PDAS restarts")
    return x, mu, total + it2, "sor"


def solve_obstacle(u: GridFn, psi: GridFn,
                   active0: Optional[np.ndarray] = None) -> ObstacleSolution:
    """Solve the discrete obstacle problem for control u and obstacle psi."""
    check_same_grid(u, psi)
    grid = u.grid
    if active0 is None:
        # initial contact guess: the unconstrained state dips below psi AND
        # the candidate multiplier -Delta_h psi - u is positive there
        y0 = grid.solve_neg_laplacian(u.values)
        active0 = (y0 < psi.values) & (
            grid.neg_laplacian @ psi.values - u.values > 0.0)
    omega = 2.0 / (1.0 + np.sin(np.pi * grid.h))
    y, lam, iters, method = _pdas_lcp(grid.neg_laplacian, u.values, psi.values,
                                      active0=active0, omega=omega)

    gap = y - psi.values
    active = gap <= TOL_ACT
    strictly_active = active & (lam > TOL_ACT)
    biactive = active & ~strictly_active
    inactive = ~active

    # the equation residual is pure roundoff; normalize by the operator scale
    eq_scale = 1.0 + float(np.max(np.abs(y))) / grid.h ** 2
    res = max(
        float(np.max(np.maximum(-gap, 0.0), initial=0.0)),
        float(np.max(np.maximum(-lam, 0.0), initial=0.0)),
        float(np.max(np.abs(lam * gap), initial=0.0)),
        float(np.max(np.abs(grid.neg_laplacian @ y - u.values - lam))) / eq_scale,
    )
    if res > 1e-6:
        raise SolverError(f"obstacle solve did not reach feasibility (res={res:.3e})")

    return ObstacleSolution(
        y=GridFn(grid, y),
        lam=GridFn(grid, lam),
        active=active,
        strictly_active=strictly_active,
        biactive=biactive,
        inactive=inactive,
        kkt_residual=res,
        iterations=iters,
        method=method,
        single_node_contact=bool(active.sum() == 1),
    )


def lipschitz_l1_check(u1: GridFn, u2: GridFn, psi: GridFn):
    """Return (||Delta(y1-y2)||_L1, 2 ||u1-u2||_L1); the first never exceeds
    the second for solutions of the obstacle problem."""
    y1 = solve_obstacle(u1, psi).y
    y2 = solve_obstacle(u2, psi).y
    return norm_l1(laplacian(y1 - y2)), 2.0 * norm_l1(u1 - u2)


def comparison_check(u1: GridFn, u2: GridFn, psi: GridFn, tol: float = 1e-9) -> bool:
    """Monotonicity of the control-to-state map: u1 <= u2 implies y1 <= y2."""
    if np.any(u1.values > u2.values):
        raise ValueError("comparison_check requires u1 <= u2 nodally")
    y1 = solve_obstacle(u1, psi).y
    y2 = solve_obstacle(u2, psi).y
    return bool(np.all(y1.values <= y2.values + tol))
