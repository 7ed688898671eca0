"""Solvers for the regularized control problem.

Two routes:

* `solve_subharmonic` - for subharmonic obstacles the problem is a convex
  QP in the state alone (u = -Delta y), solved by a primal-dual active set
  method on the constraints y >= psi and u_a <= -Delta y <= u_b.
* `solve_general` - projected gradient descent in the control with Armijo
  line search, plus periodic "contact probes" that test replacing the
  control near the contact zone by the minimum-norm value min(0,-Delta psi).
  The probes let the iteration leave stationary points that are not local
  minimizers, which genuinely occur for superharmonic obstacles.
"""

from __future__ import annotations

import warnings

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import GridFn, inner, norm_linf, poisson_solve
from .sensitivity import directional_derivative
from .stationarity import ObjectiveSpec
from .vi import ControlBounds, SolverError, solve_obstacle

TOL_OPT = 1e-6
QP_TOL = 1e-9


@dataclass(frozen=True)
class OptimizeResult:
    u: GridFn
    y: GridFn
    objective: float
    residual: float
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def solve_subharmonic(spec: ObjectiveSpec, psi: GridFn,
                      bounds: Optional[ControlBounds] = None,
                      start_active: Optional[dict] = None,
                      max_iter: int = 200) -> OptimizeResult:
    """Active-set QP solve of the state-space reformulation.

    Requires Delta psi >= 0 (checked by the caller / cli).  Minimizes
    mu_j/2 ||y-y_D||^2 + (g,y) + alpha/2 ||-Delta y||^2 over y >= psi,
    u_a <= -Delta y <= u_b; the control is recovered as u = -Delta y.
    """
    grid = spec.grid
    if bounds is None:
        bounds = ControlBounds.unbounded(grid)
    A = sp.csr_matrix(grid.neg_laplacian)
    I = sp.eye_array(grid.size, format="csr")
    H = sp.csr_matrix(spec.mu_j * I + spec.alpha * (A @ A))
    rhs0 = spec.mu_j * spec.y_D.values - spec.g.values

    lo_ok = np.isfinite(bounds.lower)
    hi_ok = np.isfinite(bounds.upper)

    if start_active is None:
        y = np.atleast_1d(spla.spsolve(sp.csc_matrix(H), rhs0))
        u = A @ y
        S_psi = y < psi.values
        S_lo = lo_ok & (u < bounds.lower)
        S_hi = hi_ok & (u > bounds.upper) & ~S_lo
    else:
        S_psi = np.asarray(start_active.get("obstacle",
                                            np.zeros(grid.size, bool)), bool)
        S_lo = np.asarray(start_active.get("lower",
                                           np.zeros(grid.size, bool)), bool) & lo_ok
        S_hi = np.asarray(start_active.get("upper",
                                           np.zeros(grid.size, bool)), bool) & hi_ok & ~S_lo

    seen = set()
    for it in range(1, max_iter + 1):
        # saddle system: stationarity rows plus one row per active constraint
        included = [(S, C, sign, target) for S, C, sign, target in (
            (S_psi, I, -1.0, psi.values),
            (S_lo, A, -1.0, bounds.lower),
            (S_hi, A, 1.0, bounds.upper),
        ) if S.any()]
        top = [H] + [sign * C[:, S] for S, C, sign, _ in included]
        mats = [top]
        rhs = [rhs0]
        for S, C, _, target in included:
            mats.append([C[S, :]] + [None] * len(included))
            rhs.append(target[S])
        M = sp.bmat(mats, format="csc") if included else sp.csc_matrix(H)
        b_full = np.concatenate(rhs)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", spla.MatrixRankWarning)
                sol = np.atleast_1d(spla.spsolve(M, b_full))
        except RuntimeError:
            sol = np.full(M.shape[0], np.nan)
        if not np.all(np.isfinite(sol)):
            # intermediate sets can pin y = psi and A y = bound on the same
            # interior-contact node, making constraint rows dependent; a
            # tiny diagonal shift still yields usable multiplier signs for
            # the next set update
            reg = M + 1e-10 * sp.eye_array(M.shape[0], format="csc")
            sol = np.atleast_1d(spla.spsolve(reg, b_full))
            if not np.all(np.isfinite(sol)):
                raise SolverError("singular active-set system")
        y = sol[:grid.size]
        eta = np.zeros(grid.size)
        zeta_lo = np.zeros(grid.size)
        zeta_hi = np.zeros(grid.size)
        off = grid.size
        # unpack multipliers in the order the constraint rows were added
        for S, store in ((S_psi, eta), (S_lo, zeta_lo), (S_hi, zeta_hi)):
            k = int(S.sum())
            if k:
                store[S] = sol[off:off + k]
                off += k
        u = A @ y

        new_psi = (eta + psi.values - y) > 0.0
        new_lo = lo_ok & ((zeta_lo + bounds.lower - u) > 0.0)
        new_hi = hi_ok & ((zeta_hi + u - bounds.upper) > 0.0) & ~new_lo
        stat = H @ y - rhs0 - eta - A @ zeta_lo + A @ zeta_hi
        # the stationarity equation scales like alpha*h^-4; measure its
        # residual relative to the magnitude of its terms
        stat_scale = 1.0 + float(np.max(np.abs(H @ y))) + float(np.max(np.abs(rhs0)))
        res = max(
            float(np.max(np.maximum(psi.values - y, 0.0), initial=0.0)),
            float(np.max(np.maximum(bounds.lower - u, 0.0)[lo_ok], initial=0.0)),
            float(np.max(np.maximum(u - bounds.upper, 0.0)[hi_ok], initial=0.0)),
            float(np.max(np.maximum(-eta, 0.0), initial=0.0)),
            float(np.max(np.maximum(-zeta_lo, 0.0), initial=0.0)),
            float(np.max(np.maximum(-zeta_hi, 0.0), initial=0.0)),
            float(np.max(np.abs(stat))) / stat_scale,
        )
        same = (np.array_equal(new_psi, S_psi) and np.array_equal(new_lo, S_lo)
                and np.array_equal(new_hi, S_hi))
        if same or res <= QP_TOL:
            yf = GridFn(grid, y)
            uf = GridFn(grid, u)
            return OptimizeResult(
                u=uf, y=yf, objective=spec.objective(yf, uf),
                residual=res, iterations=it, converged=res <= QP_TOL,
                diagnostics={"method": "active_set_qp",
                             "n_obstacle": int(S_psi.sum()),
                             "n_lower": int(S_lo.sum()),
                             "n_upper": int(S_hi.sum())})
        key = (new_psi.tobytes(), new_lo.tobytes(), new_hi.tobytes())
        if key in seen:
            raise SolverError("active-set QP is cycling")
        seen.add(key)
        S_psi, S_lo, S_hi = new_psi, new_lo, new_hi
    raise SolverError("active-set QP did not converge")


def _adjoint(spec: ObjectiveSpec, sol, pin_biactive: bool = False) -> np.ndarray:
    """Adjoint state with p = 0 on pinned contact nodes.

    By default only strictly active nodes are pinned; with
    `pin_biactive=True` every active node is pinned.  At a biactive node
    the reduced objective has a kink and the two choices are the gradients
    of its two linear-in-the-state branches.
    """
    grid = spec.grid
    jg = spec.j_grad(sol.y).values
    p = np.zeros(grid.size)
    free = ~(sol.active if pin_biactive else sol.strictly_active)
    if free.any():
        A = grid.neg_laplacian[free][:, free]
        p[free] = np.atleast_1d(spla.spsolve(sp.csc_matrix(A), jg[free]))
    return p


def _piece_newton(spec, psi, bounds, sol):
    """Exact minimizer of the smooth branch selected by the contact split.

    The branch fixes y = psi on the active set P, keeps u = -Delta_h y on
    inactive and biactive nodes (lambda = 0 there), and lets u float on
    strictly active nodes S (where the control only pays its own cost).
    The reduced objective is then quadratic in y off P,

        mu_j/2 ||y - y_D||^2 + (g, y) + alpha/2 ||D A y||^2,
        D = diag(1 off S, 0 on S),

    and one sparse SPD solve gives the branch stationary point.  On S the
    feasible minimum-norm control is min(0, (A y)_S).  Returns the
    candidate control, clipped to the bounds; the caller globalizes it
    with a line search.
    """
    grid = spec.grid
    P = sol.active
    F = ~P
    A = sp.csr_matrix(grid.neg_laplacian)
    d = (~sol.strictly_active).astype(float)
    y = psi.values.copy()
    nf = int(F.sum())
    if nf:
        w = grid.weights
        ADA = sp.csr_matrix((A.multiply((w * d)[:, None])).T @ A
                            ).multiply((1.0 / w)[:, None]).tocsr()
        M = spec.mu_j * sp.eye_array(nf, format="csr") \
            + spec.alpha * ADA[F][:, F]
        rhs = spec.mu_j * spec.y_D.values[F] - spec.g.values[F]
        if P.any():
            rhs = rhs - spec.alpha * (ADA[F][:, P] @ psi.values[P])
        try:
            z = np.atleast_1d(spla.spsolve(sp.csc_matrix(M), rhs))
        except RuntimeError:
            return None
        if not np.all(np.isfinite(z)):
            return None
        y[F] = z
    u = A @ y
    S = sol.strictly_active
    if S.any():
        u[S] = np.minimum(0.0, u[S])
    return bounds.clip(u)


def _contact_probe(spec, psi, bounds, u, J, sol):
    """Try swapping the control to min(0, -Delta psi) near the contact set."""
    grid = spec.grid
    gap = sol.y.values - psi.values
    top = float(np.max(gap))
    if top <= 0.0:
        return None
    q = grid.neg_laplacian @ psi.values
    target = bounds.clip(np.minimum(0.0, q))
    for tau in np.logspace(-4, -0.5, 8) * top:
        mask = gap < tau
        if not mask.any() or np.allclose(u[mask], target[mask]):
            continue
        cand = u.copy()
        cand[mask] = target[mask]
        cf = GridFn(grid, cand)
        sol_c = solve_obstacle(cf, psi)
        Jc = spec.objective(sol_c.y, cf)
        if Jc < J - 1e-12 * (1.0 + abs(J)):
            return cf, sol_c, Jc
    return None


def _sample_cone_dirs(grid, u, bounds, grads, rng, n_dirs):
    dirs = [-g for g in grads]
    for _ in range(n_dirs):
        dirs.append(rng.standard_normal(grid.size))
    out = []
    lo_act = np.isfinite(bounds.lower) & (u <= bounds.lower + 1e-12)
    hi_act = np.isfinite(bounds.upper) & (u >= bounds.upper - 1e-12)
    for v in dirs:
        v = v.copy()
        v[lo_act] = np.abs(v[lo_act])
        v[hi_act] = -np.abs(v[hi_act])
        nrm = float(np.sqrt(np.sum(grid.weights * v * v)))
        if nrm > 0:
            out.append(v / nrm)
    return out


def solve_general(spec: ObjectiveSpec, psi: GridFn,
                  bounds: Optional[ControlBounds] = None,
                  u0: Optional[GridFn] = None,
                  max_iter: int = 2000, tol: float = TOL_OPT,
                  backtrack: float = 0.5, max_rounds: int = 20,
                  n_dirs: int = 32, seed: int = 0) -> OptimizeResult:
    """Descent on the reduced objective with contact probes.

    Each round runs a quasi-Newton descent with the a.e. gradient (the
    reduced map is differentiable wherever no node is biactive), polishes
    with exact solves of the smooth branch selected by the current contact
    split, and then tries contact probes; probes let the iteration leave
    stationary points that are not local minimizers, which genuinely occur
    for superharmonic obstacles.  Terminates when no step improves the
    objective and the sampled Bouligand gap is >= -tol.
    """
    from scipy.optimize import minimize

    grid = spec.grid
    if bounds is None:
        bounds = ControlBounds.unbounded(grid)
    rng = np.random.default_rng(seed)
    w = grid.weights
    n_evals = 0

    def evaluate(vals):
        nonlocal n_evals
        n_evals += 1
        uf = GridFn(grid, vals)
        sol = solve_obstacle(uf, psi)
        return sol, spec.objective(sol.y, uf)

    def fun_grad(vals):
        sol, J = evaluate(vals)
        # weighted gradient so scipy's Euclidean dot is the L2 product
        return J, w * (spec.alpha * vals + _adjoint(spec, sol))

    u = bounds.clip(u0.values if u0 is not None else np.zeros(grid.size))
    sol, J = evaluate(u)
    history = [J]
    probes_taken = 0
    decrease_tol = 1e-15

    for _ in range(max_rounds):
        res = minimize(fun_grad, u, jac=True, method="L-BFGS-B",
                       bounds=np.column_stack([bounds.lower, bounds.upper]),
                       options={"maxiter": max_iter, "maxcor": 30,
                                "ftol": 1e-18, "gtol": 1e-14})
        cand = bounds.clip(res.x)
        sol_c, J_c = evaluate(cand)
        if J_c < J - decrease_tol * (1.0 + abs(J)):
            u, sol, J = cand, sol_c, J_c
            history.append(J)

        # exact solves of the currently selected smooth branch
        for _ in range(30):
            target = _piece_newton(spec, psi, bounds, sol)
            if target is None:
                break
            d = target - u
            if float(np.max(np.abs(d))) <= 1e-14 * (1.0 + float(np.max(np.abs(u)))):
                break
            s, accepted = 1.0, False
            while s > 1e-10:
                sol_t, J_t = evaluate(bounds.clip(u + s * d))
                if J_t < J - decrease_tol * (1.0 + abs(J)):
                    u = bounds.clip(u + s * d)
                    sol, J = sol_t, J_t
                    history.append(J)
                    accepted = True
                    break
                s *= backtrack
            if not accepted:
                break

        probe = _contact_probe(spec, psi, bounds, u, J, sol)
        if probe is None:
            break
        uf, sol, J = probe
        u = uf.values
        probes_taken += 1
        history.append(J)

    # sampled first-order (Bouligand) verdict at the final iterate
    grad = spec.alpha * u + _adjoint(spec, sol)
    jg = spec.j_grad(sol.y)
    uf = GridFn(grid, u)
    gap_val = np.inf
    for v in _sample_cone_dirs(grid, u, bounds, [grad], rng, n_dirs):
        hv = GridFn(grid, v)
        delta = directional_derivative(sol, hv)
        gap_val = min(gap_val, inner(jg, delta) + spec.alpha * inner(uf, hv))

    return OptimizeResult(
        u=uf, y=sol.y, objective=J, residual=max(0.0, -gap_val),
        iterations=n_evals, converged=bool(gap_val >= -tol),
        diagnostics={"method": "reduced_descent", "history": history,
                     "probes_taken": probes_taken, "bouligand_gap": gap_val})
