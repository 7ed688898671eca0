"""Closed-form families of strongly stationary but non-optimal controls.

Three scenarios, each with an analytic stationary point (u, y, p, nu, eta)
and an explicit family of competitor controls u_t whose objective gap to the
stationary point is known in closed form (exactly for the first two, as an
upper bound for the radial one).  The gap is negative for small t while
||u_t - u|| -> 0, so the stationary points are not local minimizers even
though every first-order test passes.

* ``ce1`` (interval): u = 0 sits at a bound, the state equals the obstacle
  everywhere, eta = -x^(-gamma) is negative on the contact set.
* ``ce2`` (interval): unconstrained control, obstacle strictly below the
  state, gap(t) = alpha((-c + 8c^2) t^2 + O(t^3)) for c in (0, 1/8).
* ``ce3`` (disc, radial): two-dimensional version of ce2 with an explicit
  upper bound pi(4ct^2 - t^2/2 + t^4/2 - t^6/6) for the gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import (Grid, GridFn, INTERVAL_1D, RADIAL_DISC, inner, norm_l2,
                   norm_linf)
from .stationarity import (ObjectiveSpec, StationarityBundle, TOL_STAT,
                           assemble_bundle, check_strong_stationarity)
from .vi import ControlBounds, solve_obstacle

SCENARIO_IDS = ("ce1", "ce2", "ce3")


@dataclass(frozen=True)
class CounterexampleScenario:
    id: str
    params: dict
    grid: Grid
    spec: ObjectiveSpec
    psi: GridFn
    u_bar: GridFn
    y_bar_exact: GridFn
    bounds: Optional[ControlBounds]
    competitor: Callable[[float], GridFn]
    gap_closed_form: Optional[Callable[[float], float]]
    gap_upper_bound: Optional[Callable[[float], float]]
    extras: dict = field(default_factory=dict)

    def bundle(self) -> StationarityBundle:
        return assemble_bundle(self.spec, self.u_bar, self.psi, self.bounds)


@dataclass(frozen=True)
class NonOptimalityReport:
    scenario: str
    rows: list                 # (t, ||u_t - u||, gap_numeric, gap_closed)
    stationarity_residuals: dict
    confirmed: bool
    fitted_t2_coefficient: Optional[float] = None


def _build_ce1(n: int, r: float = 2.0, gamma: float = 0.25,
               alpha: float = 0.05) -> CounterexampleScenario:
    if not r > 1.5:
        raise ValueError("ce1 requires r > 3/2")
    if not (2.0 - r < gamma < 0.5):
        raise ValueError("ce1 requires gamma in (2 - r, 1/2)")
    grid = Grid(INTERVAL_1D, n)
    x = grid.coords
    c0 = (r + 2.0) * (r + 1.0)
    psi = GridFn(grid, (x - x ** (r + 2.0)) / c0)
    u_bar = GridFn(grid, np.zeros(grid.size))
    g = GridFn(grid, -(x ** (-gamma)))       # j(y) = (g, y) = -(y, x^-gamma)
    spec = ObjectiveSpec(mu_j=0.0, y_D=GridFn(grid, np.zeros(grid.size)),
                         g=g, alpha=alpha)
    bounds = ControlBounds.box(grid, 0.0, np.inf)

    def competitor(t: float) -> GridFn:
        u = np.where(x < t, t ** r + x ** r, 0.0)
        return GridFn(grid, u)

    norm_sq = lambda t: (1.0 + 2.0 / (r + 1.0) + 1.0 / (2.0 * r + 1.0)) \
        * t ** (2.0 * r + 1.0)

    def gap_bound(t: float) -> float:
        # upper bound: the tracking decrease is only bounded from below
        # (through y_t >= y_hat_t), the control energy is exact
        tracking = -t ** (r + 3.0 - gamma) / (2.0 * (2.0 - gamma) * (3.0 - gamma))
        return tracking + 0.5 * alpha * norm_sq(t)

    def y_hat(t: float) -> GridFn:
        v = psi.values + np.where(x <= t, 0.5 * t ** r * (t * x - x * x), 0.0)
        return GridFn(grid, v)

    return CounterexampleScenario(
        id="ce1", params={"r": r, "gamma": gamma, "alpha": alpha, "n": n},
        grid=grid, spec=spec, psi=psi, u_bar=u_bar, y_bar_exact=psi,
        bounds=bounds, competitor=competitor, gap_closed_form=None,
        gap_upper_bound=gap_bound,
        extras={"competitor_norm_sq": norm_sq, "y_hat": y_hat,
                "state_shift_norm_sq": lambda t: t ** (2.0 * r + 5.0) / 120.0})


def _build_ce2(n: int, c: float = 1.0 / 16.0,
               alpha: float = 1.0) -> CounterexampleScenario:
    if not (0.0 < c < 0.125):
        raise ValueError("ce2 requires c in (0, 1/8)")
    grid = Grid(INTERVAL_1D, n)
    x = grid.coords
    y_bar = x ** 4 / 12.0 - x ** 3 / 6.0 + x / 12.0
    u_bar = x * (1.0 - x)
    psi = GridFn(grid, y_bar - c * x * x)
    spec = ObjectiveSpec(mu_j=0.0, y_D=GridFn(grid, np.zeros(grid.size)),
                         g=GridFn(grid, np.full(grid.size, -2.0 * alpha)),
                         alpha=alpha)

    def competitor(t: float) -> GridFn:
        shift = 2.0 * c * (t * t - 2.0 * t) / (1.0 - t) ** 2
        return GridFn(grid, np.where(x < t, 0.0, u_bar + shift))

    def gap_closed(t: float) -> float:
        i1 = t * t / 2.0 - t ** 3 / 3.0            # integral of u_bar on (0,t)
        i2 = t ** 3 / 3.0 - t ** 4 / 2.0 + t ** 5 / 5.0   # of u_bar^2
        tail = 2.0 * c * c * (t * t - 2.0 * t) ** 2 / (1.0 - t) ** 3
        return alpha * (-0.5 * i2 - 2.0 * c * i1 + tail)

    def y_t_exact(t: float) -> GridFn:
        a = (t * t - 2.0 * t) / (1.0 - t) ** 2
        b = t * t / (1.0 - t) ** 2
        outer = y_bar + c * (1.0 - x) * (a * x + b)
        return GridFn(grid, np.where(x < t, psi.values, outer))

    return CounterexampleScenario(
        id="ce2", params={"c": c, "alpha": alpha, "n": n},
        grid=grid, spec=spec, psi=psi,
        u_bar=GridFn(grid, u_bar), y_bar_exact=GridFn(grid, y_bar),
        bounds=None, competitor=competitor, gap_closed_form=gap_closed,
        gap_upper_bound=None,
        extras={"y_t_exact": y_t_exact,
                "t2_coefficient": alpha * (-c + 8.0 * c * c)})


def _build_ce3(n: int, c: float = 1.0 / 16.0,
               alpha: float = 1.0) -> CounterexampleScenario:
    if not (0.0 < c < 0.125):
        raise ValueError("ce3 requires c in (0, 1/8)")
    grid = Grid(RADIAL_DISC, n)
    r = grid.coords
    y_bar = r ** 4 / 16.0 - r ** 2 / 4.0 + 3.0 / 16.0
    u_bar = 1.0 - r ** 2
    psi = GridFn(grid, y_bar - c * r * r)
    spec = ObjectiveSpec(mu_j=0.0, y_D=GridFn(grid, np.zeros(grid.size)),
                         g=GridFn(grid, np.full(grid.size, -4.0 * alpha)),
                         alpha=alpha)

    def competitor(t: float) -> GridFn:
        return GridFn(grid, np.where(r < t, 0.0, u_bar))

    def gap_bound(t: float) -> float:
        return np.pi * (4.0 * c * t * t - t * t / 2.0 + t ** 4 / 2.0
                        - t ** 6 / 6.0) * alpha

    def control_norm_sq_drop(t: float) -> float:
        # ||u_t||^2 - ||u_bar||^2 = -2 pi (t^2/2 - t^4/2 + t^6/6), exactly
        return -2.0 * np.pi * (t * t / 2.0 - t ** 4 / 2.0 + t ** 6 / 6.0)

    return CounterexampleScenario(
        id="ce3", params={"c": c, "alpha": alpha, "n": n},
        grid=grid, spec=spec, psi=psi,
        u_bar=GridFn(grid, u_bar), y_bar_exact=GridFn(grid, y_bar),
        bounds=None, competitor=competitor, gap_closed_form=None,
        gap_upper_bound=gap_bound,
        extras={"control_norm_sq_drop": control_norm_sq_drop,
                "state_change_bound": lambda t: c * t * t})


_BUILDERS = {"ce1": _build_ce1, "ce2": _build_ce2, "ce3": _build_ce3}


def build(scenario_id: str, n: int, **params) -> CounterexampleScenario:
    try:
        builder = _BUILDERS[scenario_id]
    except KeyError:
        raise ValueError(f"unknown scenario {scenario_id!r}; "
                         f"choose from {SCENARIO_IDS}") from None
    return builder(n, **params)


def gap(scn: CounterexampleScenario, t: float):
    """Numeric objective gap J(y_t, u_t) - J(y_bar, u_bar) and its
    closed-form value (exact for ce1/ce2, upper bound for ce3)."""
    sol_bar = solve_obstacle(scn.u_bar, scn.psi)
    J_bar = scn.spec.objective(sol_bar.y, scn.u_bar)
    u_t = scn.competitor(t)
    sol_t = solve_obstacle(u_t, scn.psi)
    numeric = scn.spec.objective(sol_t.y, u_t) - J_bar
    closed = None
    if scn.gap_closed_form is not None:
        closed = scn.gap_closed_form(t)
    elif scn.gap_upper_bound is not None:
        closed = scn.gap_upper_bound(t)
    return numeric, closed


def _fit_t2_coefficient(ts, gaps):
    """Least-squares fit gap(t) = a t^2 + b t^3; returns a.

    The cubic term is genuinely present in the closed-form gaps, so a plain
    a*t^2 fit would be biased at any usable t.
    """
    ts = np.asarray(ts, dtype=float)
    V = np.column_stack([ts ** 2, ts ** 3])
    coef, *_ = np.linalg.lstsq(V, np.asarray(gaps, dtype=float), rcond=None)
    return float(coef[0])


def verify_nonoptimality(scn: CounterexampleScenario,
                         t_grid: Sequence[float]) -> NonOptimalityReport:
    """Check stationarity of the base point and negativity of the gap along
    the competitor family.  Confirmed iff some gap drops below -10*tol_stat
    while the competitor distance decreases to zero through the grid."""
    report = check_strong_stationarity(scn.bundle())
    sol_bar = solve_obstacle(scn.u_bar, scn.psi)
    J_bar = scn.spec.objective(sol_bar.y, scn.u_bar)

    rows = []
    for t in sorted(t_grid):
        u_t = scn.competitor(t)
        sol_t = solve_obstacle(u_t, scn.psi)
        numeric = scn.spec.objective(sol_t.y, u_t) - J_bar
        closed = (scn.gap_closed_form(t) if scn.gap_closed_form
                  else scn.gap_upper_bound(t) if scn.gap_upper_bound else None)
        rows.append((t, norm_l2(u_t - scn.u_bar), numeric, closed))

    dists = [r[1] for r in rows]
    shrinking = all(d1 <= d2 + 1e-12 for d1, d2 in zip(dists, dists[1:]))
    negative = any(r[2] < -10.0 * TOL_STAT for r in rows)
    fitted = None
    if scn.id == "ce2" and len(rows) >= 3:
        fitted = _fit_t2_coefficient([r[0] for r in rows[:3]],
                                     [r[2] for r in rows[:3]])
    return NonOptimalityReport(
        scenario=scn.id, rows=rows,
        stationarity_residuals=report.residuals,
        confirmed=bool(report.is_strongly_stationary and shrinking and negative),
        fitted_t2_coefficient=fitted,
    )


def ce1_lower_bound_check(scn: CounterexampleScenario, t: float,
                          tol: float = 1e-7) -> bool:
    """The competitor state dominates the explicit parabola-shifted obstacle
    on (0, t) and its distance to the base state matches t^(2r+5)/120."""
    if scn.id != "ce1":
        raise ValueError("lower-bound check is specific to ce1")
    u_t = scn.competitor(t)
    sol_t = solve_obstacle(u_t, scn.psi)
    x = scn.grid.coords
    y_hat = scn.extras["y_hat"](t)
    mask = x < t
    above = np.all(sol_t.y.values[mask] >= y_hat.values[mask] - tol)
    shift_sq = norm_l2(sol_t.y - GridFn(scn.grid, scn.psi.values)) ** 2
    exact = scn.extras["state_shift_norm_sq"](t)
    return bool(above and shift_sq >= 0.95 * exact)
