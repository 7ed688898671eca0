"""Closed-form non-optimality scenarios and their verification logic."""

import numpy as np
import pytest

import obstacle_control as oc
from obstacle_control import norm_l2, norm_linf, solve_obstacle
from obstacle_control.counterexamples import (build, ce1_lower_bound_check,
                                              gap, verify_nonoptimality,
                                              _fit_t2_coefficient)


def test_builder_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build("ce1", n=255, r=1.2)
    with pytest.raises(ValueError):
        build("ce1", n=255, gamma=0.7)
    with pytest.raises(ValueError):
        build("nope", n=255)


def test_ce2_base_state_matches_closed_form():
    scn = build("ce2", n=1023)
    sol = solve_obstacle(scn.u_bar, scn.psi)
    assert norm_linf(sol.y - scn.y_bar_exact) <= 5.0 / 1024.0 ** 2


def test_ce2_exact_gap_formula_tracks_numeric():
    scn = build("ce2", n=2047)
    for t in (0.02, 0.05, 0.1):
        numeric, closed = gap(scn, t)
        assert closed == pytest.approx(numeric, rel=2e-2, abs=1e-8)


def test_ce2_t2_coefficient_value():
    c = 1.0 / 16.0
    scn = build("ce2", n=511)
    assert scn.extras["t2_coefficient"] == pytest.approx(-c + 8 * c * c)
    # independent of the packaged value: fit the numeric gaps directly
    ts = [0.02, 0.04, 0.08]
    fitted = _fit_t2_coefficient(ts, [gap(scn, t)[0] for t in ts])
    assert fitted == pytest.approx(-0.03125, rel=0.08)


def test_fit_recovers_coefficients_of_synthetic_cubic():
    ts = np.array([0.01, 0.02, 0.04])
    gaps = -0.03 * ts ** 2 + 0.2 * ts ** 3
    assert _fit_t2_coefficient(ts, gaps) == pytest.approx(-0.03, abs=1e-12)


def test_ce1_gap_formula_is_an_upper_bound():
    scn = build("ce1", n=1023)
    for t in (0.15, 0.2, 0.3):
        numeric, bound = gap(scn, t)
        assert numeric <= bound + 1e-9


def test_ce1_lower_bound_check():
    scn = build("ce1", n=1023)
    assert ce1_lower_bound_check(scn, 0.2)


def test_ce3_radial_scenario_basics():
    scn = build("ce3", n=511)
    assert scn.grid.kind == "radial_disc"
    sol = solve_obstacle(scn.u_bar, scn.psi)
    # base state touches the obstacle at the origin only
    assert sol.active[0] or (sol.y.values[0] - scn.psi.values[0]) <= 1e-6
    t = 0.1
    numeric, bound = gap(scn, t)
    assert numeric <= bound + 1e-4


def test_verify_nonoptimality_confirms_ce2():
    scn = build("ce2", n=511)
    rep = verify_nonoptimality(scn, [0.05, 0.1, 0.15])
    assert rep.confirmed
    assert all(r[2] < 0 for r in rep.rows)
    dists = [r[1] for r in rep.rows]
    assert dists == sorted(dists)


def test_verify_nonoptimality_rejects_flat_coefficient():
    # near c = 1/8 the quadratic term vanishes and all sampled gaps are
    # positive, so the scenario must not be confirmed
    scn = build("ce2", n=511, c=0.12499)
    rep = verify_nonoptimality(scn, [0.05, 0.1, 0.15])
    assert not rep.confirmed


def test_competitor_at_zero_is_base_control():
    for sid in ("ce1", "ce2"):
        scn = build(sid, n=255)
        assert norm_l2(scn.competitor(0.0) - scn.u_bar) <= 1e-12
