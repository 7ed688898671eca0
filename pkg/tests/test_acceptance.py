"""Acceptance suite: quantitative end-to-end checks with fixed tolerances.

Each test pins one advertised guarantee of the package: solver accuracy
against closed forms, oracle equivalence, a-priori estimates, the structure
and Taylor identities, the three nonoptimality scenarios, certificate
rejections, uniqueness under convexity, and spectral anchors.
"""

import time

import numpy as np

import obstacle_control as oc
from obstacle_control import (ControlBounds, Grid, GridFn, ObjectiveSpec,
                              check_strong_stationarity, directional_derivative,
                              energy_inequality_check, norm_l2,
                              partially_optimal_control, poincare_constant,
                              solve_general, solve_obstacle, solve_subharmonic,
                              taylor_gap_identity)
from obstacle_control.cli import run
from obstacle_control.counterexamples import _fit_t2_coefficient
from obstacle_control.ssc import (certify_compat_local,
                                  certify_enhanced_global,
                                  certify_enhanced_local)
from obstacle_control.stationarity import assemble_bundle

from conftest import bowl_obstacle, contact_instance, smooth_control
from test_stationarity import manufactured_stationary_bundle
from test_vi import brute_force_lcp


def test_vi_solver_second_order_accuracy():
    # closed-form contact instance (quartic state, quadratic control),
    # sup-norm error must decay at second order in h, fast
    t0 = time.perf_counter()
    ns = np.array([255, 511, 1023])
    errs = []
    for n in ns:
        scn = oc.counterexamples.build("ce2", n=int(n))
        sol = solve_obstacle(scn.u_bar, scn.psi)
        errs.append(float(np.max(np.abs(sol.y.values
                                        - scn.y_bar_exact.values))))
    h = 1.0 / (ns + 1.0)
    order = float(np.polyfit(np.log(h), np.log(errs), 1)[0])
    assert 1.8 <= order <= 2.2
    assert max(errs) <= 100.0 * h[0] ** 2   # C h^2 with a concrete C
    assert time.perf_counter() - t0 < 5.0


def test_brute_force_oracle_equivalence():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(4, 13))
        grid = Grid("interval1d", n)
        u = GridFn(grid, rng.uniform(-30.0, 10.0, n))
        x = grid.coords
        psi = GridFn(grid, rng.uniform(-0.5, 0.1) * np.ones(n)
                     + rng.uniform(0.0, 0.3) * np.sin(np.pi * x))
        y_ref, lam_ref = brute_force_lcp(grid.neg_laplacian.toarray(),
                                         u.values, psi.values)
        sol = solve_obstacle(u, psi)
        assert np.max(np.abs(sol.y.values - y_ref)) <= 1e-9
        assert np.max(np.abs(sol.lam.values - lam_ref)) <= 1e-9


def test_l1_lipschitz_estimate_100_pairs():
    rng = np.random.default_rng(3)
    violations = 0
    for _ in range(100):
        n = int(rng.integers(31, 300))
        grid = Grid("interval1d", n)
        psi = bowl_obstacle(grid, rng)
        u1 = smooth_control(grid, rng, amplitude=rng.uniform(0.5, 4.0))
        u2 = smooth_control(grid, rng, amplitude=rng.uniform(0.5, 4.0))
        lhs, rhs = oc.lipschitz_l1_check(u1, u2, psi)
        if lhs > 2.0 * rhs * (1.0 + 1e-8):
            violations += 1
    assert violations == 0


def test_comparison_principle_100_monotone_pairs():
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(100):
        n = int(rng.integers(31, 300))
        grid = Grid("interval1d", n)
        psi = bowl_obstacle(grid, rng)
        u1 = smooth_control(grid, rng, amplitude=rng.uniform(0.5, 4.0))
        bump = np.abs(smooth_control(grid, rng, amplitude=1.0).values)
        u2 = GridFn(grid, u1.values + bump)
        s1 = solve_obstacle(u1, psi)
        s2 = solve_obstacle(u2, psi)
        if np.max(s1.y.values - s2.y.values) > 1e-9:
            violations += 1
    assert violations == 0


def test_structure_theorem_50_attainable_states():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(63, 256))
        grid, u, psi, sol = contact_instance(n, rng)
        uy = partially_optimal_control(sol.y, psi, sol)
        sol_y = solve_obstacle(uy, psi)
        scale = 1.0 + np.max(np.abs(sol.y.values))
        assert np.max(np.abs(sol_y.y.values - sol.y.values)) <= 1e-8 * scale
        spec = ObjectiveSpec(mu_j=float(rng.uniform(0.0, 2.0)),
                             y_D=smooth_control(grid, rng, amplitude=1.0),
                             g=smooth_control(grid, rng, amplitude=0.5),
                             alpha=float(rng.uniform(0.05, 2.0)))
        assert (spec.objective(sol.y, uy)
                <= spec.objective(sol.y, u) + 1e-12)
        lhs, rhs = energy_inequality_check(u, sol.y, psi, sol)
        assert lhs - rhs >= -1e-10


def test_taylor_identity_100_pairs():
    rng = np.random.default_rng(6)
    for _ in range(100):
        spec, u_bar, psi, sol = manufactured_stationary_bundle(
            int(rng.integers(31, 200)), rng)
        b = assemble_bundle(spec, u_bar, psi)
        du = smooth_control(spec.grid, rng,
                            amplitude=rng.uniform(0.1, 3.0)).values
        du[b.sol.strictly_active] = 0.0
        u = GridFn(spec.grid, u_bar.values + du)
        lhs, rhs = taylor_gap_identity(b, u)
        assert abs(lhs - rhs) <= 1e-9 * (1.0 + abs(lhs))


def test_nonoptimality_contact_kink_quantitative():
    # fitted quadratic coefficient of the objective gap along the
    # contact-shrinking competitor family, plus the CLI verdict mechanism
    t0 = time.perf_counter()
    scn = oc.counterexamples.build("ce2", n=2047)
    ts = [0.01, 0.02, 0.04]
    gaps = [oc.counterexamples.gap(scn, t)[0] for t in ts]
    fit = _fit_t2_coefficient(ts, gaps)
    target = -0.03125                 # -c + 8 c^2 at c = 1/16
    assert abs(fit - target) <= 0.05 * abs(target)

    argv = ["counterexample", "2", "--n", "2047", "--tmin", "0.01",
            "--tmax", "0.04", "--tsteps", "3", "--out", "/dev/null"]
    assert run(argv) == 0                                 # control run
    assert run(argv + ["--param", "0.12499"]) == 3        # degenerate c
    assert time.perf_counter() - t0 < 30.0


def test_nonoptimality_boundary_singularity_quantitative():
    scn = oc.counterexamples.build("ce1", n=4095, r=2.0, gamma=0.25)
    rep = check_strong_stationarity(scn.bundle())
    assert max(abs(v) for v in rep.residuals.values()) <= 1e-6 * rep.scale

    t = 0.1
    u_norm_sq = norm_l2(scn.competitor(t)) ** 2
    exact = (28.0 / 15.0) * t ** 5
    assert abs(u_norm_sq - exact) <= 0.02 * exact

    ts = [0.05, 0.1, 0.15, 0.2]
    gaps = [oc.counterexamples.gap(scn, tt)[0] for tt in ts]
    assert all(g < 0.0 for g in gaps[:3])

    sol_t = solve_obstacle(scn.competitor(t), scn.psi)
    shift_sq = norm_l2(sol_t.y - scn.y_bar_exact) ** 2
    assert shift_sq >= 0.95 * t ** 9 / 120.0


def test_nonoptimality_radial_quantitative():
    scn = oc.counterexamples.build("ce3", n=2047)
    c = scn.params["c"]
    small_gap = None
    for t in (0.05, 0.1, 0.2):
        numeric, bound = oc.counterexamples.gap(scn, t)
        assert numeric <= bound + 1e-4
        if small_gap is None:
            small_gap = numeric
        sol_t = solve_obstacle(scn.competitor(t), scn.psi)
        dy = np.max(np.abs(sol_t.y.values - scn.y_bar_exact.values))
        assert dy <= c * t * t + 1e-6
    assert small_gap < 0.0


def test_certificates_reject_nonoptimal_stationary_points():
    ce2 = oc.counterexamples.build("ce2", n=2047).bundle()
    assert certify_compat_local(ce2).verdict == "not_certified"
    assert certify_enhanced_local(ce2).verdict == "not_certified"
    assert certify_enhanced_global(ce2).verdict == "not_certified"
    ce1 = oc.counterexamples.build("ce1", n=1023).bundle()
    assert certify_compat_local(ce1).verdict == "not_certified"


def test_subharmonic_uniqueness_multistart_and_general_agreement():
    rng = np.random.default_rng(8)
    for _ in range(10):
        n = 63
        grid = Grid("interval1d", n)
        x = grid.coords
        a = float(rng.uniform(0.3, 0.8))
        b = float(rng.uniform(0.0, 2.0 * a / np.pi ** 2))
        psi = GridFn(grid, a * (x * x - x) + b * np.sin(np.pi * x))
        spec = ObjectiveSpec(mu_j=float(rng.uniform(0.5, 2.0)),
                             y_D=smooth_control(grid, rng, amplitude=0.5),
                             g=smooth_control(grid, rng, amplitude=0.2),
                             alpha=float(rng.uniform(0.1, 1.0)))
        results = [solve_subharmonic(spec, psi)]
        for _ in range(9):
            start = {"obstacle": rng.random(n) < 0.2}
            results.append(solve_subharmonic(spec, psi, start_active=start))
        for res in results[1:]:
            assert norm_l2(res.u - results[0].u) <= 1e-8
        gen = solve_general(spec, psi, seed=0)
        assert norm_l2(gen.u - results[0].u) <= 1e-5


def test_poincare_constant_anchors():
    n = 1023
    h = 1.0 / (n + 1)
    omega = poincare_constant(Grid("interval1d", n))
    exact_h = (2.0 / h ** 2) * (1.0 - np.cos(np.pi * h))
    assert abs(omega - exact_h) <= 1e-8 * exact_h
    assert abs(omega - np.pi ** 2) <= 0.005 * np.pi ** 2
    omega_r = poincare_constant(Grid("radial_disc", 1023))
    assert abs(omega_r - 5.7832) <= 0.01 * 5.7832


def test_directional_derivative_fd_convergence():
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = int(rng.integers(31, 200))
        grid, u, psi, sol = contact_instance(n, rng)
        hdir = smooth_control(grid, rng, amplitude=rng.uniform(0.2, 2.0))
        delta = directional_derivative(sol, hdir)
        errs = []
        for t in (1e-2, 1e-3, 1e-4):
            yt = solve_obstacle(GridFn(grid, u.values + t * hdir.values),
                                psi).y
            fd = (yt.values - sol.y.values) / t
            errs.append(float(np.max(np.abs(fd - delta.values))))
        # allow additive roundoff slack once the error hits machine noise
        assert errs[1] <= errs[0] + 1e-12
        assert errs[2] <= errs[1] + 1e-12
        assert errs[2] <= 1e-3
