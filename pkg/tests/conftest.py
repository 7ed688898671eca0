"""Shared helpers: random problem instances with genuine contact."""

import numpy as np
import pytest

from obstacle_control import Grid, GridFn, constant, solve_obstacle


@pytest.fixture
def interval():
    return Grid("interval1d", 127)


def smooth_control(grid, rng, amplitude=2.0, modes=4):
    """Random low-frequency control, zero boundary trace."""
    x = grid.coords if grid.kind == "interval1d" else None
    if x is None:
        raise ValueError("smooth_control is 1D-only")
    vals = np.zeros(grid.size)
    for k in range(1, modes + 1):
        vals += rng.uniform(-1.0, 1.0) * np.sin(k * np.pi * x)
    top = np.max(np.abs(vals))
    if top > 0:
        vals *= amplitude * rng.uniform(0.2, 1.0) / top
    return GridFn(grid, vals)


def bowl_obstacle(grid, rng, depth=None):
    """Concave-bump obstacle with zero boundary trace, touching likely."""
    x = grid.coords
    d = depth if depth is not None else rng.uniform(0.05, 0.4)
    center = rng.uniform(0.3, 0.7)
    width = rng.uniform(8.0, 30.0)
    vals = -d + (d + rng.uniform(0.0, 0.1)) * np.exp(-width * (x - center) ** 2)
    vals *= x * (1.0 - x) * 4.0
    return GridFn(grid, vals)


def contact_instance(n, rng, require_contact=True, max_tries=20):
    """(grid, u, psi) with the obstacle solution having a nonempty active set."""
    grid = Grid("interval1d", n)
    for _ in range(max_tries):
        u = smooth_control(grid, rng, amplitude=rng.uniform(1.0, 6.0))
        psi = bowl_obstacle(grid, rng)
        sol = solve_obstacle(u, psi)
        if not require_contact or sol.active.any():
            return grid, u, psi, sol
    raise RuntimeError("could not generate a contact instance")
