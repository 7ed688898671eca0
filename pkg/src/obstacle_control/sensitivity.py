"""Directional differentiability of the control-to-state map.

The directional derivative delta = S'(u; h) solves a variational inequality
on the critical cone of the contact set: delta vanishes on strictly active
nodes, is nonnegative (with complementary slackness against -Delta delta - h)
on biactive nodes, and satisfies -Delta delta = h on inactive nodes.
"""

from __future__ import annotations

import numpy as np

from .grid import GridFn, check_same_grid
from .vi import ObstacleSolution, _pdas_lcp


def directional_derivative(sol: ObstacleSolution, h: GridFn) -> GridFn:
    """Derivative of the obstacle solution at ``sol`` in direction ``h``."""
    check_same_grid(sol.y, h)
    grid = sol.grid
    delta = np.zeros(grid.size)
    free = ~sol.strictly_active
    if not free.any():
        return GridFn(grid, delta)

    # Strictly active nodes are pinned at zero; dropping them from the system
    # is exact because their columns multiply zero.
    A = grid.neg_laplacian[free][:, free]
    lb = np.where(sol.biactive[free], 0.0, -np.inf)
    x, _, _, _ = _pdas_lcp(A.tocsr(), h.values[free], lb,
                           active0=np.zeros(int(free.sum()), dtype=bool))
    delta[free] = x
    return GridFn(grid, delta)
