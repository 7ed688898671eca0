"""Discrete domains, Laplacians, inner products and Poisson solves.

Three uniform grids are supported: the unit interval, the unit square and
the unit disc in radial (rotationally symmetric) reduction.  Boundary nodes
are implicit and carry the value zero, so nodal vectors only store interior
values.  All integrals use mass-lumped trapezoid weights, which keeps the
mass matrix diagonal and complementarity conditions nodal.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

INTERVAL_1D = "interval1d"
SQUARE_2D = "square2d"
RADIAL_DISC = "radial_disc"

GRID_KINDS = (INTERVAL_1D, SQUARE_2D, RADIAL_DISC)


class GridError(ValueError):
    """Raised on malformed grids or grid mismatches."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid on (0,1), (0,1)^2 or the unit disc (radial coordinate).

    ``n`` is the interior node count per axis and ``h = 1/(n+1)``.  For the
    radial grid the node r=0 is interior (index 0) and handled with the
    symmetric polar stencil, so the nodal vector has ``n+1`` entries.
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise GridError(f"unknown grid kind {self.kind!r}")
        if self.n < 2:
            raise GridError("need at least two interior nodes per axis")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def size(self) -> int:
        if self.kind == INTERVAL_1D:
            return self.n
        if self.kind == SQUARE_2D:
            return self.n * self.n
        return self.n + 1  # radial: nodes r = 0, h, ..., n*h

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates; shape (size,) in 1d/radial, (size, 2) in 2d."""
        h = self.h
        if self.kind == INTERVAL_1D:
            return h * np.arange(1, self.n + 1)
        if self.kind == RADIAL_DISC:
            return h * np.arange(0, self.n + 1)
        x = h * np.arange(1, self.n + 1)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def weights(self) -> np.ndarray:
        """Mass-lumped quadrature weights (radial grids weight by 2*pi*r)."""
        h = self.h
        if self.kind == INTERVAL_1D:
            return np.full(self.size, h)
        if self.kind == SQUARE_2D:
            return np.full(self.size, h * h)
        w = 2.0 * np.pi * self.coords * h
        w[0] = np.pi * (h / 2.0) ** 2
        return w

    @cached_property
    def neg_laplacian(self) -> sp.csr_matrix:
        """Sparse matrix A with (A f)_i = (-Delta_h f)_i at interior nodes."""
        h2 = self.h * self.h
        if self.kind == INTERVAL_1D:
            A = sp.diags_array(
                [-np.ones(self.n - 1), 2.0 * np.ones(self.n), -np.ones(self.n - 1)],
                offsets=[-1, 0, 1],
            ) / h2
            return sp.csr_matrix(A)
        if self.kind == SQUARE_2D:
            T = sp.diags_array(
                [-np.ones(self.n - 1), 2.0 * np.ones(self.n), -np.ones(self.n - 1)],
                offsets=[-1, 0, 1],
            ) / h2
            I = sp.eye_array(self.n)
            return sp.csr_matrix(sp.kron(I, T) + sp.kron(T, I))
        # radial: row 0 is the symmetric limit 4(f1 - f0)/h^2
        m = self.n + 1
        i = np.arange(1, m)
        diag = np.empty(m)
        diag[0] = 4.0 / h2
        diag[1:] = 2.0 / h2
        lower = -(i - 0.5) / (i * h2)          # coupling to node i-1
        upper = np.empty(m - 1)                # coupling to node i+1
        upper[0] = -4.0 / h2
        upper[1:] = -(i[:-1] + 0.5) / (i[:-1] * h2)
        A = sp.diags_array([lower, diag, upper], offsets=[-1, 0, 1])
        return sp.csr_matrix(A)

    @cached_property
    def _factorization(self):
        try:
            return spla.factorized(sp.csc_matrix(self.neg_laplacian))
        except RuntimeError as exc:  # pragma: no cover - cannot occur on valid grids
            raise GridError(f"singular Laplacian on {self}: {exc}") from exc

    def solve_neg_laplacian(self, rhs: np.ndarray) -> np.ndarray:
        """Solve A y = rhs with the cached factorization."""
        return self._factorization(np.asarray(rhs, dtype=float))


@dataclass(frozen=True)
class GridFn:
    """Nodal values of a function on a grid (implicit zero boundary)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise GridError(
                f"expected {self.grid.size} nodal values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise GridError("GridFn values must be finite")
        object.__setattr__(self, "values", v)

    def __add__(self, other: "GridFn") -> "GridFn":
        check_same_grid(self, other)
        return GridFn(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFn") -> "GridFn":
        check_same_grid(self, other)
        return GridFn(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFn":
        return GridFn(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFn":
        return GridFn(self.grid, -self.values)


def check_same_grid(f: GridFn, g: GridFn) -> None:
    if f.grid != g.grid:
        raise GridError(f"grid mismatch: {f.grid} vs {g.grid}")


def constant(grid: Grid, value: float) -> GridFn:
    return GridFn(grid, np.full(grid.size, float(value)))


def from_callable(grid: Grid, fn) -> GridFn:
    """Sample a coordinate function nodally (x in 1d, (x,y) in 2d, r radial)."""
    c = grid.coords
    if grid.kind == SQUARE_2D:
        return GridFn(grid, np.asarray(fn(c[:, 0], c[:, 1]), dtype=float))
    return GridFn(grid, np.asarray(fn(c), dtype=float) * np.ones(grid.size))


def laplacian(f: GridFn) -> GridFn:
    """Second-order stencil approximation of Delta f at interior nodes."""
    return GridFn(f.grid, -(f.grid.neg_laplacian @ f.values))


def poisson_solve(u: GridFn) -> GridFn:
    """Solve -Delta_h y = u with zero boundary values."""
    return GridFn(u.grid, u.grid.solve_neg_laplacian(u.values))


def inner(f: GridFn, g: GridFn) -> float:
    check_same_grid(f, g)
    return float(np.sum(f.grid.weights * f.values * g.values))


def norm_l2(f: GridFn) -> float:
    return float(np.sqrt(np.sum(f.grid.weights * f.values**2)))


def norm_l1(f: GridFn) -> float:
    return float(np.sum(f.grid.weights * np.abs(f.values)))


def norm_linf(f: GridFn) -> float:
    return float(np.max(np.abs(f.values))) if f.grid.size else 0.0


def poincare_constant(grid: Grid, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """Smallest eigenvalue of the discrete Dirichlet Laplacian.

    Inverse power iteration on the cached factorization; the eigenvalue is
    the Rayleigh quotient in the weighted (quadrature) inner product, so the
    result is also the best constant in the discrete Poincare inequality.
    """
    w = grid.weights
    A = grid.neg_laplacian
    v = np.ones(grid.size)
    v /= np.sqrt(np.sum(w * v * v))
    omega = np.inf
    for _ in range(max_iter):
        z = grid.solve_neg_laplacian(v)
        z /= np.sqrt(np.sum(w * z * z))
        new_omega = float(np.sum(w * (A @ z) * z))
        if abs(new_omega - omega) <= tol * abs(new_omega):
            return new_omega
        omega = new_omega
        v = z
    raise GridError("inverse power iteration did not converge (degenerate grid?)")
