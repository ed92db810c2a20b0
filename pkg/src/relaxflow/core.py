"""Grids, cell-averaged state storage, boundary filling and shared numerics.

Arrays follow one layout everywhere: component first, then cells. In 2D the
cell axes are ``(y, x)`` so that ``values[p, j, i]`` is row-major with ``i``
fastest in x.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

GHOST_WIDTH = 2


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D cell-centred grid with a ghost layer on each side."""

    n_cells: int
    x_min: float
    x_max: float
    ghost_width: int = GHOST_WIDTH

    def __post_init__(self) -> None:
        if self.n_cells <= 0:
            raise ValueError("n_cells must be positive")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.ghost_width < 2:
            raise ValueError("ghost_width must be at least 2")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def n_total(self) -> int:
        return self.n_cells + 2 * self.ghost_width

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def centers_with_ghosts(self) -> np.ndarray:
        g = self.ghost_width
        return self.x_min + (np.arange(-g, self.n_cells + g) + 0.5) * self.dx

    @property
    def interior(self) -> slice:
        return slice(self.ghost_width, self.ghost_width + self.n_cells)


@dataclass(frozen=True)
class Grid2D:
    """Uniform 2D cell-centred grid; storage is ``[component, y, x]``."""

    nx: int
    ny: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    ghost_width: int = GHOST_WIDTH

    def __post_init__(self) -> None:
        if self.nx <= 0 or self.ny <= 0:
            raise ValueError("nx and ny must be positive")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("domain extents must be positive")
        if self.ghost_width < 2:
            raise ValueError("ghost_width must be at least 2")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def shape_with_ghosts(self) -> tuple[int, int]:
        g = self.ghost_width
        return (self.ny + 2 * g, self.nx + 2 * g)

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.dy

    def x_centers_with_ghosts(self) -> np.ndarray:
        g = self.ghost_width
        return self.x_min + (np.arange(-g, self.nx + g) + 0.5) * self.dx

    def y_centers_with_ghosts(self) -> np.ndarray:
        g = self.ghost_width
        return self.y_min + (np.arange(-g, self.ny + g) + 0.5) * self.dy

    @property
    def interior(self) -> tuple[slice, slice]:
        g = self.ghost_width
        return (slice(g, g + self.ny), slice(g, g + self.nx))

    def x_grid(self) -> Grid1D:
        """The 1D grid seen by a single row."""
        return Grid1D(self.nx, self.x_min, self.x_max, self.ghost_width)


# ---------------------------------------------------------------------------
# Boundary conditions


@dataclass(frozen=True)
class Boundary:
    """One side of the domain.

    ``kind`` is ``periodic``, ``dirichlet`` (constant ``values``),
    ``extrapolate`` (zero-order outflow) or ``time_dependent_dirichlet``
    where ``func`` receives ghost-centre coordinates and time and returns
    an array shaped ``(n_components, *coords.shape)``.
    """

    kind: str
    values: Optional[Sequence[float]] = None
    func: Optional[Callable[..., np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.kind not in ("periodic", "dirichlet", "extrapolate", "time_dependent_dirichlet"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "dirichlet" and self.values is None:
            raise ValueError("dirichlet boundary needs values")
        if self.kind == "time_dependent_dirichlet" and self.func is None:
            raise ValueError("time_dependent_dirichlet boundary needs func")


@dataclass(frozen=True)
class BoundarySpec:
    left: Boundary
    right: Boundary
    bottom: Optional[Boundary] = None
    top: Optional[Boundary] = None

    def __post_init__(self) -> None:
        if (self.left.kind == "periodic") != (self.right.kind == "periodic"):
            raise ValueError("periodic boundaries must be paired left/right")
        if self.bottom is not None or self.top is not None:
            if self.bottom is None or self.top is None:
                raise ValueError("bottom and top must both be given")
            if (self.bottom.kind == "periodic") != (self.top.kind == "periodic"):
                raise ValueError("periodic boundaries must be paired bottom/top")

    @classmethod
    def periodic(cls, ndim: int = 1) -> "BoundarySpec":
        p = Boundary("periodic")
        return cls(p, p) if ndim == 1 else cls(p, p, p, p)

    @classmethod
    def extrapolate(cls, ndim: int = 1) -> "BoundarySpec":
        e = Boundary("extrapolate")
        return cls(e, e) if ndim == 1 else cls(e, e, e, e)


def _fill_axis(values: np.ndarray, axis: int, g: int, lo: Boundary, hi: Boundary,
               lo_coords, hi_coords, t: float) -> None:
    """Fill ``g`` ghost layers at both ends of ``axis`` in place."""
    n = values.shape[axis] - 2 * g

    def sl(a, b):
        idx = [slice(None)] * values.ndim
        idx[axis] = slice(a, b)
        return tuple(idx)

    if lo.kind == "periodic":
        values[sl(0, g)] = values[sl(n, n + g)]
        values[sl(n + g, n + 2 * g)] = values[sl(g, 2 * g)]
        return
    for side, bnd, coords in (("lo", lo, lo_coords), ("hi", hi, hi_coords)):
        ghost = sl(0, g) if side == "lo" else sl(n + g, n + 2 * g)
        if bnd.kind == "extrapolate":
            edge = sl(g, g + 1) if side == "lo" else sl(n + g - 1, n + g)
            values[ghost] = values[edge]
        elif bnd.kind == "dirichlet":
            vals = np.asarray(bnd.values, dtype=float)
            shape = [1] * values.ndim
            shape[0] = vals.size
            values[ghost] = vals.reshape(shape)
        else:
            values[ghost] = bnd.func(*coords, t)


def fill_ghosts_1d(values: np.ndarray, grid: Grid1D, bc: BoundarySpec, t: float = 0.0) -> None:
    """Fill ghost cells of a ``[component, cell]`` array in place."""
    g = grid.ghost_width
    xg = grid.centers_with_ghosts
    _fill_axis(values, 1, g, bc.left, bc.right, (xg[:g],), (xg[-g:],), t)


def fill_ghosts_2d(values: np.ndarray, grid: Grid2D, bc: BoundarySpec, t: float = 0.0) -> None:
    """Fill ghost cells of a ``[component, y, x]`` array in place.

    x-ghosts are filled on every row first, then y-ghosts on every column,
    so corner cells take the y-rule. The dimension-wise stencils never read
    corners.
    """
    if bc.bottom is None:
        raise ValueError("2D fill needs bottom/top boundaries")
    g = grid.ghost_width
    xg = grid.x_centers_with_ghosts()
    yg = grid.y_centers_with_ghosts()
    X_lo, Y_lo = np.meshgrid(xg[:g], yg, indexing="xy")
    X_hi, Y_hi = np.meshgrid(xg[-g:], yg, indexing="xy")
    _fill_axis(values, 2, g, bc.left, bc.right, (X_lo, Y_lo), (X_hi, Y_hi), t)
    X_lo, Y_lo = np.meshgrid(xg, yg[:g], indexing="xy")
    X_hi, Y_hi = np.meshgrid(xg, yg[-g:], indexing="xy")
    _fill_axis(values, 1, g, bc.bottom, bc.top, (X_lo, Y_lo), (X_hi, Y_hi), t)


# ---------------------------------------------------------------------------
# State containers


@dataclass
class StateField1D:
    grid: Grid1D
    values: np.ndarray
    bc: BoundarySpec = field(default_factory=BoundarySpec.periodic)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n_total:
            raise ValueError(
                f"values must be shaped (n_components, {self.grid.n_total}), got {self.values.shape}"
            )

    @classmethod
    def from_interior(cls, grid: Grid1D, interior: np.ndarray,
                      bc: Optional[BoundarySpec] = None, t: float = 0.0) -> "StateField1D":
        interior = np.atleast_2d(np.asarray(interior, dtype=float))
        values = np.zeros((interior.shape[0], grid.n_total))
        values[:, grid.interior] = interior
        state = cls(grid, values, bc if bc is not None else BoundarySpec.periodic())
        state.fill_ghosts(t)
        return state

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return self.values[:, self.grid.interior]

    def fill_ghosts(self, t: float = 0.0) -> None:
        fill_ghosts_1d(self.values, self.grid, self.bc, t)

    def copy(self) -> "StateField1D":
        return StateField1D(self.grid, self.values.copy(), self.bc)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.interior)))


@dataclass
class StateField2D:
    grid: Grid2D
    values: np.ndarray
    bc: BoundarySpec = field(default_factory=lambda: BoundarySpec.periodic(2))

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[1:] != self.grid.shape_with_ghosts:
            raise ValueError(
                f"values must be shaped (n_components, {self.grid.shape_with_ghosts}), "
                f"got {self.values.shape}"
            )

    @classmethod
    def from_interior(cls, grid: Grid2D, interior: np.ndarray,
                      bc: Optional[BoundarySpec] = None, t: float = 0.0) -> "StateField2D":
        interior = np.asarray(interior, dtype=float)
        if interior.ndim == 2:
            interior = interior[None]
        values = np.zeros((interior.shape[0],) + grid.shape_with_ghosts)
        values[(slice(None),) + grid.interior] = interior
        state = cls(grid, values, bc if bc is not None else BoundarySpec.periodic(2))
        state.fill_ghosts(t)
        return state

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return self.values[(slice(None),) + self.grid.interior]

    def fill_ghosts(self, t: float = 0.0) -> None:
        fill_ghosts_2d(self.values, self.grid, self.bc, t)

    def copy(self) -> "StateField2D":
        return StateField2D(self.grid, self.values.copy(), self.bc)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.interior)))


# ---------------------------------------------------------------------------
# Limiter, norms, total variation, orders


def van_leer(theta):
    """Van Leer limiter ``(θ + |θ|) / (1 + |θ|)``.

    Works on scalars and arrays. Non-finite input (e.g. a 0/0 ratio from a
    flat stencil) maps to zero, meaning no correction.
    """
    th = np.asarray(theta, dtype=float)
    finite = np.isfinite(th)
    th0 = np.where(finite, th, 0.0)
    a = np.abs(th0)
    phi = np.where(finite, (th0 + a) / (1.0 + a), 0.0)
    if np.ndim(theta) == 0:
        return float(phi)
    return phi


def error_norms(field_values, reference, dx: float, dy: Optional[float] = None) -> dict:
    """L1 and max-norm differences of interior-cell arrays.

    Both inputs must already be restricted to interior cells. The L1 norm is
    weighted by the cell measure ``dx`` (or ``dx*dy``) and summed over all
    components.
    """
    u = np.asarray(field_values, dtype=float)
    r = np.asarray(reference, dtype=float)
    if u.shape != r.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {r.shape}")
    diff = np.abs(u - r)
    measure = dx if dy is None else dx * dy
    return {"l1": float(diff.sum() * measure), "linf": float(diff.max()) if diff.size else 0.0}


def total_variation(component) -> float:
    """Sum of absolute jumps between consecutive entries."""
    c = np.asarray(component, dtype=float)
    if c.size < 2:
        raise ValueError("total variation needs at least two values")
    return float(np.abs(np.diff(c)).sum())


def observed_order(errors: Sequence[float], n_values: Sequence[int]) -> list[float]:
    """Observed convergence orders between consecutive refinements."""
    e = np.asarray(errors, dtype=float)
    n = np.asarray(n_values, dtype=float)
    if e.shape != n.shape or e.size < 2:
        raise ValueError("need matching sequences of length >= 2")
    if np.any(~np.isfinite(e)) or np.any(e <= 0.0):
        raise ValueError("errors must be positive and finite")
    if np.any(np.diff(n) <= 0):
        raise ValueError("n_values must be strictly increasing")
    return list(np.log(e[:-1] / e[1:]) / np.log(n[1:] / n[:-1]))
