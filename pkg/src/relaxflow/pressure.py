"""Incompressible pressure equation and sequential pressure/transport coupling.

Layout follows the transport arrays: cell fields are ``(ny, nx)``, x-face
fields ``(ny, nx + 1)`` and y-face fields ``(ny + 1, nx)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.ndimage import gaussian_filter

from .core import Boundary, BoundarySpec, Grid2D, StateField2D
from .problems import TernaryFluid, TernaryProblem, flash_arrays, total_mobility
from .schemes2d import Scheme2DConfig, Step2DInfo, advance_2d, bound_dt_cap_2d

__all__ = [
    "PermeabilityField", "WellBoundary", "PressureSystem", "PressureSolveError",
    "harmonic_mean", "generate_perm_field", "assemble_and_solve", "face_velocities",
    "cell_divergence", "boundary_flux_balance", "total_mobility", "mobility_field",
    "SequentialStepInfo", "sequential_step", "run_sequential", "injection_state",
]


class PressureSolveError(RuntimeError):
    """Singular pressure system or a solve that misses the residual target."""

    def __init__(self, message: str, residual: float = np.nan):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# Permeability


@dataclass
class PermeabilityField:
    """Diagonal permeability per cell, each array shaped ``(ny, nx)``."""

    kx: np.ndarray
    ky: np.ndarray

    def __post_init__(self) -> None:
        self.kx = np.asarray(self.kx, dtype=float)
        self.ky = np.asarray(self.ky, dtype=float)
        if self.kx.ndim != 2 or self.kx.shape != self.ky.shape:
            raise ValueError("kx and ky must be 2D arrays of equal shape")
        for k in (self.kx, self.ky):
            if not np.all(np.isfinite(k)) or np.any(k <= 0.0):
                raise ValueError("permeability must be finite and strictly positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.kx.shape

    @classmethod
    def isotropic(cls, k) -> "PermeabilityField":
        k = np.asarray(k, dtype=float)
        return cls(k, k.copy())

    @classmethod
    def uniform(cls, nx: int, ny: int, value: float = 1.0) -> "PermeabilityField":
        return cls.isotropic(np.full((ny, nx), float(value)))

    @classmethod
    def from_csv(cls, path) -> "PermeabilityField":
        """Isotropic field from a CSV grid of ``ny`` rows by ``nx`` columns."""
        k = np.loadtxt(Path(path), delimiter=",", ndmin=2)
        return cls.isotropic(k)


def generate_perm_field(nx: int, ny: int, seed: int, log_std: float = 1.0,
                        correlation_length: float = 4.0) -> PermeabilityField:
    """Seeded log-normal field with geometric mean one.

    ``correlation_length`` is the Gaussian smoothing width in cells and
    ``log_std`` the standard deviation of ``log k``.
    """
    if nx <= 0 or ny <= 0:
        raise ValueError("grid sizes must be positive")
    if log_std < 0.0 or correlation_length <= 0.0:
        raise ValueError("log_std must be >= 0 and correlation_length > 0")
    if log_std == 0.0:
        return PermeabilityField.uniform(nx, ny)
    rng = np.random.default_rng(seed)
    noise = gaussian_filter(rng.standard_normal((ny, nx)), correlation_length, mode="reflect")
    noise -= noise.mean()
    sd = noise.std()
    logk = log_std * noise / sd if sd > 0.0 else noise
    logk -= logk.mean()
    return PermeabilityField.isotropic(np.exp(logk))


def harmonic_mean(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a + b
    return np.where(s > 0.0, 2.0 * a * b / np.where(s > 0.0, s, 1.0), 0.0)


def mobility_field(C: np.ndarray, fluid: TernaryFluid) -> np.ndarray:
    """Total mobility per cell from overall fractions ``C`` shaped ``(2, ny, nx)``."""
    S = flash_arrays(C[0], C[1], fluid)[0]
    return total_mobility(S, fluid)


# ---------------------------------------------------------------------------
# Pressure system


@dataclass(frozen=True)
class WellBoundary:
    """Left injection at a fixed total rate, right at fixed pressure, no-flow top/bottom.

    ``composition`` is the full injected composition (all components).
    ``right_pressure=None`` leaves only flux conditions and is rejected as singular.
    """

    rate: float = 1.0
    composition: tuple = (0.9, 0.1, 0.0)
    right_pressure: Optional[float] = 0.0

    def __post_init__(self) -> None:
        c = np.asarray(self.composition, dtype=float)
        if np.any(c < 0.0) or abs(c.sum() - 1.0) > 1e-12:
            raise ValueError("injected composition must be nonnegative and sum to one")


@dataclass
class PressureSystem:
    grid: Grid2D
    matrix: sp.csr_matrix
    rhs: np.ndarray
    pressure: np.ndarray
    # face transmissibilities (mobility times permeability, harmonic at interior faces)
    tx: np.ndarray
    ty: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray
    residual: float

    @property
    def velocities(self) -> tuple[np.ndarray, np.ndarray]:
        return self.u_x, self.u_y


def _face_coefficients(grid: Grid2D, lam_x: np.ndarray, lam_y: np.ndarray):
    """Face transmissibility ``T`` so that ``u = -T dP / distance``.

    Boundary faces carry the adjacent cell value (half-cell distance).
    """
    ny, nx = grid.shape
    tx = np.empty((ny, nx + 1))
    tx[:, 1:-1] = harmonic_mean(lam_x[:, :-1], lam_x[:, 1:])
    tx[:, 0] = lam_x[:, 0]
    tx[:, -1] = lam_x[:, -1]
    ty = np.empty((ny + 1, nx))
    ty[1:-1] = harmonic_mean(lam_y[:-1], lam_y[1:])
    ty[0] = lam_y[0]
    ty[-1] = lam_y[-1]
    return tx, ty


def _face_centres(grid: Grid2D):
    xc, yc = grid.x_centers, grid.y_centers
    xf = grid.x_min + grid.dx * np.arange(grid.nx + 1)
    yf = grid.y_min + grid.dy * np.arange(grid.ny + 1)
    return xc, yc, xf, yf


def assemble_and_solve(grid: Grid2D, perm: PermeabilityField, mobility=1.0,
                       wells: Optional[WellBoundary] = None, *,
                       dirichlet: Optional[Callable] = None,
                       source: Optional[np.ndarray] = None,
                       solver: str = "direct", rtol: float = 1e-10) -> PressureSystem:
    """Five-point finite-volume solve of ``-div(T grad P) = q``.

    With ``dirichlet`` (a function of face-centre ``x, y``) every side is a
    fixed-pressure side and ``wells`` is ignored; otherwise ``wells`` (default
    :class:`WellBoundary`) supplies the injection/production conditions.
    ``source`` is a per-cell volumetric rate ``q``.
    """
    ny, nx = grid.shape
    if perm.shape != (ny, nx):
        raise ValueError(f"permeability shape {perm.shape} does not match grid {(ny, nx)}")
    mob = np.broadcast_to(np.asarray(mobility, dtype=float), (ny, nx))
    if np.any(mob < 0.0) or not np.all(np.isfinite(mob)):
        raise ValueError("mobility must be finite and nonnegative")
    lam_x = perm.kx * mob
    lam_y = perm.ky * mob
    tx, ty = _face_coefficients(grid, lam_x, lam_y)
    dx, dy = grid.dx, grid.dy
    xc, yc, xf, yf = _face_centres(grid)

    # conductances per face (flux through the face per unit pressure drop)
    gx = tx * dy / dx
    gy = ty * dx / dy
    gx_b = 2.0 * gx[:, [0, -1]]
    gy_b = 2.0 * gy[[0, -1], :]

    idx = np.arange(nx * ny).reshape(ny, nx)
    diag = np.zeros((ny, nx))
    rhs = np.zeros((ny, nx))
    if source is not None:
        q = np.asarray(source, dtype=float)
        if q.shape != (ny, nx):
            raise ValueError("source must be shaped like the grid")
        rhs += q * dx * dy

    rows, cols, vals = [], [], []

    def couple(a, b, c):
        rows.extend([a, b])
        cols.extend([b, a])
        vals.extend([-c, -c])

    # interior faces
    cx = gx[:, 1:-1]
    diag[:, :-1] += cx
    diag[:, 1:] += cx
    couple(idx[:, :-1].ravel(), idx[:, 1:].ravel(), cx.ravel())
    cy = gy[1:-1]
    diag[:-1] += cy
    diag[1:] += cy
    couple(idx[:-1].ravel(), idx[1:].ravel(), cy.ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)

    boundary = {}
    if dirichlet is not None:
        pl = np.asarray(dirichlet(np.full(ny, xf[0]), yc), dtype=float)
        pr = np.asarray(dirichlet(np.full(ny, xf[-1]), yc), dtype=float)
        pb = np.asarray(dirichlet(xc, np.full(nx, yf[0])), dtype=float)
        pt = np.asarray(dirichlet(xc, np.full(nx, yf[-1])), dtype=float)
        diag[:, 0] += gx_b[:, 0]
        rhs[:, 0] += gx_b[:, 0] * pl
        diag[:, -1] += gx_b[:, 1]
        rhs[:, -1] += gx_b[:, 1] * pr
        diag[0] += gy_b[0]
        rhs[0] += gy_b[0] * pb
        diag[-1] += gy_b[1]
        rhs[-1] += gy_b[1] * pt
        boundary = dict(left=pl, right=pr, bottom=pb, top=pt)
    else:
        w = wells if wells is not None else WellBoundary()
        if w.right_pressure is None:
            raise PressureSolveError("no fixed-pressure boundary: the system is singular")
        # uniform injection velocity rate / Ly on every left face
        ly = grid.y_max - grid.y_min
        rhs[:, 0] += w.rate / ly * dy
        diag[:, -1] += gx_b[:, 1]
        rhs[:, -1] += gx_b[:, 1] * w.right_pressure
        boundary = dict(right=np.full(ny, float(w.right_pressure)), inflow=w.rate / ly)

    if np.any(diag <= 0.0):
        raise PressureSolveError("cell with no conductance: the system is singular")
    A = sp.coo_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny)).tocsr()
    A = A + sp.diags(diag.ravel())
    A = A.tocsr()
    b = rhs.ravel()
    P = _solve(A, b, solver, rtol)
    res = float(np.linalg.norm(A @ P - b) / max(np.linalg.norm(b), np.finfo(float).tiny))
    if not np.isfinite(res) or res > rtol:
        raise PressureSolveError(f"pressure solve residual {res:.3e} exceeds {rtol:.1e}", res)
    P = P.reshape(ny, nx)
    u_x, u_y = _darcy(grid, P, tx, ty, boundary)
    return PressureSystem(grid, A, b, P, tx, ty, u_x, u_y, res)


def _solve(A, b, solver: str, rtol: float) -> np.ndarray:
    if not np.any(b):
        return np.zeros_like(b)
    if solver == "direct":
        return spla.splu(A.tocsc()).solve(b)
    if solver == "cg":
        # SPD five-point operator; diagonal preconditioning
        M = sp.diags(1.0 / A.diagonal())
        x, info = spla.cg(A, b, rtol=0.01 * rtol, atol=0.0, maxiter=20 * A.shape[0], M=M)
        if info != 0:
            res = float(np.linalg.norm(A @ x - b) / np.linalg.norm(b))
            raise PressureSolveError(f"conjugate gradients did not converge (residual {res:.3e})", res)
        return x
    raise ValueError(f"unknown solver {solver!r}; use 'direct' or 'cg'")


def _darcy(grid: Grid2D, P: np.ndarray, tx, ty, boundary: dict):
    """Face velocities ``u = -T dP / distance`` with boundary conditions applied."""
    ny, nx = grid.shape
    dx, dy = grid.dx, grid.dy
    u_x = np.zeros((ny, nx + 1))
    u_y = np.zeros((ny + 1, nx))
    u_x[:, 1:-1] = -tx[:, 1:-1] * (P[:, 1:] - P[:, :-1]) / dx
    u_y[1:-1] = -ty[1:-1] * (P[1:] - P[:-1]) / dy
    half_x, half_y = 0.5 * dx, 0.5 * dy
    if "inflow" in boundary:
        u_x[:, 0] = boundary["inflow"]
    else:
        u_x[:, 0] = -tx[:, 0] * (P[:, 0] - boundary["left"]) / half_x
    u_x[:, -1] = -tx[:, -1] * (boundary["right"] - P[:, -1]) / half_x
    if "bottom" in boundary:
        u_y[0] = -ty[0] * (P[0] - boundary["bottom"]) / half_y
        u_y[-1] = -ty[-1] * (boundary["top"] - P[-1]) / half_y
    return u_x, u_y


def face_velocities(system: PressureSystem) -> tuple[np.ndarray, np.ndarray]:
    """Darcy face velocities ``(u_x, u_y)`` of a solved system."""
    return system.u_x, system.u_y


def cell_divergence(grid: Grid2D, u_x: np.ndarray, u_y: np.ndarray) -> np.ndarray:
    return (u_x[:, 1:] - u_x[:, :-1]) / grid.dx + (u_y[1:] - u_y[:-1]) / grid.dy


def boundary_flux_balance(grid: Grid2D, u_x: np.ndarray, u_y: np.ndarray) -> float:
    """Net volumetric inflow through all four sides (zero when incompressible)."""
    return float((u_x[:, 0].sum() - u_x[:, -1].sum()) * grid.dy
                 + (u_y[0].sum() - u_y[-1].sum()) * grid.dx)


# ---------------------------------------------------------------------------
# Sequential coupling


def injection_state(grid: Grid2D, wells: WellBoundary, initial=(0.0, 0.25)) -> StateField2D:
    """Uniform initial state with the injected composition imposed on the left."""
    ny, nx = grid.shape
    inj = np.asarray(wells.composition[:2], dtype=float)
    left = Boundary("dirichlet", values=inj)
    out = Boundary("extrapolate")
    bc = BoundarySpec(left, out, out, out)
    C0 = np.empty((2, ny, nx))
    C0[0] = initial[0]
    C0[1] = initial[1]
    return StateField2D.from_interior(grid, C0, bc)


@dataclass
class SequentialStepInfo:
    dt: float
    system: PressureSystem
    transport: Step2DInfo
    # component mass (cell sum times cell area) before and after the step
    mass_before: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mass_after: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def mass_defect(self) -> np.ndarray:
        """Mass change minus time-integrated boundary inflow, per component."""
        return self.mass_after - self.mass_before - self.transport.boundary_inflow


def _mass(state: StateField2D) -> np.ndarray:
    g = state.grid
    return state.interior.sum(axis=(1, 2)) * g.dx * g.dy


def sequential_step(state: StateField2D, fluid: TernaryFluid, perm: PermeabilityField,
                    wells: WellBoundary, config: Scheme2DConfig, t: float = 0.0,
                    dt: Optional[float] = None, *, max_dt: Optional[float] = None,
                    problem: Optional[TernaryProblem] = None, solver: str = "direct"):
    """Pressure with lagged mobilities, then one transport step.

    Returns ``(new_state, SequentialStepInfo)``.
    """
    grid = state.grid
    if problem is None:
        problem = TernaryProblem(fluid, ndim=2)
    mob = mobility_field(state.interior, fluid)
    system = assemble_and_solve(grid, perm, mob, wells, solver=solver)
    vel = system.velocities
    if dt is None:
        cap = bound_dt_cap_2d(problem, grid, config, vel)
        max_dt = cap if max_dt is None else min(cap, max_dt)
    before = _mass(state)
    new_state, info = advance_2d(state, problem, vel, config, t, dt, max_dt=max_dt)
    return new_state, SequentialStepInfo(info.dt, system, info, before, _mass(new_state))


def run_sequential(state: StateField2D, fluid: TernaryFluid, perm: PermeabilityField,
                   wells: WellBoundary, config: Scheme2DConfig, t_end: float,
                   t0: float = 0.0, max_steps: int = 1_000_000, callback=None,
                   problem: Optional[TernaryProblem] = None):
    """March the coupled system to ``t_end``; returns ``(state, [SequentialStepInfo])``."""
    if problem is None:
        problem = TernaryProblem(fluid, ndim=2)
    t = t0
    state = state.copy()
    state.fill_ghosts(t)
    history = []
    while t < t_end and len(history) < max_steps:
        remaining = t_end - t
        state, info = sequential_step(state, fluid, perm, wells, config, t,
                                      max_dt=remaining, problem=problem)
        if info.dt == 0.0:
            # no flow: nothing moves for the rest of the run
            t = t_end
        else:
            t = t_end if info.dt >= remaining * (1.0 - 1e-14) else t + info.dt
        history.append(info)
        if not state.is_finite():
            raise FloatingPointError(f"non-finite values at t = {t:.6g}")
        if callback is not None:
            callback(state, t, info)
    return state, history
