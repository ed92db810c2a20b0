"""Relaxed schemes in one space dimension.

Three speed strategies share one flux kernel:

* ``JX``: one global speed for the whole grid (the Jin-Xin relaxed scheme),
  implemented separately in its characteristic-variable form so that the
  variable kernel can be checked against it;
* ``VRS``: symmetric local speeds ``a⁻ = -a⁺``;
* ``VRO``: one-sided local speeds that turn into upwinding when all
  characteristic speeds share a sign.

Interfaces are indexed over the whole padded array: interface ``i`` sits
between stored cells ``i`` and ``i + 1``. With ghost width ``g`` the
interior interfaces are ``g-1 .. g-1+n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import StateField1D, van_leer
from .problems import CellEval, ConservationProblem

SCHEMES = ("JX", "VRS", "VRO")


class CFLViolation(RuntimeError):
    """Raised when a requested step exceeds the stability bound."""

    def __init__(self, message: str, a_max: float):
        super().__init__(message)
        self.a_max = a_max


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "VRS"
    order: int = 2
    cfl: float = 0.5
    speed_floor: float = 1e-12
    speed_safety: float = 1.0

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError("cfl must lie in (0, 1]")
        if not self.speed_floor > 0.0:
            raise ValueError("speed_floor must be positive")
        if self.speed_safety < 1.0:
            raise ValueError("speed_safety must be at least 1")

    @property
    def theta_eps(self) -> float:
        return self.speed_floor * np.finfo(float).eps


@dataclass
class InterfaceSpeeds:
    """Speed pair per component and interface (padded interface indexing)."""

    a_minus: np.ndarray
    a_plus: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.a_plus - self.a_minus

    @property
    def max_speed(self) -> float:
        return float(max(np.max(np.abs(self.a_minus)), np.max(np.abs(self.a_plus))))

    def interior(self, ghost_width: int, n_cells: int) -> "InterfaceSpeeds":
        s = slice(ghost_width - 1, ghost_width + n_cells)
        return InterfaceSpeeds(self.a_minus[..., s], self.a_plus[..., s])


@dataclass
class FluxCounter:
    count: int = 0

    def add(self, n: int) -> None:
        self.count += int(n)


class CountedProblem:
    """Proxy that counts flux evaluations (one per composition point)."""

    def __init__(self, problem: ConservationProblem, counter: Optional[FluxCounter] = None):
        self._problem = problem
        self.counter = counter if counter is not None else FluxCounter()

    def evaluate(self, C):
        C = np.asarray(C, dtype=float)
        self.counter.add(int(np.prod(C.shape[1:])))
        return self._problem.evaluate(C)

    def __getattr__(self, name):
        return getattr(self._problem, name)


# ---------------------------------------------------------------------------
# Speed selection


def _pairs(a: np.ndarray, axis: int):
    n = a.shape[axis]
    return np.take(a, np.arange(n - 1), axis=axis), np.take(a, np.arange(1, n), axis=axis)


def _divided_difference(C: np.ndarray, F: np.ndarray, axis: int) -> np.ndarray:
    """Max-magnitude Rankine-Hugoniot slope over components, zero where ΔC = 0."""
    CL, CR = _pairs(C, axis + 1)
    FL, FR = _pairs(F, axis + 1)
    dC = CR - CL
    dF = FR - FL
    nz = dC != 0.0
    dd = np.where(nz, dF / np.where(nz, dC, 1.0), 0.0)
    k = np.argmax(np.abs(dd), axis=0)
    return np.take_along_axis(dd, k[None], axis=0)[0]


def local_speed_pairs(problem, ev: CellEval, C: np.ndarray, mode: str, *,
                      direction: int = 0, axis: int = 0, velocity: Optional[np.ndarray] = None,
                      safety: float = 1.0, floor: float = 1e-12):
    """Per-interface ``(a⁻, a⁺)`` along cell ``axis`` (component axis excluded).

    ``mode`` is ``symmetric`` or ``optimal``. ``velocity`` scales the flux
    at each interface (face-velocity transport); it must be shaped like the
    interface array.
    """
    lo, hi = problem.interface_bounds(ev, direction, axis)
    dd = None
    if problem.use_divided_difference:
        dd = _divided_difference(C, ev.fluxes[direction], axis)
    if velocity is not None:
        v = np.asarray(velocity, dtype=float)
        lo, hi = np.where(v >= 0, v * lo, v * hi), np.where(v >= 0, v * hi, v * lo)
        if dd is not None:
            dd = v * dd
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("non-finite eigenvalue bound; state is invalid")
    if mode == "symmetric":
        a = np.maximum(np.abs(lo), np.abs(hi))
        if dd is not None:
            a = np.maximum(a, np.abs(dd))
        a = np.maximum(a * safety, floor)
        return -a, a
    if mode == "optimal":
        ap = np.maximum(0.0, hi)
        am = np.minimum(0.0, lo)
        if dd is not None:
            ap = np.maximum(ap, dd)
            am = np.minimum(am, dd)
        ap = ap * safety
        am = am * safety
        ap = np.where(ap - am < floor, am + floor, ap)
        return am, ap
    raise ValueError(f"unknown speed mode {mode!r}")


def _broadcast_components(m: int, am: np.ndarray, ap: np.ndarray) -> InterfaceSpeeds:
    return InterfaceSpeeds(np.broadcast_to(am, (m,) + am.shape).copy(),
                           np.broadcast_to(ap, (m,) + ap.shape).copy())


def _jx_speed_from_eval(problem, ev: CellEval, direction: int, safety: float, floor: float) -> float:
    lo, hi = ev.lo[direction], ev.hi[direction]
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("non-finite eigenvalue; state is invalid")
    a = float(max(np.max(np.abs(lo)), np.max(np.abs(hi))))
    if problem.speed_bound is not None:
        a = max(a, float(problem.speed_bound[direction]))
    return max(a * safety, floor)


def jx_global_speed(problem, state: StateField1D, config: Optional[SchemeConfig] = None) -> float:
    """Largest spectral radius over the stored cells, times the safety factor.

    Problems that know a global eigenvalue bound over their admissible set
    (the ternary system) raise the value to that bound.
    """
    cfg = config if config is not None else SchemeConfig(scheme="JX")
    ev = problem.evaluate(state.values)
    return _jx_speed_from_eval(problem, ev, 0, cfg.speed_safety, cfg.speed_floor)


def select_speeds_symmetric(problem, state: StateField1D,
                            config: Optional[SchemeConfig] = None) -> InterfaceSpeeds:
    cfg = config if config is not None else SchemeConfig(scheme="VRS")
    ev = problem.evaluate(state.values)
    am, ap = local_speed_pairs(problem, ev, state.values, "symmetric",
                               safety=cfg.speed_safety, floor=cfg.speed_floor)
    return _broadcast_components(state.n_components, am, ap)


def select_speeds_optimal(problem, state: StateField1D,
                          config: Optional[SchemeConfig] = None) -> InterfaceSpeeds:
    cfg = config if config is not None else SchemeConfig(scheme="VRO")
    ev = problem.evaluate(state.values)
    am, ap = local_speed_pairs(problem, ev, state.values, "optimal",
                               safety=cfg.speed_safety, floor=cfg.speed_floor)
    return _broadcast_components(state.n_components, am, ap)


def speeds_for(problem, ev: CellEval, C: np.ndarray, config: SchemeConfig) -> InterfaceSpeeds:
    """Speeds for ``config.scheme`` from an existing cell evaluation."""
    m = C.shape[0]
    n_if = C.shape[1] - 1
    if config.scheme == "JX":
        a = _jx_speed_from_eval(problem, ev, 0, config.speed_safety, config.speed_floor)
        return InterfaceSpeeds(np.full((m, n_if), -a), np.full((m, n_if), a))
    mode = "symmetric" if config.scheme == "VRS" else "optimal"
    am, ap = local_speed_pairs(problem, ev, C, mode,
                               safety=config.speed_safety, floor=config.speed_floor)
    return _broadcast_components(m, am, ap)


# ---------------------------------------------------------------------------
# Flux kernels


def first_order_flux(C_left, C_right, F_left, F_right, a_minus, a_plus):
    """First-order relaxed interface flux.

    Equals the local Lax-Friedrichs flux when ``a_plus = -a_minus`` and the
    left flux when ``a_minus = 0``.
    """
    gap = a_plus - a_minus
    return F_left + (-a_minus / gap) * (F_right - F_left - a_plus * (C_right - C_left))


def _safe_ratio(num, den, eps):
    ok = np.abs(den) > eps
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


def limiter_parameters(dC, dF, a_minus, a_plus, eps: float = 0.0):
    """Limiter ratios ``(θ⁺, θ⁻)`` for interfaces ``1 .. n-2`` of the inputs.

    All inputs are per-interface jumps and speeds with interfaces on the
    last axis. Each ratio compares the wave of the same family at the
    upwind neighbour interface with the local one, both normalised by the
    local speed gap and weighted by the speed products.
    """
    gap = a_plus - a_minus
    wp = (-a_minus * dC + dF) / gap
    wm = (a_plus * dC - dF) / gap
    c, l, r = slice(1, -1), slice(None, -2), slice(2, None)
    ap, am = a_plus, a_minus
    num_p = (1.0 + ap[..., c] * ap[..., l]) * wp[..., l]
    den_p = (1.0 + ap[..., c] ** 2) * wp[..., c]
    num_m = (1.0 + am[..., r] * am[..., c]) * wm[..., r]
    den_m = (1.0 + am[..., c] ** 2) * wm[..., c]
    return _safe_ratio(num_p, den_p, eps), _safe_ratio(num_m, den_m, eps)


def second_order_correction(dC, dF, a_minus, a_plus, eps: float = 0.0):
    """Limited correction flux at interfaces ``1 .. n-2`` of the inputs.

    ``dC`` and ``dF`` are the jumps ``C_{j} - C_{j-1}`` and
    ``F_{j} - F_{j-1}`` at every interface of the stencil, speeds likewise.
    """
    theta_p, theta_m = limiter_parameters(dC, dF, a_minus, a_plus, eps)
    c = slice(1, -1)
    ap, am = a_plus[..., c], a_minus[..., c]
    gap = ap - am
    wp = -am * dC[..., c] + dF[..., c]
    wm = ap * dC[..., c] - dF[..., c]
    return (ap / gap * 0.5 * van_leer(theta_p) * wp
            - am / gap * 0.5 * van_leer(theta_m) * wm)


def relaxed_interface_fluxes(C, F, a_minus, a_plus, order: int, eps: float = 0.0,
                             H_left=None, dH=None):
    """Numerical flux on interfaces ``1 .. n-2`` of a padded array.

    Interfaces lie along the last axis. ``H_left``/``dH`` override the
    per-interface left flux and flux jump (used when each face carries its
    own velocity); otherwise they come from ``F``.
    """
    CL = C[..., :-1]
    dC = C[..., 1:] - CL
    if H_left is None:
        H_left = F[..., :-1]
        dH = F[..., 1:] - H_left
    gap = a_plus - a_minus
    flux = H_left + (-a_minus / gap) * (dH - a_plus * dC)
    flux = flux[..., 1:-1]
    if order == 2:
        flux = flux + second_order_correction(dC, dH, a_minus, a_plus, eps)
    return flux


def jx_interface_fluxes(C, F, a: float, order: int):
    """Constant-speed relaxed flux in characteristic form, interfaces ``1 .. n-3``
    of the ``n`` stored cells (the same range as the variable kernel).

    Uses ``w± = F ± a C`` and slopes ``σ±_j = Δ₊w±_j φ(Δ₋w±_j / Δ₊w±_j)``;
    the correction at ``j+1/2`` is ``(σ⁺_j - σ⁻_{j+1}) / 4``.
    """
    flux = 0.5 * (F[..., :-1] + F[..., 1:]) - 0.5 * a * (C[..., 1:] - C[..., :-1])
    flux = flux[..., 1:-1]
    if order == 2:
        wp = F + a * C
        wm = F - a * C
        dwp = np.diff(wp, axis=-1)
        dwm = np.diff(wm, axis=-1)
        # slope at stored cells 1 .. n-2
        sig_p = dwp[..., 1:] * van_leer(_safe_ratio(dwp[..., :-1], dwp[..., 1:], 0.0))
        sig_m = dwm[..., 1:] * van_leer(_safe_ratio(dwm[..., :-1], dwm[..., 1:], 0.0))
        # interface i (cells i, i+1) uses σ⁺_i and σ⁻_{i+1}
        flux = flux + 0.25 * (sig_p[..., :-1] - sig_m[..., 1:])
    return flux


# ---------------------------------------------------------------------------
# Semi-discrete operator and time stepping


@dataclass
class RHSInfo:
    speeds: InterfaceSpeeds
    a_max: float
    fluxes: np.ndarray


def _rhs_padded(problem, C: np.ndarray, dx: float, g: int, n: int, config: SchemeConfig,
                speeds: Optional[InterfaceSpeeds] = None):
    ev = problem.evaluate(C)
    F = ev.fluxes[0]
    if speeds is None:
        speeds = speeds_for(problem, ev, C, config)
    lo_if, hi_if = g - 1, g + n  # interior interfaces g-1 .. g-1+n
    if config.scheme == "JX" and speeds is not None and _is_constant_jx(speeds):
        a = float(speeds.a_plus.flat[0])
        flux_all = jx_interface_fluxes(C, F, a, config.order)
    else:
        flux_all = relaxed_interface_fluxes(C, F, speeds.a_minus, speeds.a_plus,
                                            config.order, config.theta_eps)
    # flux_all[k] belongs to padded interface k + 1
    interior = flux_all[..., lo_if - 1:hi_if - 1]
    dCdt = -(interior[..., 1:] - interior[..., :-1]) / dx
    s = speeds.interior(g, n)
    return dCdt, RHSInfo(speeds, s.max_speed, interior)


def _is_constant_jx(speeds: InterfaceSpeeds) -> bool:
    a = speeds.a_plus
    return bool(np.all(a == a.flat[0]) and np.all(speeds.a_minus == -a.flat[0]))


def semi_discrete_rhs(state: StateField1D, problem, config: SchemeConfig,
                      speeds: Optional[InterfaceSpeeds] = None) -> np.ndarray:
    """Time derivative of the interior cell averages; ghosts must be filled.

    Passing ``speeds`` pins the interface speeds (over padded interfaces)
    instead of selecting them from the state.
    """
    g, n = state.grid.ghost_width, state.grid.n_cells
    dCdt, _ = _rhs_padded(problem, state.values, state.grid.dx, g, n, config, speeds)
    return dCdt


def stable_dt(a_max: float, dx: float, cfl: float) -> float:
    return cfl * dx / a_max


@dataclass
class StepInfo:
    dt: float
    a_max: float
    a_max_stages: list = field(default_factory=list)


def advance_1d(state: StateField1D, problem, config: SchemeConfig, t: float,
               dt: Optional[float] = None, *, max_dt: Optional[float] = None,
               speeds: Optional[InterfaceSpeeds] = None):
    """One step; returns ``(new_state, StepInfo)``.

    With ``dt=None`` the step is ``cfl·dx/a_max`` from the first-stage
    speeds, clipped to ``max_dt``. A given ``dt`` is checked against the same
    bound. Speeds are reselected at the second stage.
    """
    grid = state.grid
    g, n, dx = grid.ghost_width, grid.n_cells, grid.dx
    u0 = state.values
    L0, info0 = _rhs_padded(problem, u0, dx, g, n, config, speeds)
    bound = stable_dt(info0.a_max, dx, config.cfl)
    if dt is None:
        dt = bound if max_dt is None else min(bound, max_dt)
    elif dt > bound * (1.0 + 1e-12):
        raise CFLViolation(
            f"dt = {dt:.6g} exceeds cfl*dx/a_max = {bound:.6g} (a_max = {info0.a_max:.6g})",
            info0.a_max)
    if dt == 0.0:
        return state.copy(), StepInfo(0.0, info0.a_max, [info0.a_max])
    interior = grid.interior
    u1 = u0.copy()
    u1[:, interior] = u0[:, interior] + dt * L0
    s1 = StateField1D(grid, u1, state.bc)
    s1.fill_ghosts(t + dt)
    if config.order == 1:
        return s1, StepInfo(dt, info0.a_max, [info0.a_max])
    L1, info1 = _rhs_padded(problem, u1, dx, g, n, config, speeds)
    u2 = u1.copy()
    u2[:, interior] = 0.5 * u0[:, interior] + 0.5 * (u1[:, interior] + dt * L1)
    s2 = StateField1D(grid, u2, state.bc)
    s2.fill_ghosts(t + dt)
    return s2, StepInfo(dt, info0.a_max, [info0.a_max, info1.a_max])


def step_1d(state: StateField1D, problem, config: SchemeConfig, t: float,
            dt: Optional[float]) -> StateField1D:
    """Advance by ``dt`` with forward Euler (order 1) or two-stage TVD RK."""
    new_state, _ = advance_1d(state, problem, config, t, dt)
    return new_state


def bound_dt_cap(problem, dx: float, config: SchemeConfig) -> float:
    """Step allowed by the problem's global speed bound (inf without one).

    Local speeds can vanish on a quiescent state while boundary data keeps
    changing, so adaptive steps are never allowed to exceed this.
    """
    if problem.speed_bound is None or problem.speed_bound[0] <= 0:
        return np.inf
    return config.cfl * dx / problem.speed_bound[0]


@dataclass
class RunHistory:
    dt: list = field(default_factory=list)
    a_max: list = field(default_factory=list)
    times: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.dt)


def evolve_1d(state: StateField1D, problem, config: SchemeConfig, t_end: float,
              t0: float = 0.0, max_steps: int = 10_000_000,
              callback: Optional[Callable] = None):
    """March to ``t_end`` with adaptive steps; returns ``(state, RunHistory)``."""
    hist = RunHistory()
    t = t0
    state = state.copy()
    state.fill_ghosts(t)
    cap = bound_dt_cap(problem, state.grid.dx, config)
    while t < t_end and hist.steps < max_steps:
        remaining = t_end - t
        state, info = advance_1d(state, problem, config, t, None, max_dt=min(remaining, cap))
        # absorb floating-point leftovers so the loop ends exactly at t_end
        t = t_end if info.dt >= remaining * (1.0 - 1e-14) else t + info.dt
        hist.dt.append(info.dt)
        hist.a_max.append(info.a_max)
        hist.times.append(t)
        if not state.is_finite():
            raise FloatingPointError(f"non-finite values at t = {t:.6g}")
        if callback is not None:
            callback(state, t, info)
    return state, hist


def with_scheme(config: SchemeConfig, scheme: str, order: Optional[int] = None) -> SchemeConfig:
    return replace(config, scheme=scheme, order=config.order if order is None else order)
