"""Dimension-wise relaxed schemes on a 2D Cartesian grid.

The 1D flux kernels are applied along x on every row and along y on every
column, and both conservative differences enter one right-hand side
(unsplit). Each direction may use its own scheme, which reproduces runs
that mix one scheme in x with another in y.

Face velocities, when given, multiply the flux at each face:
``u_x`` is shaped ``(ny, nx + 1)`` and ``u_y`` is shaped ``(ny + 1, nx)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import StateField2D
from .problems import CellEval
from .schemes1d import (
    CFLViolation,
    InterfaceSpeeds,
    SchemeConfig,
    local_speed_pairs,
    relaxed_interface_fluxes,
)

POLICIES = ("jx_equal", "jx_min_ax", "jx_min_ay", "vrs_sqrt2", "vro_factor2")


class SubcharacteristicViolation(RuntimeError):
    pass


@dataclass
class Speeds2D:
    """x-speeds ``(m, ny, nx + 2g - 1)`` and y-speeds ``(m, nx, ny + 2g - 1)``.

    Both use padded interface indexing along the last axis; y-speeds are
    stored column-major so that the interface axis is last.
    """

    x: InterfaceSpeeds
    y: InterfaceSpeeds

    @property
    def ax_max(self) -> float:
        return self.x.max_speed

    @property
    def ay_max(self) -> float:
        return self.y.max_speed


@dataclass(frozen=True)
class Scheme2DConfig:
    x: SchemeConfig = field(default_factory=SchemeConfig)
    y: SchemeConfig = field(default_factory=SchemeConfig)
    jx_policy: str = "jx_equal"
    # factor over λ_max for the direction held near its minimum in jx_min_*
    jx_min_factor: float = 1.1

    def __post_init__(self) -> None:
        if self.jx_policy not in ("jx_equal", "jx_min_ax", "jx_min_ay"):
            raise ValueError(f"unknown JX pairing {self.jx_policy!r}")
        if self.jx_min_factor <= 1.0:
            raise ValueError("jx_min_factor must exceed 1")
        if self.x.order != self.y.order:
            raise ValueError("x and y must use the same order (one time integrator)")

    @classmethod
    def same(cls, scheme: str, order: int = 2, cfl: float = 0.5, **kw) -> "Scheme2DConfig":
        extra = {k: kw.pop(k) for k in ("jx_policy", "jx_min_factor") if k in kw}
        c = SchemeConfig(scheme, order, cfl, **kw)
        return cls(c, c, **extra)

    @property
    def order(self) -> int:
        return self.x.order

    @property
    def cfl(self) -> float:
        return min(self.x.cfl, self.y.cfl)

    def policies(self) -> tuple[str, str]:
        def pol(c: SchemeConfig) -> str:
            return {"JX": self.jx_policy, "VRS": "vrs_sqrt2", "VRO": "vro_factor2"}[c.scheme]
        return pol(self.x), pol(self.y)


def check_subchar_2d(lambda_x_max, lambda_y_max, a_x, a_y, slack: float = 1e-12) -> bool:
    """True where ``λx²/ax² + λy²/ay² <= 1`` (elementwise, then all)."""
    return bool(np.all(subchar_sum([lambda_x_max, lambda_y_max], [a_x, a_y]) <= 1.0 + slack))


def subchar_sum(lambdas: Sequence, speeds: Sequence) -> np.ndarray:
    """``Σ_d λ_d² / a_d²`` for any number of directions."""
    total = 0.0
    for lam, a in zip(lambdas, speeds):
        a = np.asarray(a, dtype=float)
        if np.any(a <= 0):
            raise ValueError("subcharacteristic speeds must be positive")
        total = total + (np.asarray(lam, dtype=float) / a) ** 2
    return np.asarray(total)


def jx_speed_pair(lx: float, ly: float, policy: str, min_factor: float = 1.1,
                  floor: float = 1e-12) -> tuple[float, float]:
    """Constant ``(a_x, a_y)`` meeting the 2D condition.

    ``jx_equal`` uses the Euclidean norm of the two maxima in both
    directions. ``jx_min_ax`` sets ``a_x = min_factor·λx`` and takes the
    smallest admissible ``a_y``; ``jx_min_ay`` mirrors it.
    """
    lx, ly = abs(lx), abs(ly)
    if policy == "jx_equal":
        a = max(np.hypot(lx, ly), floor)
        return a, a
    if policy == "jx_min_ax":
        ax = max(min_factor * lx, floor)
        ay = ly / np.sqrt(1.0 - (lx / ax) ** 2) if ly > 0 else floor
        return ax, max(ay, floor)
    if policy == "jx_min_ay":
        ay, ax = jx_speed_pair(ly, lx, "jx_min_ax", min_factor, floor)
        return ax, ay
    raise ValueError(f"unknown JX pairing {policy!r}")


# ---------------------------------------------------------------------------
# Directional views of the padded state


def _face_velocity_padded(v: Optional[np.ndarray], g: int) -> Optional[np.ndarray]:
    """Extend interior face velocities to padded interfaces by edge copies."""
    if v is None:
        return None
    return np.pad(v, ((0, 0), (g - 1, g - 1)), mode="edge")


def _directional(state: StateField2D, ev: CellEval, velocities):
    """Rows for x and columns for y, each with the interface axis last."""
    g = state.grid.ghost_width
    ny, nx = state.grid.ny, state.grid.nx
    rows = slice(g, g + ny)
    cols = slice(g, g + nx)
    C = state.values
    ux = uy = None
    if velocities is not None:
        ux = _face_velocity_padded(np.asarray(velocities[0], dtype=float), g)
        uy = _face_velocity_padded(np.asarray(velocities[1], dtype=float).T, g)
    out = {}
    out["x"] = dict(
        C=C[:, rows, :],
        F=ev.fluxes[0][:, rows, :],
        ev=CellEval((ev.fluxes[0][:, rows, :],), (ev.lo[0][rows, :],), (ev.hi[0][rows, :],),
                    None if ev.aux is None else ev.aux[rows, :]),
        v=ux,
    )
    yF = np.swapaxes(ev.fluxes[1][:, :, cols], 1, 2)
    out["y"] = dict(
        C=np.swapaxes(C[:, :, cols], 1, 2),
        F=yF,
        ev=CellEval((yF,), (ev.lo[1][:, cols].T,), (ev.hi[1][:, cols].T,),
                    None if ev.aux is None else ev.aux[:, cols].T),
        v=uy,
    )
    return out


def _direction_lambda_max(problem, d: dict, direction_index: int) -> float:
    """Largest |eigenvalue| seen by any face in one direction."""
    lo, hi = d["ev"].lo[0], d["ev"].hi[0]
    rho = np.maximum(np.abs(lo), np.abs(hi))
    if problem.speed_bound is not None:
        rho = np.maximum(rho, problem.speed_bound[direction_index])
    face = np.maximum(rho[:, :-1], rho[:, 1:])
    if d["v"] is not None:
        face = face * np.abs(d["v"])
    return float(np.max(face))


def _speeds_from_eval(problem, state: StateField2D, ev: CellEval, velocities,
                      config: Scheme2DConfig, policies=None) -> Speeds2D:
    dirs = _directional(state, ev, velocities)
    pols = policies if policies is not None else config.policies()
    cfgs = (config.x, config.y)
    m = state.n_components
    out = []
    jx_pair = None
    for k, name in enumerate(("x", "y")):
        d = dirs[name]
        pol = pols[k]
        cfg = cfgs[k]
        n_if = d["C"].shape[-1] - 1
        shape = (m,) + d["C"].shape[1:-1] + (n_if,)
        if pol.startswith("jx"):
            if jx_pair is None:
                lx = _direction_lambda_max(problem, dirs["x"], 0)
                ly = _direction_lambda_max(problem, dirs["y"], 1)
                floor = min(config.x.speed_floor, config.y.speed_floor)
                ax, ay = jx_speed_pair(lx, ly, pol, config.jx_min_factor, floor)
                safety = (config.x.speed_safety, config.y.speed_safety)
                jx_pair = (ax * safety[0], ay * safety[1])
            a = jx_pair[k]
            out.append(InterfaceSpeeds(np.full(shape, -a), np.full(shape, a)))
            continue
        if pol == "vrs_sqrt2":
            mode, factor = "symmetric", np.sqrt(2.0)
        elif pol == "vro_factor2":
            mode, factor = "optimal", 2.0
        else:
            raise ValueError(f"unknown speed policy {pol!r}")
        am, ap = local_speed_pairs(problem, d["ev"], d["C"], mode, direction=0, axis=1,
                                   velocity=d["v"], safety=factor * cfg.speed_safety,
                                   floor=cfg.speed_floor)
        out.append(InterfaceSpeeds(np.broadcast_to(am, shape).copy(),
                                   np.broadcast_to(ap, shape).copy()))
    speeds = Speeds2D(out[0], out[1])
    _verify_subchar(problem, dirs, speeds, pols, state.grid.ghost_width)
    return speeds


def _verify_subchar(problem, dirs, speeds: Speeds2D, pols, g: int) -> None:
    """Check the 2D condition cell by cell on interior cells.

    Each cell pairs its own directional eigenvalue bound (times the face
    velocity) with the speed on each adjacent face, on the side of the
    speed pair that matches the eigenvalue sign; the worst face per
    direction enters the sum.
    """
    terms = []
    for k, name in enumerate(("x", "y")):
        d = dirs[name]
        sp = speeds.x if k == 0 else speeds.y
        lo, hi = d["ev"].lo[0], d["ev"].hi[0]
        if pols[k].startswith("jx") and problem.speed_bound is not None:
            b = problem.speed_bound[k]
            lo = np.minimum(lo, -b)
            hi = np.maximum(hi, b)
        am, ap = sp.a_minus[0], sp.a_plus[0]
        n = lo.shape[-1]
        worst = np.zeros(lo.shape[:-1] + (n - 2 * g,))
        for side in (0, 1):
            # faces left (side 0) and right (side 1) of interior cells
            face = slice(g - 1 + side, g - 1 + side + n - 2 * g)
            cell = slice(g, n - g)
            cl, ch = lo[..., cell], hi[..., cell]
            if d["v"] is not None:
                v = d["v"][..., face]
                cl, ch = np.where(v >= 0, v * cl, v * ch), np.where(v >= 0, v * ch, v * cl)
            with np.errstate(divide="ignore", invalid="ignore"):
                r_hi = np.where(ch > 0, ch / ap[..., face], 0.0)
                r_lo = np.where(cl < 0, cl / am[..., face], 0.0)
            worst = np.maximum(worst, np.maximum(r_hi, r_lo) ** 2)
        terms.append(worst if k == 0 else worst.T)
    total = terms[0] + terms[1]
    if np.any(total > 1.0 + 1e-12):
        raise SubcharacteristicViolation(
            f"2D subcharacteristic condition fails: max sum {float(total.max()):.6g} > 1")


def select_speeds_2d(problem, state: StateField2D, velocities=None,
                     policy: Union[str, Sequence[str]] = "jx_equal",
                     config: Optional[Scheme2DConfig] = None) -> Speeds2D:
    """Face speeds for both directions under a pairing policy (or one per direction)."""
    pols = (policy, policy) if isinstance(policy, str) else tuple(policy)
    for p in pols:
        if p not in POLICIES:
            raise ValueError(f"unknown speed policy {p!r}")
    cfg = config if config is not None else Scheme2DConfig()
    ev = problem.evaluate(state.values)
    return _speeds_from_eval(problem, state, ev, velocities, cfg, pols)


# ---------------------------------------------------------------------------
# Right-hand side and stepping


@dataclass
class RHS2DInfo:
    speeds: Speeds2D
    ax_max: float
    ay_max: float
    # net inflow rate through the domain boundary per component
    boundary_inflow: np.ndarray


def _direction_fluxes(d: dict, sp: InterfaceSpeeds, order: int, eps: float, g: int, n: int):
    C, F, v = d["C"], d["F"], d["v"]
    if v is None:
        flux = relaxed_interface_fluxes(C, F, sp.a_minus, sp.a_plus, order, eps)
    else:
        H_left = v * F[..., :-1]
        dH = v * (F[..., 1:] - F[..., :-1])
        flux = relaxed_interface_fluxes(C, F, sp.a_minus, sp.a_plus, order, eps,
                                        H_left=H_left, dH=dH)
        # stagnant faces carry nothing; the speed floor would otherwise leak diffusion
        flux = np.where(v[..., 1:-1] == 0.0, 0.0, flux)
    # flux[k] is padded interface k + 1; keep interior faces g-1 .. g-1+n
    return flux[..., g - 2:g - 1 + n]


def _rhs_2d(problem, state: StateField2D, velocities, config: Scheme2DConfig,
            speeds: Optional[Speeds2D] = None):
    grid = state.grid
    g = grid.ghost_width
    ev = problem.evaluate(state.values)
    if speeds is None:
        speeds = _speeds_from_eval(problem, state, ev, velocities, config)
    dirs = _directional(state, ev, velocities)
    fx = _direction_fluxes(dirs["x"], speeds.x, config.order, config.x.theta_eps, g, grid.nx)
    fy = _direction_fluxes(dirs["y"], speeds.y, config.order, config.y.theta_eps, g, grid.ny)
    dCdt = -(fx[..., 1:] - fx[..., :-1]) / grid.dx
    dCdt = dCdt - np.swapaxes(fy[..., 1:] - fy[..., :-1], 1, 2) / grid.dy
    inflow = ((fx[..., 0] - fx[..., -1]).sum(axis=1) * grid.dy
              + (fy[..., 0] - fy[..., -1]).sum(axis=1) * grid.dx)
    sx = speeds.x.a_plus[..., g - 1:g + grid.nx], speeds.x.a_minus[..., g - 1:g + grid.nx]
    sy = speeds.y.a_plus[..., g - 1:g + grid.ny], speeds.y.a_minus[..., g - 1:g + grid.ny]
    ax = float(max(np.max(np.abs(sx[0])), np.max(np.abs(sx[1]))))
    ay = float(max(np.max(np.abs(sy[0])), np.max(np.abs(sy[1]))))
    return dCdt, RHS2DInfo(speeds, ax, ay, inflow)


def semi_discrete_rhs_2d(state: StateField2D, problem, config: Scheme2DConfig,
                         velocities=None, speeds: Optional[Speeds2D] = None) -> np.ndarray:
    dCdt, _ = _rhs_2d(problem, state, velocities, config, speeds)
    return dCdt


def stable_dt_2d(ax: float, ay: float, dx: float, dy: float, cfl: float) -> float:
    return cfl * min(dx / ax, dy / ay)


@dataclass
class Step2DInfo:
    dt: float
    ax_max: float
    ay_max: float
    # time-integrated net inflow per component over the step
    boundary_inflow: np.ndarray


def advance_2d(state: StateField2D, problem, velocities, config: Scheme2DConfig, t: float,
               dt: Optional[float] = None, *, max_dt: Optional[float] = None,
               speeds: Optional[Speeds2D] = None):
    """One unsplit step; returns ``(new_state, Step2DInfo)``.

    Passing ``speeds`` pins the face speeds for both stages.
    """
    grid = state.grid
    L0, i0 = _rhs_2d(problem, state, velocities, config, speeds)
    bound = stable_dt_2d(i0.ax_max, i0.ay_max, grid.dx, grid.dy, config.cfl)
    if dt is None:
        dt = bound if max_dt is None else min(bound, max_dt)
    elif dt > bound * (1.0 + 1e-12):
        raise CFLViolation(
            f"dt = {dt:.6g} exceeds cfl*min(dx/ax, dy/ay) = {bound:.6g} "
            f"(ax = {i0.ax_max:.6g}, ay = {i0.ay_max:.6g})", max(i0.ax_max, i0.ay_max))
    if dt == 0.0:
        return state.copy(), Step2DInfo(0.0, i0.ax_max, i0.ay_max, np.zeros(state.n_components))
    inner = (slice(None),) + grid.interior
    u0 = state.values
    u1 = u0.copy()
    u1[inner] = u0[inner] + dt * L0
    s1 = StateField2D(grid, u1, state.bc)
    s1.fill_ghosts(t + dt)
    if config.order == 1:
        return s1, Step2DInfo(dt, i0.ax_max, i0.ay_max, dt * i0.boundary_inflow)
    L1, i1 = _rhs_2d(problem, s1, velocities, config, speeds)
    u2 = u1.copy()
    u2[inner] = 0.5 * u0[inner] + 0.5 * (u1[inner] + dt * L1)
    s2 = StateField2D(grid, u2, state.bc)
    s2.fill_ghosts(t + dt)
    inflow = 0.5 * dt * (i0.boundary_inflow + i1.boundary_inflow)
    return s2, Step2DInfo(dt, i0.ax_max, i0.ay_max, inflow)


def step_2d(state: StateField2D, problem, velocities, config: Scheme2DConfig,
            dt: Optional[float], t: float = 0.0) -> StateField2D:
    new_state, _ = advance_2d(state, problem, velocities, config, t, dt)
    return new_state


def bound_dt_cap_2d(problem, grid, config: Scheme2DConfig, velocities=None) -> float:
    """Step allowed by the problem's global speed bound (inf without one).

    Local speeds can vanish on a quiescent state while boundary data keeps
    changing, so adaptive steps are never allowed to exceed this.
    """
    if problem.speed_bound is None:
        return np.inf
    vx = vy = 1.0
    if velocities is not None:
        vx = float(np.max(np.abs(velocities[0])))
        vy = float(np.max(np.abs(velocities[1])))
    lx = problem.speed_bound[0] * vx
    ly = problem.speed_bound[1] * vy
    caps = [grid.dx / lx if lx > 0 else np.inf, grid.dy / ly if ly > 0 else np.inf]
    return config.cfl * min(caps)


def evolve_2d(state: StateField2D, problem, config: Scheme2DConfig, t_end: float,
              velocities=None, t0: float = 0.0, max_steps: int = 10_000_000, callback=None):
    """March a 2D state with fixed face velocities (or none) to ``t_end``."""
    t = t0
    state = state.copy()
    state.fill_ghosts(t)
    history = []
    cap = bound_dt_cap_2d(problem, state.grid, config, velocities)
    while t < t_end and len(history) < max_steps:
        remaining = t_end - t
        state, info = advance_2d(state, problem, velocities, config, t, None,
                                 max_dt=min(remaining, cap))
        t = t_end if info.dt >= remaining * (1.0 - 1e-14) else t + info.dt
        history.append(info)
        if not state.is_finite():
            raise FloatingPointError(f"non-finite values at t = {t:.6g}")
        if callback is not None:
            callback(state, t, info)
    return state, history
