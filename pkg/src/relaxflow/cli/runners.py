"""Experiment runners behind the ``run`` and ``convergence`` subcommands."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..core import (Boundary, BoundarySpec, Grid1D, Grid2D, StateField1D, StateField2D,
                    error_norms, observed_order)
from ..pressure import (PermeabilityField, WellBoundary, generate_perm_field,
                        injection_state, run_sequential)
from ..problems import (FLUID_PRESETS, INITIAL_OIL, INJECTION_GAS, LinearAdvectionProblem,
                        TernaryProblem, burgers_problem, er_problem)
from ..schemes1d import CountedProblem, FluxCounter, SchemeConfig, evolve_1d
from ..schemes2d import Scheme2DConfig, evolve_2d
from .config import ConfigError, RunConfig
from .output import output_dir, write_columns, write_csv, write_json

# default synthetic permeability for the 2D displacement
PERM_DEFAULTS = {"log_std": 1.5, "correlation_length": 4.0}


# ---------------------------------------------------------------------------
# Problem setup


def fluid_for(cfg: RunConfig):
    base = FLUID_PRESETS[cfg.problem]
    kw = {k: cfg.params[k] for k in ("S_or", "S_gc", "M") if k in cfg.params}
    if "K" in cfg.params:
        kw["K"] = tuple(float(v) for v in cfg.params["K"])
    try:
        return replace(base, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError("params", str(exc)) from None


@dataclass
class Setup:
    problem: object
    grid: object
    state: object
    # exact(t) -> interior array, or None
    exact: Optional[object] = None
    extras: dict = field(default_factory=dict)


def setup_1d(cfg: RunConfig, n: int) -> Setup:
    p = cfg.params
    if cfg.problem == "burgers":
        prob = burgers_problem()
        grid = Grid1D(n, p.get("x_min", -np.pi), p.get("x_max", np.pi))
        bc = BoundarySpec.periodic()
        C0 = prob.initial(grid.centers)[None]
        exact = (lambda t: prob.exact(grid.centers, t)[None]) if cfg.t_final < prob.shock_time else None
    elif cfg.problem == "linear_advection":
        x0, x1 = p.get("x_min", -np.pi), p.get("x_max", np.pi)
        prob = LinearAdvectionProblem(p.get("speed", 1.0), x1 - x0, x_min=x0)
        grid = Grid1D(n, x0, x1)
        bc = BoundarySpec.periodic()
        C0 = prob.exact(grid.centers, 0.0)[None]
        exact = lambda t: prob.exact(grid.centers, t)[None]
    else:
        prob = TernaryProblem(fluid_for(cfg), ndim=1, name=cfg.problem)
        grid = Grid1D(n, 0.0, p.get("length", 2.5))
        bc = BoundarySpec(Boundary("dirichlet", values=INJECTION_GAS), Boundary("extrapolate"))
        C0 = np.empty((2, n))
        C0[0], C0[1] = INITIAL_OIL
        exact = None
    return Setup(prob, grid, StateField1D.from_interior(grid, C0, bc), exact)


def permeability_for(cfg: RunConfig, nx: int, ny: int) -> PermeabilityField:
    p = cfg.params
    if "perm_csv" in p:
        try:
            perm = PermeabilityField.from_csv(p["perm_csv"])
        except (OSError, ValueError) as exc:
            raise ConfigError("params.perm_csv", str(exc)) from None
        if perm.shape != (ny, nx):
            raise ConfigError("params.perm_csv", f"shape {perm.shape} does not match grid {(ny, nx)}")
        return perm
    try:
        return generate_perm_field(nx, ny, int(p.get("perm_seed", cfg.seed)),
                                   float(p.get("log_std", PERM_DEFAULTS["log_std"])),
                                   float(p.get("correlation_length",
                                               PERM_DEFAULTS["correlation_length"])))
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from None


def setup_2d(cfg: RunConfig, nx: int, ny: int) -> Setup:
    if cfg.problem == "er":
        prob = er_problem()
        grid = Grid2D(nx, ny, 0.0, 1.0, 0.0, 2.0)
        side = Boundary("time_dependent_dirichlet", func=lambda x, y, t: prob.exact(x, y, t))
        bc = BoundarySpec(side, side, side, side)
        X, Y = np.meshgrid(grid.x_centers, grid.y_centers)
        state = StateField2D.from_interior(grid, prob.exact(X, Y, 0.0), bc)
        return Setup(prob, grid, state, lambda t: prob.exact(X, Y, t))
    fluid = fluid_for(cfg)
    grid = Grid2D(nx, ny, 0.0, 1.0, 0.0, 1.0)
    rate = cfg.params.get("rate", 1.0)
    if not isinstance(rate, (int, float)) or rate < 0:
        raise ConfigError("params.rate", "must be a nonnegative number")
    wells = WellBoundary(rate=float(rate), composition=INJECTION_GAS + (1.0 - sum(INJECTION_GAS),))
    prob = TernaryProblem(fluid, ndim=2, name=cfg.problem)
    state = injection_state(grid, wells, INITIAL_OIL)
    extras = {"fluid": fluid, "perm": permeability_for(cfg, nx, ny), "wells": wells}
    return Setup(prob, grid, state, None, extras)


def scheme_1d(cfg: RunConfig, scheme: Optional[str] = None) -> SchemeConfig:
    return SchemeConfig(scheme or cfg.scheme_x, cfg.order_x, cfg.cfl)


def scheme_2d(cfg: RunConfig, scheme: Optional[str] = None) -> Scheme2DConfig:
    return Scheme2DConfig(SchemeConfig(scheme or cfg.scheme_x, cfg.order_x, cfg.cfl),
                          SchemeConfig(scheme or cfg.scheme_y, cfg.order_y, cfg.cfl),
                          jx_policy=cfg.jx_policy)


# ---------------------------------------------------------------------------
# Simulation


@dataclass
class RunResult:
    setup: Setup
    state: object
    steps: int
    stages: int
    dt: list
    speeds: dict
    flux_evaluations: int
    extras: dict = field(default_factory=dict)


def simulate(cfg: RunConfig, size=None, scheme: Optional[str] = None) -> RunResult:
    """Evolve the configured problem (no I/O)."""
    counter = FluxCounter()
    if cfg.ndim == 1:
        n = cfg.nx if size is None else size
        st = setup_1d(cfg, n)
        sc = scheme_1d(cfg, scheme)
        prob = CountedProblem(st.problem, counter)
        state, hist = evolve_1d(st.state, prob, sc, cfg.t_final)
        return RunResult(st, state, hist.steps, sc.order, list(hist.dt),
                         {"a_max": list(hist.a_max)}, counter.count)
    nx, ny = (cfg.nx, cfg.ny) if size is None else size
    st = setup_2d(cfg, nx, ny)
    sc = scheme_2d(cfg, scheme)
    prob = CountedProblem(st.problem, counter)
    extras = {}
    if cfg.problem == "er":
        state, hist = evolve_2d(st.state, prob, sc, cfg.t_final)
        infos = hist
    else:
        ex = st.extras
        state, hist = run_sequential(st.state, ex["fluid"], ex["perm"], ex["wells"], sc,
                                     cfg.t_final, problem=prob)
        infos = [h.transport for h in hist]
        defects = [float(np.max(np.abs(h.mass_defect) / np.maximum(np.abs(h.mass_after), 1e-300)))
                   for h in hist]
        extras["max_relative_mass_defect"] = max(defects, default=0.0)
        extras["pressure_system"] = hist[-1].system if hist else None
    return RunResult(st, state, len(infos), sc.order, [i.dt for i in infos],
                     {"ax_max": [i.ax_max for i in infos], "ay_max": [i.ay_max for i in infos]},
                     counter.count, extras)


def flux_count_rows(n_cells: int, ghost_width: int, stages: int, steps: int, measured: int):
    """Relaxed versus central flux-evaluation counts for a 1D run.

    A relaxed interface set needs one evaluation per cell value; a central
    scheme evaluates the two reconstructed states at every interface.
    """
    per_stage = n_cells + 2 * ghost_width
    calls = stages * steps
    rows = [
        ("relaxed_measured", measured / calls if calls else 0, measured, "N + 2*ghost_width"),
        ("relaxed_interfaces", n_cells + 1, (n_cells + 1) * calls, "N + 1"),
        ("central_baseline", 2 * n_cells, 2 * n_cells * calls, "2N"),
        ("central_minus_relaxed", n_cells - 1, (n_cells - 1) * calls, "N - 1"),
        ("central_over_relaxed", 2 * n_cells / (n_cells + 1), 2 * n_cells / (n_cells + 1), "2N / (N + 1)"),
    ]
    return per_stage, rows


def run(cfg: RunConfig) -> dict:
    """Single run; writes solution, metadata and flux-count files."""
    res = simulate(cfg)
    out = output_dir(cfg.output_dir)
    stem = cfg.name
    paths = {}
    u = res.state.interior
    grid = res.setup.grid
    ternary = cfg.problem.startswith("ternary")
    cols = {}
    if cfg.ndim == 1:
        cols["x"] = grid.centers
        for i in range(u.shape[0]):
            cols[f"C{i + 1}"] = u[i]
    else:
        X, Y = np.meshgrid(grid.x_centers, grid.y_centers)
        cols["x"], cols["y"] = X, Y
        for i in range(u.shape[0]):
            cols[f"C{i + 1}"] = u[i]
    if ternary:
        cols["C3"] = 1.0 - u[0] - u[1]
    paths["solution"] = write_columns(out / f"{stem}_solution.csv", cols)
    if ternary and cfg.ndim == 1:
        paths["path"] = write_columns(out / f"{stem}_path.csv",
                                      {"cell": np.arange(grid.n_cells), "C1": u[0], "C2": u[1]})
    system = res.extras.get("pressure_system")
    if system is not None:
        X, Y = np.meshgrid(grid.x_centers, grid.y_centers)
        paths["pressure"] = write_columns(out / f"{stem}_pressure.csv",
                                          {"x": X, "y": Y, "P": system.pressure})
        xf = grid.x_min + grid.dx * np.arange(grid.nx + 1)
        yf = grid.y_min + grid.dy * np.arange(grid.ny + 1)
        XF, YC = np.meshgrid(xf, grid.y_centers)
        paths["u_x"] = write_columns(out / f"{stem}_ux.csv", {"x": XF, "y": YC, "u_x": system.u_x})
        XC, YF = np.meshgrid(grid.x_centers, yf)
        paths["u_y"] = write_columns(out / f"{stem}_uy.csv", {"x": XC, "y": YF, "u_y": system.u_y})

    meta = {
        "config": cfg.to_dict(),
        "steps": res.steps,
        "stages_per_step": res.stages,
        "dt": res.dt,
        "max_speeds": res.speeds,
        "flux_evaluations": res.flux_evaluations,
    }
    if "max_relative_mass_defect" in res.extras:
        meta["max_relative_mass_defect"] = res.extras["max_relative_mass_defect"]
    if cfg.ndim == 1:
        per_stage, rows = flux_count_rows(grid.n_cells, grid.ghost_width, res.stages,
                                          res.steps, res.flux_evaluations)
        meta["flux_evaluations_per_stage"] = per_stage
        paths["flux_counts"] = write_csv(out / f"{stem}_flux_counts.csv",
                                         ["method", "per_stage", "per_run", "formula"], rows)
    else:
        meta["flux_evaluations_per_stage"] = int(np.prod(grid.shape_with_ghosts))
    if res.setup.exact is not None and cfg.t_final >= 0:
        ex = res.setup.exact(cfg.t_final)
        dy = grid.dy if cfg.ndim == 2 else None
        meta["error"] = error_norms(u, ex, grid.dx, dy)
    paths["metadata"] = write_json(out / f"{stem}_metadata.json", meta)
    return {k: str(v) for k, v in paths.items()}


# ---------------------------------------------------------------------------
# Convergence


def _restrict(fine: np.ndarray, factor) -> np.ndarray:
    """Block average of cell values onto a grid coarser by ``factor``."""
    if np.ndim(factor) == 0:
        m, n = fine.shape
        return fine.reshape(m, n // factor, factor).mean(axis=2)
    fy, fx = factor
    m, ny, nx = fine.shape
    return fine.reshape(m, ny // fy, fy, nx // fx, fx).mean(axis=(2, 4))


def convergence_table(cfg: RunConfig) -> list:
    """Rows ``(scheme, size, l1, l1_order, linf, linf_order)``."""
    grids = cfg.grids
    if len(grids) < 2:
        raise ConfigError("grids", "need at least two grid sizes")
    key = (lambda g: g) if cfg.ndim == 1 else (lambda g: g[0])
    for a, b in zip(grids, grids[1:]):
        if cfg.ndim == 1 and not b > a:
            raise ConfigError("grids", "grid sizes must be strictly increasing")
        if cfg.ndim == 2 and not (b[0] > a[0] and b[1] > a[1]):
            raise ConfigError("grids", "grid sizes must be strictly increasing")
    if cfg.problem == "ternary_2d":
        raise ConfigError("problem", "reference unavailable: the synthetic permeability "
                                     "field changes with the grid")
    schemes = cfg.schemes or [cfg.scheme_x]
    rows = []
    for scheme in schemes:
        probe = setup_1d(cfg, grids[0]) if cfg.ndim == 1 else setup_2d(cfg, *grids[0])
        ref = None
        if probe.exact is None:
            fine = 4 * grids[-1] if cfg.ndim == 1 else [4 * grids[-1][0], 4 * grids[-1][1]]
            for g in grids:
                if cfg.ndim == 1 and fine % g:
                    raise ConfigError("grids", f"{g} does not divide the reference size {fine}")
                if cfg.ndim == 2 and (fine[0] % g[0] or fine[1] % g[1]):
                    raise ConfigError("grids", f"{g} does not divide the reference size {fine}")
            ref = (fine, simulate(cfg, fine, scheme).state.interior)
        l1, linf = [], []
        for g in grids:
            res = simulate(cfg, g, scheme)
            u = res.state.interior
            grid = res.setup.grid
            if ref is None:
                target = res.setup.exact(cfg.t_final)
            elif cfg.ndim == 1:
                target = _restrict(ref[1], ref[0] // g)
            else:
                target = _restrict(ref[1], (ref[0][1] // g[1], ref[0][0] // g[0]))
            e = error_norms(u, target, grid.dx, grid.dy if cfg.ndim == 2 else None)
            l1.append(e["l1"])
            linf.append(e["linf"])
        ns = [key(g) for g in grids]
        o1 = [np.nan] + observed_order(l1, ns)
        oinf = [np.nan] + observed_order(linf, ns)
        for i, g in enumerate(grids):
            size = g if cfg.ndim == 1 else f"{g[0]}x{g[1]}"
            rows.append((scheme, size, l1[i], o1[i], linf[i], oinf[i]))
    return rows


def convergence(cfg: RunConfig) -> dict:
    rows = convergence_table(cfg)
    out = output_dir(cfg.output_dir)
    fmt = [(s, n, a, "" if np.isnan(b) else b, c, "" if np.isnan(d) else d)
           for s, n, a, b, c, d in rows]
    path = write_csv(out / f"{cfg.name}_convergence.csv",
                     ["scheme", "N", "l1", "l1_order", "linf", "linf_order"], fmt)
    return {"convergence": str(path), "rows": rows}
