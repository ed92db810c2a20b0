"""Seeded invariant suites behind the ``properties`` subcommand."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import BoundarySpec, Grid1D, StateField1D, total_variation
from ..problems import TernaryFluid, burgers_problem, flash_arrays
from ..schemes1d import (InterfaceSpeeds, SchemeConfig, advance_1d, jx_global_speed,
                         speeds_for)
from .diagnostics import harten_coefficients

SUITES = ("monotonicity", "tvd", "conservation", "reduction", "flash", "harten")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list:
        out = [f"{'PASS' if c.passed else 'FAIL'}  {self.suite}: {c.name}  {c.detail}".rstrip()
               for c in self.checks]
        out.append(f"{'PASS' if self.passed else 'FAIL'}  {self.suite}")
        return out


def _cyclic_tv(u: np.ndarray) -> float:
    return total_variation(np.r_[u, u[:1]])


def _random_profile(rng, n: int) -> np.ndarray:
    """Random scalar data: smooth modes plus jumps."""
    x = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    u = np.zeros(n)
    for k in range(1, 4):
        u += rng.normal(0.0, 1.0 / k) * np.sin(k * x + rng.uniform(0, 2 * np.pi))
    jumps = rng.integers(0, 3)
    for _ in range(jumps):
        i, j = np.sort(rng.integers(0, n, 2))
        u[i:j] += rng.normal(0.0, 0.5)
    return u


def _random_monotone(rng, n: int) -> np.ndarray:
    u = np.sort(rng.uniform(-1.0, 1.0, n))
    return u if rng.random() < 0.5 else u[::-1]


def monotonicity(seed: int = 0, trials: int = 50, steps: int = 200, n: int = 40) -> SuiteReport:
    """First-order VRS (cfl 1) and VRO (cfl 1/2) keep monotone Burgers data monotone."""
    rng = np.random.default_rng(seed)
    prob = burgers_problem()
    rep = SuiteReport("monotonicity")
    for scheme, cfl in (("VRS", 1.0), ("VRO", 0.5)):
        cfg = SchemeConfig(scheme, 1, cfl)
        worst = 0.0
        for _ in range(trials):
            u0 = _random_monotone(rng, n)
            sign = 1.0 if u0[-1] >= u0[0] else -1.0
            s = StateField1D.from_interior(Grid1D(n, 0.0, 1.0), u0[None],
                                           BoundarySpec.extrapolate())
            for _ in range(steps):
                s, _ = advance_1d(s, prob, cfg, 0.0)
                worst = max(worst, float(np.max(-sign * np.diff(s.interior[0]), initial=0.0)))
        rep.checks.append(Check(f"{scheme}-1 cfl {cfl}", worst <= 1e-12,
                                f"max monotonicity violation {worst:.3e}"))
    return rep


def tvd(seed: int = 0, trials: int = 100, steps: int = 20, n: int = 40) -> SuiteReport:
    """Second-order VRS/VRO at cfl 1/2 never increase total variation."""
    rng = np.random.default_rng(seed)
    prob = burgers_problem()
    rep = SuiteReport("tvd")
    for scheme in ("VRS", "VRO"):
        cfg = SchemeConfig(scheme, 2, 0.5)
        worst = -np.inf
        bad_harten = 0
        for _ in range(trials):
            s = StateField1D.from_interior(Grid1D(n, 0.0, 1.0), _random_profile(rng, n)[None],
                                           BoundarySpec.periodic())
            for _ in range(steps):
                tv0 = _cyclic_tv(s.interior[0])
                bad_harten += not _harten_at(s, prob, cfg).ok()
                s, _ = advance_1d(s, prob, cfg, 0.0)
                worst = max(worst, _cyclic_tv(s.interior[0]) - tv0)
        rep.checks.append(Check(f"{scheme}-2 TV", worst <= 1e-12, f"max TV increase {worst:.3e}"))
        rep.checks.append(Check(f"{scheme}-2 Harten coefficients", bad_harten == 0,
                                f"{bad_harten} states with violations"))
    return rep


def conservation(seed: int = 0, trials: int = 20, n: int = 40) -> SuiteReport:
    """Periodic steps preserve the cell sum for every scheme and order."""
    rng = np.random.default_rng(seed)
    prob = burgers_problem()
    rep = SuiteReport("conservation")
    for scheme in ("JX", "VRS", "VRO"):
        for order in (1, 2):
            cfg = SchemeConfig(scheme, order, 0.5)
            worst = 0.0
            for _ in range(trials):
                u0 = _random_profile(rng, n) + rng.normal()
                s = StateField1D.from_interior(Grid1D(n, 0.0, 1.0), u0[None],
                                               BoundarySpec.periodic())
                s1, _ = advance_1d(s, prob, cfg, 0.0)
                scale = max(np.sum(np.abs(u0)), 1e-300)
                worst = max(worst, abs(s1.interior.sum() - u0.sum()) / scale)
            rep.checks.append(Check(f"{scheme}-{order}", worst <= 1e-12,
                                    f"max relative change {worst:.3e}"))
    return rep


def reduction(seed: int = 0, trials: int = 50, n: int = 40) -> SuiteReport:
    """VRS pinned to the JX global speed reproduces the JX update."""
    rng = np.random.default_rng(seed)
    prob = burgers_problem()
    rep = SuiteReport("reduction")
    for order in (1, 2):
        worst = 0.0
        for _ in range(trials):
            s = StateField1D.from_interior(Grid1D(n, 0.0, 1.0), _random_profile(rng, n)[None],
                                           BoundarySpec.periodic())
            a = jx_global_speed(prob, s, SchemeConfig("JX", order, 0.5))
            shape = (1, s.values.shape[1] - 1)
            pinned = InterfaceSpeeds(np.full(shape, -a), np.full(shape, a))
            dt = 0.5 * s.grid.dx / a
            jx, _ = advance_1d(s, prob, SchemeConfig("JX", order, 0.5), 0.0, dt, speeds=pinned)
            vrs, _ = advance_1d(s, prob, SchemeConfig("VRS", order, 0.5), 0.0, dt, speeds=pinned)
            worst = max(worst, float(np.max(np.abs(jx.interior - vrs.interior))))
        rep.checks.append(Check(f"order {order}", worst <= 1e-13, f"max difference {worst:.3e}"))
    return rep


def flash_oracle(C1, C2, fluid: TernaryFluid, iterations: int = 200) -> np.ndarray:
    """Saturation by plain bisection on the Rachford-Rice residual."""
    C = np.stack([C1, C2, 1.0 - C1 - C2])
    K = np.asarray(fluid.K, dtype=float)[:, None]
    liquid = np.sum(C * K, axis=0) <= 1.0
    vapor = ~liquid & (np.sum(C / K, axis=0) <= 1.0)
    lo = np.zeros(C1.shape)
    hi = np.ones(C1.shape)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        h = np.sum(C * (K - 1.0) / (1.0 + mid * (K - 1.0)), axis=0)
        lo = np.where(h > 0, mid, lo)
        hi = np.where(h > 0, hi, mid)
    S = 0.5 * (lo + hi)
    return np.where(liquid, 0.0, np.where(vapor, 1.0, S))


def random_compositions(rng, trials: int):
    """Uniform samples of the composition simplex."""
    w = rng.dirichlet(np.ones(3), size=trials)
    return w[:, 0], w[:, 1]


def flash(seed: int = 0, trials: int = 10_000) -> SuiteReport:
    rng = np.random.default_rng(seed)
    fluid = TernaryFluid()
    C1, C2 = random_compositions(rng, trials)
    S, c_L, c_V, _ = flash_arrays(C1, C2, fluid)
    S_ref = flash_oracle(C1, C2, fluid)
    dS = float(np.max(np.abs(S - S_ref)))
    C = np.stack([C1, C2, 1.0 - C1 - C2])
    recon = float(np.max(np.abs(S * c_V + (1.0 - S) * c_L - C)))
    rep = SuiteReport("flash")
    rep.checks.append(Check("saturation vs bisection", dS <= 1e-9, f"max |dS| {dS:.3e}"))
    rep.checks.append(Check("composition reconstruction", recon <= 1e-10, f"max error {recon:.3e}"))
    return rep


def _harten_at(s: StateField1D, prob, cfg: SchemeConfig, speed_scale: float = 1.0):
    ev = prob.evaluate(s.values)
    sp = speeds_for(prob, ev, s.values, cfg)
    if speed_scale != 1.0:
        sp = InterfaceSpeeds(sp.a_minus * speed_scale, sp.a_plus * speed_scale)
    dt = cfg.cfl * s.grid.dx / sp.interior(s.grid.ghost_width, s.grid.n_cells).max_speed
    return harten_coefficients(s, sp, prob, dt, s.grid.dx)


def harten(seed: int = 0, trials: int = 100, n: int = 40) -> SuiteReport:
    """Coefficient bounds under the speed hypotheses, and their failure with undersized speeds."""
    rng = np.random.default_rng(seed)
    prob = burgers_problem()
    rep = SuiteReport("harten")
    for scheme in ("VRS", "VRO"):
        cfg = SchemeConfig(scheme, 2, 0.5)
        bad = 0
        flagged = 0
        for _ in range(trials):
            s = StateField1D.from_interior(Grid1D(n, 0.0, 1.0), _random_monotone(rng, n)[None],
                                           BoundarySpec.extrapolate())
            bad += not _harten_at(s, prob, cfg).ok()
            flagged += _harten_at(s, prob, cfg, speed_scale=0.25).violations()["kappa1_negative"] > 0
        rep.checks.append(Check(f"{scheme}-2 bounds hold", bad == 0, f"{bad} of {trials} states violate"))
        rep.checks.append(Check(f"{scheme}-2 undersized speeds flagged", flagged > 0,
                                f"{flagged} of {trials} states report kappa1 < 0"))
    return rep


RUNNERS = {
    "monotonicity": monotonicity,
    "tvd": tvd,
    "conservation": conservation,
    "reduction": reduction,
    "flash": flash,
    "harten": harten,
}


def run_suite(name: str, seed: int = 0, trials=None) -> SuiteReport:
    if name not in RUNNERS:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    kw = {"seed": seed}
    if trials is not None:
        kw["trials"] = trials
    return RUNNERS[name](**kw)
