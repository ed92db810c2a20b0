"""Conservation-law problem definitions.

Every problem exposes one entry point used by the schemes, ``evaluate``,
which returns the flux in each direction and signed eigenvalue bounds for
every cell in a single pass. The schemes never call the flux anywhere else,
so the flux-evaluation count is exactly one per cell per right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

SINGLE_LIQUID = 0
SINGLE_VAPOR = 1
TWO_PHASE = 2
PHASE_NAMES = {SINGLE_LIQUID: "single_liquid", SINGLE_VAPOR: "single_vapor", TWO_PHASE: "two_phase"}


@dataclass
class CellEval:
    """Per-cell flux and eigenvalue bounds, one entry per direction."""

    fluxes: tuple
    lo: tuple
    hi: tuple
    aux: Optional[np.ndarray] = None


class ConservationProblem:
    """Base class for ``C_t + div F(C) = 0``.

    Subclasses implement ``_evaluate``. ``speed_bound`` optionally gives a
    global bound on |eigenvalue| per direction over the admissible set; the
    constant-speed scheme takes the larger of that and the observed maximum.
    """

    name: str = "problem"
    n_components: int = 1
    ndim: int = 1
    speed_bound: Optional[tuple] = None

    def evaluate(self, C: np.ndarray) -> CellEval:
        return self._evaluate(np.asarray(C, dtype=float))

    def _evaluate(self, C: np.ndarray) -> CellEval:
        raise NotImplementedError

    def flux(self, C: np.ndarray, direction: int = 0) -> np.ndarray:
        return self.evaluate(C).fluxes[direction]

    def eigen_bounds(self, C: np.ndarray, direction: int = 0):
        ev = self.evaluate(C)
        return ev.lo[direction], ev.hi[direction]

    def spectral_radius(self, C: np.ndarray, direction: int = 0) -> np.ndarray:
        lo, hi = self.eigen_bounds(C, direction)
        return np.maximum(np.abs(lo), np.abs(hi))

    def interface_bounds(self, ev: CellEval, direction: int, axis: int):
        """Eigenvalue bounds for each consecutive cell pair along ``axis``.

        Default: the extremes of the two endpoint bounds.
        """
        lo, hi = ev.lo[direction], ev.hi[direction]
        n = lo.shape[axis]
        left = np.take(lo, np.arange(n - 1), axis=axis), np.take(hi, np.arange(n - 1), axis=axis)
        right = np.take(lo, np.arange(1, n), axis=axis), np.take(hi, np.arange(1, n), axis=axis)
        return np.minimum(left[0], right[0]), np.maximum(left[1], right[1])

    @property
    def use_divided_difference(self) -> bool:
        # Only meaningful for scalar laws, where it is bounded by max|F'|.
        return self.n_components == 1

    def exact(self, *args, **kwargs):
        raise NotImplementedError(f"{self.name} has no exact solution")

    @property
    def has_exact(self) -> bool:
        return False


# ---------------------------------------------------------------------------
# Scalar problems


class BurgersProblem(ConservationProblem):
    """Inviscid Burgers equation with the ``0.5 + sin x`` initial profile."""

    name = "burgers"
    n_components = 1
    ndim = 1
    shock_time = 1.0

    def _evaluate(self, C):
        u = C[0]
        return CellEval((0.5 * C * C,), (u.copy(),), (u.copy(),))

    @staticmethod
    def initial(x):
        return 0.5 + np.sin(x)

    @property
    def has_exact(self) -> bool:
        return True

    def exact(self, x, t: float):
        return burgers_exact(x, t)


def burgers_problem() -> BurgersProblem:
    return BurgersProblem()


def burgers_exact(x, t: float, tol: float = 1e-14, max_iter: int = 100) -> np.ndarray:
    """Smooth solution of ``C = 0.5 + sin(x - C t)`` for ``t < 1``.

    Newton's method kept inside a bracket that is bisected whenever a Newton
    step leaves it. The residual is increasing in C for t < 1.
    """
    if t >= 1.0:
        raise ValueError("exact Burgers solution only exists before the shock time t = 1")
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return 0.5 + np.sin(x)
    lo = np.full_like(x, -0.5)
    hi = np.full_like(x, 1.5)
    c = 0.5 + np.sin(x)
    for _ in range(max_iter):
        arg = x - c * t
        r = c - 0.5 - np.sin(arg)
        if np.all(np.abs(r) <= tol):
            break
        lo = np.where(r < 0, c, lo)
        hi = np.where(r > 0, c, hi)
        dr = 1.0 + t * np.cos(arg)
        step = c - r / dr
        inside = (step > lo) & (step < hi)
        c = np.where(inside, step, 0.5 * (lo + hi))
    return c


class LinearAdvectionProblem(ConservationProblem):
    """``F = u C`` with periodic exact solution ``C0(x - u t)``."""

    name = "linear_advection"
    n_components = 1
    ndim = 1

    def __init__(self, speed: float = 1.0, period: float = 2 * np.pi,
                 initial: Optional[Callable] = None, x_min: float = -np.pi):
        self.speed = float(speed)
        self.period = float(period)
        self.x_min = float(x_min)
        self.initial = initial if initial is not None else (lambda x: 0.5 + np.sin(x))

    def _evaluate(self, C):
        lam = np.full(C.shape[1:], self.speed)
        return CellEval((self.speed * C,), (lam,), (lam.copy(),))

    @property
    def has_exact(self) -> bool:
        return True

    def exact(self, x, t: float):
        xs = np.mod(np.asarray(x) - self.speed * t - self.x_min, self.period) + self.x_min
        return self.initial(xs)


# ---------------------------------------------------------------------------
# Ternary gas-oil system


@dataclass(frozen=True)
class TernaryFluid:
    """Constant-K three-component fluid with Corey-type relative permeabilities.

    ``M`` is the vapour-to-liquid viscosity ratio.
    """

    K: tuple = (2.5, 1.5, 0.05)
    S_or: float = 0.1
    S_gc: float = 0.2
    M: float = 1.0 / 20.0

    def __post_init__(self) -> None:
        K1, K2, K3 = self.K
        if not (K1 > K2 > 1.0 > K3 > 0.0):
            raise ValueError("K-values must satisfy K1 > K2 > 1 > K3 > 0")
        if not (0.0 <= self.S_or < 1.0 and 0.0 <= self.S_gc < 1.0):
            raise ValueError("residual saturations must lie in [0, 1)")
        if self.S_gc + self.S_or >= 1.0:
            raise ValueError("S_gc + S_or must be below 1")
        if self.M <= 0.0:
            raise ValueError("viscosity ratio must be positive")

    @property
    def gamma(self) -> float:
        K1, K2, K3 = self.K
        return (1.0 - K3) * (K2 - 1.0) / ((K1 - K3) * (K1 - K2))


@dataclass
class FlashResult:
    S: float
    c_V: np.ndarray
    c_L: np.ndarray
    phase_state: str


def rachford_rice(S, C, K):
    """Rachford-Rice residual and its S-derivative.

    ``C`` has shape (3, ...) and ``S`` broadcasts against ``C[0]``.
    """
    Km1 = np.asarray(K, dtype=float).reshape((3,) + (1,) * (np.ndim(C) - 1)) - 1.0
    den = 1.0 + S * Km1
    h = np.sum(C * Km1 / den, axis=0)
    dh = -np.sum(C * Km1 * Km1 / (den * den), axis=0)
    return h, dh


def flash_arrays(C1, C2, fluid: TernaryFluid, tol: float = 1e-13, max_iter: int = 100):
    """Vectorised constant-K flash.

    Returns ``(S, c_L, c_V, phase)`` with ``c_L, c_V`` shaped ``(3, ...)``.
    Inputs are not validated; slightly inadmissible compositions produced by
    a scheme still flash to a finite answer because the two-phase root is
    always bracketed in [0, 1].
    """
    C1 = np.asarray(C1, dtype=float)
    C2 = np.asarray(C2, dtype=float)
    C = np.stack([C1, C2, 1.0 - C1 - C2])
    K = np.asarray(fluid.K, dtype=float).reshape((3,) + (1,) * C1.ndim)
    liquid = np.sum(C * K, axis=0) <= 1.0
    vapor = ~liquid & (np.sum(C / K, axis=0) <= 1.0)
    two = ~(liquid | vapor)

    S = np.where(vapor, 1.0, 0.0)
    if np.any(two):
        Ct = C[:, two]
        lo = np.zeros(Ct.shape[1])
        hi = np.ones(Ct.shape[1])
        s = np.full(Ct.shape[1], 0.5)
        for _ in range(max_iter):
            h, dh = rachford_rice(s, Ct, fluid.K)
            # h decreases in S: positive residual means the root lies above
            lo = np.where(h > 0, s, lo)
            hi = np.where(h < 0, s, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = s - h / dh
            inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
            s_new = np.where(inside, newton, 0.5 * (lo + hi))
            done = (np.abs(h) <= tol) | (hi - lo <= 1e-16)
            s = np.where(done, s, s_new)
            if np.all(done):
                break
        S = S.copy()
        S[two] = s

    den = 1.0 + S * (K - 1.0)
    # a single-phase cell carries its overall composition in both slots
    c_L = np.where(two, C / den, C)
    c_V = np.where(two, K * c_L, C)
    phase = np.where(liquid, SINGLE_LIQUID, np.where(vapor, SINGLE_VAPOR, TWO_PHASE))
    return S, c_L, c_V, phase


def flash(C, fluid: TernaryFluid) -> FlashResult:
    """Flash one overall composition ``(C1, C2, C3)`` (or ``(C1, C2)``)."""
    C = np.asarray(C, dtype=float).ravel()
    if C.size == 2:
        C = np.array([C[0], C[1], 1.0 - C[0] - C[1]])
    if C.size != 3:
        raise ValueError("flash expects three overall fractions")
    if abs(C.sum() - 1.0) > 1e-10:
        raise ValueError(f"overall fractions must sum to 1, got {C.sum()!r}")
    if np.any(C < -1e-12):
        raise ValueError("overall fractions must be nonnegative")
    S, c_L, c_V, phase = flash_arrays(C[0], C[1], fluid)
    return FlashResult(float(S), c_V.ravel(), c_L.ravel(), PHASE_NAMES[int(phase)])


def _scaled_saturation(S, fluid: TernaryFluid):
    L = 1.0 - fluid.S_gc - fluid.S_or
    return np.clip((np.asarray(S, dtype=float) - fluid.S_gc) / L, 0.0, 1.0), L


def relative_permeabilities(S, fluid: TernaryFluid):
    """Quadratic Corey curves, flat outside ``[S_gc, 1 - S_or]``."""
    x, _ = _scaled_saturation(S, fluid)
    krv = x * x
    krl = (1.0 - x) ** 2
    if np.ndim(S) == 0:
        return float(krv), float(krl)
    return krv, krl


def fractional_flow(S, fluid: TernaryFluid):
    """Vapour fractional flow ``k_rV / (k_rV + M k_rL)``."""
    krv, krl = relative_permeabilities(S, fluid)
    return krv / (krv + fluid.M * krl)


def fractional_flow_derivative(S, fluid: TernaryFluid):
    """Analytic ``df/dS``; zero outside the mobile range."""
    x, L = _scaled_saturation(S, fluid)
    den = x * x + fluid.M * (1.0 - x) ** 2
    d = 2.0 * fluid.M * x * (1.0 - x) / (den * den) / L
    S_arr = np.asarray(S, dtype=float)
    d = np.where((S_arr > fluid.S_gc) & (S_arr < 1.0 - fluid.S_or), d, 0.0)
    return float(d) if np.ndim(S) == 0 else d


def total_mobility(S, fluid: TernaryFluid, perm=1.0):
    """``k (k_rV / M + k_rL)`` with liquid viscosity scaled to one."""
    krv, krl = relative_permeabilities(S, fluid)
    return np.asarray(perm) * (np.asarray(krv) / fluid.M + np.asarray(krl))


def _eigen_from_flash(S, c_L, F1, C1, phase, fluid: TernaryFluid):
    two = phase == TWO_PHASE
    lam_t = np.where(two, fractional_flow_derivative(S, fluid), 1.0)
    q = c_L[0] ** 2 / fluid.gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_nt = np.where(two, (F1 + q) / (C1 + q), 1.0)
    return lam_t, lam_nt


def ternary_eigenvalues(C1, C2, fluid: TernaryFluid):
    """Tie-line and non-tie-line eigenvalues ``(λ_t, λ_nt)``."""
    S, c_L, c_V, phase = flash_arrays(C1, C2, fluid)
    f = fractional_flow(S, fluid)
    F1 = c_V[0] * f + c_L[0] * (1.0 - f)
    lam_t, lam_nt = _eigen_from_flash(S, c_L, F1, np.asarray(C1, dtype=float), phase, fluid)
    if np.ndim(C1) == 0:
        return float(lam_t), float(lam_nt)
    return lam_t, lam_nt


def ternary_flux(C1, C2, fluid: TernaryFluid):
    """Overall component flows ``F_i = c_iV f + c_iL (1 - f)`` for i = 1, 2."""
    S, c_L, c_V, phase = flash_arrays(C1, C2, fluid)
    f = fractional_flow(S, fluid)
    return c_V[:2] * f + c_L[:2] * (1.0 - f)


def max_tie_line_speed(fluid: TernaryFluid) -> tuple[float, float]:
    """Location and value of the maximum of ``df/dS``."""
    a, b = fluid.S_gc, 1.0 - fluid.S_or
    res = minimize_scalar(lambda s: -fractional_flow_derivative(s, fluid),
                          bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    # guard against a poor local answer with a dense sample
    grid = np.linspace(a, b, 4001)
    dg = fractional_flow_derivative(grid, fluid)
    k = int(np.argmax(dg))
    if dg[k] > -res.fun:
        return float(grid[k]), float(dg[k])
    return float(res.x), float(-res.fun)


class TernaryProblem(ConservationProblem):
    """Two independent overall fractions ``(C1, C2)``; ``C3`` is implied.

    In 2D the same flux is used in both directions; the face velocities
    scale it inside the scheme.
    """

    n_components = 2

    def __init__(self, fluid: TernaryFluid, ndim: int = 1, name: str = "ternary",
                 segment_bounds: bool = False):
        self.fluid = fluid
        self.ndim = ndim
        self.name = name
        self.segment_bounds = segment_bounds
        self.s_peak, self.dfds_peak = max_tie_line_speed(fluid)
        bound = max(1.0, self.dfds_peak, self._max_nontie_speed())
        self.speed_bound = (bound,) * ndim

    def _max_nontie_speed(self, n: int = 400) -> float:
        c1, c2 = np.meshgrid(np.linspace(0, 1, n + 1), np.linspace(0, 1, n + 1))
        keep = c1 + c2 <= 1.0
        _, lam_nt = ternary_eigenvalues(c1[keep], c2[keep], self.fluid)
        return float(np.max(lam_nt))

    def _evaluate(self, C):
        C1, C2 = C[0], C[1]
        S, c_L, c_V, phase = flash_arrays(C1, C2, self.fluid)
        f = fractional_flow(S, self.fluid)
        F = c_V[:2] * f + c_L[:2] * (1.0 - f)
        lam_t, lam_nt = _eigen_from_flash(S, c_L, F[0], C1, phase, self.fluid)
        lo = np.minimum(lam_t, lam_nt)
        hi = np.maximum(lam_t, lam_nt)
        return CellEval((F,) * self.ndim, (lo,) * self.ndim, (hi,) * self.ndim, aux=S)

    def interface_bounds(self, ev: CellEval, direction: int, axis: int):
        lo, hi = super().interface_bounds(ev, direction, axis)
        if not self.segment_bounds:
            return lo, hi
        # λ_t depends on S alone and df/dS is unimodal, so its maximum over
        # the saturation range spanned by the two cells is known in closed form.
        S = ev.aux
        n = S.shape[axis]
        SL = np.take(S, np.arange(n - 1), axis=axis)
        SR = np.take(S, np.arange(1, n), axis=axis)
        s_min, s_max = np.minimum(SL, SR), np.maximum(SL, SR)
        fl = self.fluid
        peak = (s_min <= self.s_peak) & (self.s_peak <= s_max)
        seg = np.where(peak, self.dfds_peak,
                       np.maximum(fractional_flow_derivative(s_min, fl),
                                  fractional_flow_derivative(s_max, fl)))
        return lo, np.maximum(hi, seg)


def ternary_problem(fluid: Optional[TernaryFluid] = None, ndim: int = 1, **kw) -> TernaryProblem:
    return TernaryProblem(fluid if fluid is not None else TernaryFluid(), ndim=ndim, **kw)


FLUID_PRESETS = {
    "ternary_default": TernaryFluid(S_or=0.1, S_gc=0.2, M=1.0 / 20.0),
    "ternary_high_contrast": TernaryFluid(S_or=0.1, S_gc=0.3, M=1.0 / 20.0),
    "ternary_2d": TernaryFluid(S_or=0.1, S_gc=0.05, M=0.5),
}

INJECTION_GAS = (0.9, 0.1)
INITIAL_OIL = (0.0, 0.25)


# ---------------------------------------------------------------------------
# Engquist-Runborg geometric-optics system


@dataclass(frozen=True)
class PointSource:
    position: tuple = (-0.2, 1.0)
    activation_time: float = 0.0


G_FLOOR = 1e-14


class EngquistRunborgProblem(ConservationProblem):
    """``F = C1 C / |C|``, ``G = C2 C / |C|``; weakly hyperbolic everywhere."""

    name = "er"
    n_components = 2
    ndim = 2
    speed_bound = (1.0, 1.0)

    def __init__(self, source: Optional[PointSource] = None):
        self.source = source if source is not None else PointSource()

    def _evaluate(self, C):
        C1, C2 = C[0], C[1]
        g = np.hypot(C1, C2)
        live = g > G_FLOOR
        inv = np.where(live, 1.0 / np.where(live, g, 1.0), 0.0)
        cos_t = C1 * inv
        sin_t = C2 * inv
        F = np.stack([C1 * cos_t, C2 * cos_t])
        G = np.stack([C1 * sin_t, C2 * sin_t])
        return CellEval((F, G), (cos_t, sin_t), (cos_t.copy(), sin_t.copy()))

    @property
    def has_exact(self) -> bool:
        return True

    def exact(self, x, y, t: float):
        return er_exact(x, y, t, self.source)


def er_problem(source: Optional[PointSource] = None) -> EngquistRunborgProblem:
    return EngquistRunborgProblem(source)


def er_exact(x, y, t: float, source: Optional[PointSource] = None, r_floor: float = 1e-14):
    """Exact ray solution ``g = max(0, t - r)^3 / r`` along rays from the source."""
    src = source if source is not None else PointSource()
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - src.position[0]
    dy = y - src.position[1]
    r = np.hypot(dx, dy)
    tau = t - src.activation_time
    safe_r = np.where(r > r_floor, r, 1.0)
    g = np.where(r > r_floor, np.maximum(0.0, tau - r) ** 3 / safe_r, 0.0)
    return np.stack([g * dx / safe_r, g * dy / safe_r])
