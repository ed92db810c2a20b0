"""Executable forms of the stability theorems.

``harten_coefficients`` writes one forward-Euler stage of the second-order
variable scheme for a scalar law in incremental form

    C_j^{n+1} = C_j - κ1_{j-1/2} ΔC_{j-1/2} + κ2_{j+1/2} ΔC_{j+1/2}

and returns the two coefficient sequences. Nonnegativity and
``κ1 + κ2 <= 1`` at every interface give the TVD property.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import StateField1D, van_leer
from ..schemes1d import InterfaceSpeeds


@dataclass
class HartenCoefficients:
    kappa1: np.ndarray
    kappa2: np.ndarray

    def violations(self, tol: float = 1e-12) -> dict:
        return {
            "kappa1_negative": int(np.sum(self.kappa1 < -tol)),
            "kappa2_negative": int(np.sum(self.kappa2 < -tol)),
            "sum_above_one": int(np.sum(self.kappa1 + self.kappa2 > 1.0 + tol)),
        }

    def ok(self, tol: float = 1e-12) -> bool:
        return not any(self.violations(tol).values())


def _phi_over_theta(theta):
    # φ(θ)/θ = φ(1/θ) by limiter symmetry; defined as 0 at θ = 0
    th = np.asarray(theta, dtype=float)
    nz = th != 0.0
    return np.where(nz, van_leer(1.0 / np.where(nz, th, 1.0)), 0.0)


def _ratio(num, den):
    ok = den != 0.0
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


def harten_coefficients(state: StateField1D, speeds: InterfaceSpeeds, problem,
                        dt: float, dx: float) -> HartenCoefficients:
    """Incremental-form coefficients on the interior interfaces.

    ``speeds`` use padded interface indexing. Entries ``k`` of the result
    belong to the interface left of interior cell ``k`` (the last entry is
    the right boundary interface).
    """
    if state.n_components != 1:
        raise ValueError("Harten coefficients are defined for scalar problems")
    C = state.values[0]
    F = problem.evaluate(state.values).fluxes[0][0]
    am = speeds.a_minus[0]
    ap = speeds.a_plus[0]
    lam = dt / dx
    dC = np.diff(C)
    dF = np.diff(F)
    gap = ap - am
    wp = (-am * dC + dF) / gap
    wm = (ap * dC - dF) / gap

    n_if = dC.size
    theta_p = np.zeros(n_if)
    theta_m = np.zeros(n_if)
    theta_p[1:] = _ratio((1.0 + ap[1:] * ap[:-1]) * wp[:-1], (1.0 + ap[1:] ** 2) * wp[1:])
    theta_m[:-1] = _ratio((1.0 + am[1:] * am[:-1]) * wm[1:], (1.0 + am[:-1] ** 2) * wm[:-1])

    s = _ratio(dF, dC)
    live = dC != 0.0
    i = np.arange(1, n_if - 1)
    k1 = lam * (s[i] - am[i]) / gap[i] * (
        ap[i] * (1.0 - 0.5 * van_leer(theta_p[i]))
        + ap[i + 1] * (1.0 + ap[i + 1] * ap[i]) / (1.0 + ap[i + 1] ** 2)
        * 0.5 * _phi_over_theta(theta_p[i + 1]))
    k2 = lam * (ap[i] - s[i]) / gap[i] * (
        -am[i] * (1.0 - 0.5 * van_leer(theta_m[i]))
        - am[i - 1] * (1.0 + am[i] * am[i - 1]) / (1.0 + am[i - 1] ** 2)
        * 0.5 * _phi_over_theta(theta_m[i - 1]))
    k1 = np.where(live[i], k1, 0.0)
    k2 = np.where(live[i], k2, 0.0)
    # padded interfaces 1 .. n_if-2 are exactly the interior ones for g = 2
    g, n = state.grid.ghost_width, state.grid.n_cells
    sel = slice(g - 2, g - 2 + n + 1)
    return HartenCoefficients(k1[sel], k2[sel])
