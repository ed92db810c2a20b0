from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relaxflow.cli.properties import flash_oracle
from relaxflow.problems import (FLUID_PRESETS, TernaryFluid, burgers_exact, burgers_problem,
                                er_exact, er_problem, flash, flash_arrays, fractional_flow,
                                fractional_flow_derivative, rachford_rice,
                                relative_permeabilities, ternary_eigenvalues, ternary_flux,
                                ternary_problem, total_mobility)

FLUID = TernaryFluid()


# ---------------------------------------------------------------- Burgers

def test_burgers_flux_and_initial():
    p = burgers_problem()
    assert p.flux(np.array([[2.0]]))[0, 0] == 2.0
    x = np.linspace(-3, 3, 7)
    assert np.allclose(burgers_exact(x, 0.0), 0.5 + np.sin(x))


@pytest.mark.parametrize("t", [0.1, 0.5, 0.9, 0.999])
def test_burgers_exact_fixed_point(t):
    x = np.linspace(-np.pi, np.pi, 401)
    c = burgers_exact(x, t)
    assert np.max(np.abs(c - 0.5 - np.sin(x - c * t))) <= 1e-12


def test_burgers_exact_rejects_after_shock():
    with pytest.raises(ValueError):
        burgers_exact(np.zeros(3), 1.0)


# ---------------------------------------------------------------- flash

def test_flash_injection_gas_is_vapor():
    r = flash((0.9, 0.1, 0.0), FLUID)
    assert r.phase_state == "single_vapor"
    assert r.S == 1.0
    assert np.allclose(r.c_V, [0.9, 0.1, 0.0])


def test_flash_initial_oil_is_liquid():
    r = flash((0.0, 0.25, 0.75), FLUID)
    assert r.phase_state == "single_liquid"
    assert r.S == 0.0
    assert np.allclose(r.c_L, [0.0, 0.25, 0.75])


def test_rachford_rice_two_component_root():
    # third component absent, so its K-value is irrelevant
    h, _ = rachford_rice(0.5, np.array([0.5, 0.5, 0.0]), (2.0, 0.5, 0.25))
    assert abs(h) < 1e-15
    S = flash_oracle(np.array([0.5]), np.array([0.5]), SimpleNamespace(K=(2.0, 0.5, 0.25)))
    assert S[0] == pytest.approx(0.5, abs=1e-12)


def test_flash_two_phase_invariants():
    r = flash((0.4, 0.3, 0.3), FLUID)
    assert r.phase_state == "two_phase"
    assert 0.0 < r.S < 1.0
    assert r.c_V.sum() == pytest.approx(1.0, abs=1e-12)
    assert r.c_L.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(r.c_V, np.array(FLUID.K) * r.c_L)


def test_flash_rejects_bad_sum():
    with pytest.raises(ValueError):
        flash((0.5, 0.5, 0.5), FLUID)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_flash_reconstructs_and_matches_oracle(a, b):
    C1, C2 = a, (1.0 - a) * b
    S, c_L, c_V, phase = flash_arrays(np.array([C1]), np.array([C2]), FLUID)
    C = np.array([C1, C2, 1.0 - C1 - C2])
    assert 0.0 <= S[0] <= 1.0
    assert np.max(np.abs(S * c_V[:, 0] + (1 - S) * c_L[:, 0] - C)) <= 1e-10
    assert abs(S[0] - flash_oracle(np.array([C1]), np.array([C2]), FLUID)[0]) <= 1e-9


def test_flash_continuous_at_vapor_boundary():
    # walk from two-phase into single vapor along C2 = 0.1
    c1 = np.linspace(0.5, 0.9, 4001)
    S = flash_arrays(c1, np.full_like(c1, 0.1), FLUID)[0]
    assert np.max(np.abs(np.diff(S))) < 1e-2
    assert S[-1] == 1.0


# ---------------------------------------------------------------- flow functions

def test_relative_permeabilities_branches():
    assert relative_permeabilities(FLUID.S_gc, FLUID) == pytest.approx((0.0, 1.0))
    assert relative_permeabilities(1 - FLUID.S_or, FLUID) == pytest.approx((1.0, 0.0))
    assert relative_permeabilities(0.6, FLUID) == pytest.approx((0.16 / 0.49, 0.09 / 0.49))


def test_fractional_flow_values():
    assert fractional_flow(0.1, FLUID) == 0.0
    assert fractional_flow(0.95, FLUID) == 1.0
    assert fractional_flow(0.6, FLUID) == pytest.approx(0.16 / (0.16 + 0.05 * 0.09))
    assert fractional_flow(0.6, FLUID) == pytest.approx(0.97264, abs=1e-5)


def test_fractional_flow_monotone_and_derivative():
    S = np.linspace(0, 1, 2001)
    f = fractional_flow(S, FLUID)
    assert np.all(np.diff(f) >= 0)
    assert np.all(fractional_flow_derivative(S, FLUID) >= 0)
    s = np.linspace(0.21, 0.89, 50)
    h = 1e-6
    fd = (fractional_flow(s + h, FLUID) - fractional_flow(s - h, FLUID)) / (2 * h)
    assert np.allclose(fractional_flow_derivative(s, FLUID), fd, rtol=1e-6)


def test_total_mobility_examples():
    assert total_mobility(0.0, FLUID) == pytest.approx(1.0)
    assert total_mobility(1.0, TernaryFluid(M=0.5)) == pytest.approx(2.0)
    assert total_mobility(0.5, FLUID) > 0.0


def test_gamma():
    assert FLUID.gamma == pytest.approx(0.475 / 2.45)
    assert FLUID.gamma == pytest.approx(0.193878, abs=1e-6)


@pytest.mark.parametrize("kw", [dict(K=(1.5, 2.5, 0.05)), dict(S_or=0.6, S_gc=0.5), dict(M=0.0)])
def test_fluid_validation(kw):
    with pytest.raises(ValueError):
        TernaryFluid(**kw)


# ---------------------------------------------------------------- ternary problem

def test_ternary_single_phase_flux_and_speed():
    for C in [(0.0, 0.25), (0.9, 0.1)]:
        F = ternary_flux(np.array(C[0]), np.array(C[1]), FLUID)
        assert np.allclose(F, C)
        lam_t, _ = ternary_eigenvalues(C[0], C[1], FLUID)
        assert lam_t == 1.0


def test_ternary_two_phase_flux():
    C1, C2 = np.array([0.4]), np.array([0.3])
    S, c_L, c_V, _ = flash_arrays(C1, C2, FLUID)
    f = fractional_flow(S, FLUID)
    F = ternary_flux(C1, C2, FLUID)
    assert np.allclose(F, c_V[:2] * f + c_L[:2] * (1 - f))
    assert np.all(np.abs(F) <= 1.0)


def test_ternary_speed_bounds():
    p = ternary_problem(FLUID)
    assert p.speed_bound[0] == pytest.approx(5.4, abs=0.05)
    hc = ternary_problem(FLUID_PRESETS["ternary_high_contrast"])
    assert hc.speed_bound[0] > p.speed_bound[0]


def test_weak_hyperbolicity_witness():
    # along a tie-line the two eigenvalues cross
    C2 = np.full(20001, 0.2)
    C1 = np.linspace(0.0, 0.8, 20001)
    lam_t, lam_nt = ternary_eigenvalues(C1, C2, FLUID)
    d = lam_t - lam_nt
    two = np.isfinite(d) & (flash_arrays(C1, C2, FLUID)[3] == 2)
    sign_change = np.where(np.diff(np.sign(d[two])) != 0)[0]
    assert sign_change.size > 0
    i = sign_change[0]
    # bisect along the segment to resolve the crossing
    lo, hi = C1[two][i], C1[two][i + 1]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        t, n = ternary_eigenvalues(mid, 0.2, FLUID)
        tl, nl = ternary_eigenvalues(lo, 0.2, FLUID)
        if np.sign(t - n) == np.sign(tl - nl):
            lo = mid
        else:
            hi = mid
    t, n = ternary_eigenvalues(0.5 * (lo + hi), 0.2, FLUID)
    assert abs(t - n) < 1e-6


# ---------------------------------------------------------------- Engquist-Runborg

def test_er_flux_examples():
    p = er_problem()
    ev = p.evaluate(np.array([[0.0, 3.0, 2.0], [0.0, 4.0, 0.0]]))
    F, G = ev.fluxes
    assert np.allclose(F[:, 0], 0) and np.allclose(G[:, 0], 0)
    assert np.allclose(F[:, 1], [1.8, 2.4]) and np.allclose(G[:, 1], [2.4, 3.2])
    assert np.allclose(F[:, 2], [2.0, 0.0]) and np.allclose(G[:, 2], [0.0, 0.0])


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 100))
def test_er_flux_homogeneous(c1, c2, alpha):
    p = er_problem()
    C = np.array([[c1], [c2]])
    for d in (0, 1):
        assert np.allclose(p.flux(alpha * C, d), alpha * p.flux(C, d), atol=1e-12)


def test_er_exact_examples():
    assert np.allclose(er_exact(0.9, 1.0, 0.85), 0.0)
    g = 0.45 ** 3 / 0.4
    assert np.allclose(er_exact(0.2, 1.0, 0.85), [g, 0.0])
    assert np.allclose(er_exact(-0.2, 1.4, 0.85), [0.0, g])
    assert g == pytest.approx(0.2278, abs=1e-4)


def test_er_eigenvalues_bounded():
    p = er_problem()
    rng = np.random.default_rng(1)
    C = rng.normal(size=(2, 100))
    for d in (0, 1):
        assert np.all(p.spectral_radius(C, d) <= 1.0 + 1e-15)
