import numpy as np
import pytest

from relaxflow.core import Boundary, BoundarySpec, Grid1D, Grid2D, StateField1D
from relaxflow.pressure import (PermeabilityField, PressureSolveError, WellBoundary,
                                assemble_and_solve, boundary_flux_balance, cell_divergence,
                                face_velocities, generate_perm_field, harmonic_mean,
                                injection_state, mobility_field, run_sequential,
                                sequential_step)
from relaxflow.problems import FLUID_PRESETS, INITIAL_OIL, INJECTION_GAS, ternary_problem
from relaxflow.schemes1d import SchemeConfig, advance_1d
from relaxflow.schemes2d import Scheme2DConfig

FLUID_2D = FLUID_PRESETS["ternary_2d"]
WELLS = WellBoundary()


def mms_error(n):
    g = Grid2D(n, n, 0.0, 1.0, 0.0, 1.0)
    X, Y = np.meshgrid(g.x_centers, g.y_centers)

    def exact(x, y):
        return np.cos(np.pi * x) * np.cos(np.pi * y)

    sys = assemble_and_solve(g, PermeabilityField.uniform(n, n), 1.0, dirichlet=exact,
                             source=2 * np.pi ** 2 * exact(X, Y))
    return np.sqrt(np.mean((sys.pressure - exact(X, Y)) ** 2))


# ---------------------------------------------------------------- pressure solve

def test_total_mobility_field():
    C = np.zeros((2, 2, 3))
    assert np.allclose(mobility_field(C, FLUID_2D), 1.0)
    C[0], C[1] = INJECTION_GAS
    # single vapour, k_rV = 1 over viscosity ratio 1/2
    assert np.allclose(mobility_field(C, FLUID_2D), 2.0)


def test_homogeneous_uniform_flow():
    g = Grid2D(10, 8, 0.0, 1.0, 0.0, 2.0)
    sys = assemble_and_solve(g, PermeabilityField.uniform(10, 8), 1.0, WELLS)
    u_x, u_y = face_velocities(sys)
    assert np.allclose(u_x, 0.5, atol=1e-12)
    assert np.max(np.abs(u_y)) <= 1e-12
    # linear in x, constant in y, zero half a cell beyond the last centre
    P = sys.pressure
    assert np.allclose(np.diff(P, axis=1), -0.5 * g.dx, atol=1e-12)
    assert np.allclose(P[:, -1], 0.5 * 0.5 * g.dx, atol=1e-12)
    assert np.allclose(P, P[0], atol=1e-12)


def test_harmonic_face_transmissibility():
    assert harmonic_mean(1.0, 3.0) == pytest.approx(1.5)
    g = Grid2D(4, 2, 0.0, 1.0, 0.0, 1.0)
    k = np.where((np.indices((2, 4)).sum(axis=0) % 2) == 0, 1.0, 9.0)
    sys = assemble_and_solve(g, PermeabilityField.isotropic(k), 1.0, WELLS)
    assert np.allclose(sys.tx[:, 1:-1], 2 * 1 * 9 / 10)
    assert np.allclose(sys.ty[1:-1], 2 * 1 * 9 / 10)


def test_manufactured_solution_second_order():
    errs = [mms_error(n) for n in (10, 20, 40, 80)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 1.9)


@pytest.mark.parametrize("solver", ["direct", "cg"])
def test_divergence_and_balance_heterogeneous(solver):
    g = Grid2D(40, 40, 0.0, 1.0, 0.0, 1.0)
    perm = generate_perm_field(40, 40, seed=3, log_std=1.5)
    mob = np.random.default_rng(0).uniform(0.5, 2.0, (40, 40))
    sys = assemble_and_solve(g, perm, mob, WELLS, solver=solver)
    assert sys.residual <= 1e-10
    assert np.max(np.abs(cell_divergence(g, *sys.velocities))) <= 1e-8
    assert abs(boundary_flux_balance(g, *sys.velocities)) <= 1e-8
    assert np.all(sys.velocities[1][[0, -1]] == 0.0)


def test_uniform_pressure_gives_zero_velocity():
    g = Grid2D(6, 5, 0.0, 1.0, 0.0, 1.0)
    sys = assemble_and_solve(g, PermeabilityField.uniform(6, 5), 1.0,
                             WellBoundary(rate=0.0, right_pressure=3.0))
    assert np.allclose(sys.pressure, 3.0)
    assert np.max(np.abs(sys.u_x)) <= 1e-12 and np.max(np.abs(sys.u_y)) <= 1e-12


def test_scaling_invariance():
    g = Grid2D(12, 10, 0.0, 1.0, 0.0, 1.0)
    perm = generate_perm_field(12, 10, seed=5)
    a = assemble_and_solve(g, perm, 1.0, WellBoundary(rate=1.0))
    b = assemble_and_solve(g, PermeabilityField.isotropic(7.0 * perm.kx), 1.0,
                           WellBoundary(rate=7.0))
    assert np.allclose(a.pressure, b.pressure, rtol=1e-10, atol=1e-12)


def test_singular_configuration_rejected():
    g = Grid2D(4, 4, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(PressureSolveError):
        assemble_and_solve(g, PermeabilityField.uniform(4, 4), 1.0,
                           WellBoundary(right_pressure=None))


def test_shape_and_input_validation():
    g = Grid2D(4, 4, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        assemble_and_solve(g, PermeabilityField.uniform(5, 4))
    with pytest.raises(ValueError):
        PermeabilityField.uniform(4, 4, 0.0)
    with pytest.raises(ValueError):
        WellBoundary(composition=(0.5, 0.4, 0.0))
    with pytest.raises(ValueError):
        assemble_and_solve(g, PermeabilityField.uniform(4, 4), solver="gmres")


def test_permeability_csv_roundtrip(tmp_path):
    k = generate_perm_field(5, 3, seed=1)
    path = tmp_path / "k.csv"
    np.savetxt(path, k.kx, delimiter=",", fmt="%.17g")
    assert np.array_equal(PermeabilityField.from_csv(path).kx, k.kx)


# ---------------------------------------------------------------- generator

def test_generator_zero_log_std_is_uniform():
    assert np.all(generate_perm_field(8, 6, seed=1, log_std=0.0).kx == 1.0)


def test_generator_deterministic_and_seed_sensitive():
    a = generate_perm_field(20, 20, seed=9)
    b = generate_perm_field(20, 20, seed=9)
    c = generate_perm_field(20, 20, seed=10)
    assert np.array_equal(a.kx, b.kx)
    assert not np.array_equal(a.kx, c.kx)


def test_generator_geometric_mean_and_spread():
    k = generate_perm_field(40, 40, seed=2, log_std=1.5)
    assert abs(np.exp(np.log(k.kx).mean()) - 1.0) <= 1e-10
    assert np.log(k.kx).std() == pytest.approx(1.5, rel=1e-10)


@pytest.mark.parametrize("kw", [dict(log_std=-1.0), dict(correlation_length=0.0), dict(nx=0)])
def test_generator_rejects_bad_parameters(kw):
    args = dict(nx=4, ny=4, seed=0) | kw
    with pytest.raises(ValueError):
        generate_perm_field(**args)


# ---------------------------------------------------------------- sequential coupling

def test_zero_rate_leaves_state_unchanged():
    g = Grid2D(8, 8, 0.0, 1.0, 0.0, 1.0)
    wells = WellBoundary(rate=0.0)
    s = injection_state(g, wells, INITIAL_OIL)
    perm = generate_perm_field(8, 8, seed=1)
    out, hist = run_sequential(s, FLUID_2D, perm, wells, Scheme2DConfig.same("VRS"), 0.1)
    assert np.array_equal(out.interior, s.interior)
    assert len(hist) == 1


@pytest.mark.parametrize("scheme, safety", [("VRS", np.sqrt(2)), ("VRO", 2.0), ("JX", 1.0)])
def test_y_uniform_displacement_matches_1d(scheme, safety):
    nx, ny = 30, 4
    g2 = Grid2D(nx, ny, 0.0, 1.0, 0.0, 1.0)
    s2 = injection_state(g2, WELLS, INITIAL_OIL)
    perm = PermeabilityField.uniform(nx, ny)
    g1 = Grid1D(nx, 0.0, 1.0)
    bc1 = BoundarySpec(Boundary("dirichlet", values=INJECTION_GAS), Boundary("extrapolate"))
    s1 = StateField1D.from_interior(g1, np.tile(np.array(INITIAL_OIL)[:, None], nx), bc1)
    p1, p2 = ternary_problem(FLUID_2D), ternary_problem(FLUID_2D, ndim=2)
    c1 = SchemeConfig(scheme, 2, 0.5, speed_safety=safety)
    c2 = Scheme2DConfig.same(scheme, 2)
    t = 0.0
    for _ in range(20):
        s1, i1 = advance_1d(s1, p1, c1, t)
        s2, _ = sequential_step(s2, FLUID_2D, perm, WELLS, c2, t, i1.dt, problem=p2)
        t += i1.dt
    for row in range(ny):
        assert np.max(np.abs(s2.interior[:, row, :] - s1.interior)) <= 1e-10


def test_gas_injection_stays_in_bounds_and_conserves():
    g = Grid2D(40, 40, 0.0, 1.0, 0.0, 1.0)
    s = injection_state(g, WELLS, INITIAL_OIL)
    perm = generate_perm_field(40, 40, seed=7, log_std=1.5)
    out, hist = run_sequential(s, FLUID_2D, perm, WELLS, Scheme2DConfig.same("VRS"), 0.2)
    u = out.interior
    assert np.all(u >= -1e-12) and np.all(u <= 1 + 1e-12)
    assert np.all(u.sum(axis=0) <= 1 + 1e-12)
    for h in hist:
        assert np.all(np.abs(h.mass_defect) <= 1e-10 * np.abs(h.mass_after))
    assert u[0, :, 0].max() > 0.5
