import numpy as np
import pytest
from conftest import inert_absorption, make_absorption
from scipy.integrate import quad, solve_ivp

from villus_homog.errors import InvalidGridError, InvalidParameterError, StepSizeError, UnsupportedGeometryError
from villus_homog.families import FunctionSpec as F
from villus_homog.families import build
from villus_homog.geometry import cosine_profile, cosine_theta_profile, flat_profile
from villus_homog.macro import InflowSignals, zero_inflow
from villus_homog.micro import (MicroFields, MicroGrid, MicroScenario, compare_micro_macro,
                                cross_section_average, cross_section_average_fn, macro_reference, solve_micro,
                                stable_dt)
from villus_homog.models import stream_velocity

V0 = build("inflow", F("ramp", {"amp": 1.0, "rise": 0.5}))


def v_only():
    return InflowSignals(lambda t: 0.0, V0)


def test_zero_inflow_is_fixed_point(villous):
    prof, vel, ab = villous
    r = solve_micro(MicroGrid(0.25, 1.0, prof), vel, ab, zero_inflow(), 0.5, 2)
    assert np.all(r.u == 0) and np.all(r.v == 0)


def test_grid_errors():
    prof = cosine_profile(1.0, 0.1)
    with pytest.raises(InvalidGridError):
        MicroGrid(0.3, 1.0, prof)
    with pytest.raises(InvalidGridError):
        MicroGrid(0.25, 1.0, prof, n_z_per_period=8)
    with pytest.raises(InvalidGridError):
        MicroGrid(0.25, 1.0, prof, n_rho=1)
    with pytest.raises(UnsupportedGeometryError):
        MicroGrid(0.25, 1.0, cosine_theta_profile(1.0, 0.1, 0.05, 3))


def test_oversized_step_rejected(villous):
    prof, vel, ab = villous
    bound = stable_dt(MicroGrid(0.25, 1.0, prof), vel, ab, 1.0)
    with pytest.raises(StepSizeError):
        solve_micro(MicroGrid(0.25, 1.0, prof, dt=2 * bound), vel, ab, v_only(), 1.0)


def test_velocity_without_stream_function_rejected(villous):
    prof, vel, ab = villous
    from villus_homog.models import VelocityField
    bare = VelocityField(vel.c_fn, vel.cbar_fn, None, "bare")
    with pytest.raises(InvalidParameterError):
        solve_micro(MicroGrid(0.25, 1.0, prof), bare, ab, v_only(), 1.0)


def test_average_of_constant_and_axial_fields():
    g = MicroGrid(0.125, 1.0, cosine_profile(1.0, 0.1), 16, 8)
    shape = (g.n_x, g.n_rho)
    _, ub, vb = cross_section_average(MicroFields(np.full(shape, 2.5), np.full(shape, -0.75), 0.0), g)
    assert np.max(np.abs(ub - 2.5)) <= 1e-12
    assert np.max(np.abs(vb + 0.75)) <= 1e-12
    f = np.sin(3 * g.x_centers)
    _, ub, _ = cross_section_average(MicroFields(f[:, None] * np.ones(shape), np.zeros(shape), 0.0), g)
    assert np.max(np.abs(ub - f)) <= 1e-12


def test_average_of_function_against_quadrature():
    g = MicroGrid(0.25, 1.0, cosine_profile(1.0, 0.2), 16, 8)
    f = lambda x1, rho: np.exp(x1 + 12.0 * rho) * np.cos(5 * rho)
    x = np.array([0.1, 0.37, 0.8])
    got = cross_section_average_fn(f, x, g)
    for xi, gi in zip(x, got):
        Rw = float(g.wall_radius(xi))
        num = quad(lambda r: f(xi, r) * r, 0, Rw, epsabs=1e-14, epsrel=1e-14)[0]
        assert gi == pytest.approx(num / (0.5 * Rw ** 2), rel=1e-8)


def test_maximum_principle_and_positivity(villous):
    prof, vel, ab = villous
    inflow = InflowSignals(build("inflow", F("ramp", {"amp": 0.5, "rise": 0.5})),
                           build("inflow", F("sin_pos", {"amp": 1.3, "freq": 2.0})))
    r = solve_micro(MicroGrid(0.125, 1.0, prof), vel, ab, inflow, 1.0, 4)
    assert np.max(r.v_max_history) <= 1.3 + 1e-10
    assert np.min(r.v_min_history) >= -1e-10
    assert np.min(r.u_min_history) >= -1e-12


def advection_diffusion_oracle(D, T=1.0, n=2000):
    # v_t + v_x = D v_xx, Dirichlet V0 at x = 0 (ghost cell), zero gradient at x = 1
    h = 1.0 / n
    x = (np.arange(n) + 0.5) * h

    def rhs(t, v):
        ext = np.concatenate(([2 * V0(t) - v[0]], v, [v[-1]]))
        return -(ext[1:-1] - ext[:-2]) / h + D * (ext[2:] - 2 * ext[1:-1] + ext[:-2]) / h ** 2

    sol = solve_ivp(rhs, (0.0, T), np.zeros(n), method="LSODA", rtol=1e-9, atol=1e-12, t_eval=[T],
                    lband=1, uband=1)
    return x, sol.y[:, -1]


def test_reaction_free_cylinder_is_one_dimensional_advection_diffusion():
    cyl = flat_profile(1.0)
    eps = 0.25
    x, ref = advection_diffusion_oracle(eps)
    errs = []
    for nz in (16, 32):
        g = MicroGrid(eps, 1.0, cyl, nz, 4)
        r = solve_micro(g, stream_velocity(cyl, 1.0, "plug"), inert_absorption(), v_only(), 1.0, 1)
        assert np.max(np.abs(r.v[-1] - r.v[-1][:, :1])) <= 1e-12       # radially uniform
        errs.append(float(np.max(np.abs(r.averages()[1][-1] - np.interp(g.x_centers, x, ref)))))
    assert errs[0] < 1e-2
    assert errs[1] < 0.6 * errs[0]


def test_reaction_free_cylinder_approaches_advection():
    cyl = flat_profile(1.0)
    sc = MicroScenario(cyl, stream_velocity(cyl, 1.0, "plug"), inert_absorption(), v_only(), n_rho=4,
                       n_snapshots=10, check_assumptions=False)
    tab = compare_micro_macro([1 / 4, 1 / 8, 1 / 16], sc)
    assert tab.err_v[0] > tab.err_v[1] > tab.err_v[2]
    assert max(tab.err_u) == 0.0


def test_error_plateaus_under_grid_refinement(villous):
    prof, vel, ab = villous
    sc = MicroScenario(prof, vel, ab, v_only())
    mac = macro_reference(sc)
    coarse = compare_micro_macro([0.25] * 3, sc, mac).err_v[0]
    fine = compare_micro_macro([0.25] * 3, MicroScenario(prof, vel, ab, v_only(), n_z_per_period=32,
                                                          n_rho=16), mac).err_v[0]
    assert abs(fine - coarse) <= 0.05 * coarse


def test_compare_needs_three_eps(villous):
    prof, vel, ab = villous
    with pytest.raises(InvalidParameterError):
        compare_micro_macro([0.25, 0.125], MicroScenario(prof, vel, ab, v_only()))


def test_micro_csv(tmp_path, villous):
    prof, vel, ab = villous
    g = MicroGrid(0.5, 1.0, prof, 16, 2)
    r = solve_micro(g, vel, ab, v_only(), 0.2, 1)
    lines = r.to_csv(tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "t,x1,rho_hat,u,v"
    assert len(lines) == 1 + 2 * g.n_x * g.n_rho
