"""Explicit solver for the eps-scale problem in an axisymmetric villous tube.

The lumen is ``{(x1, rho): 0 < x1 < L, rho < eps R(x1/eps)}``.  Unknowns live
on cell centres of the mapped rectangle ``(x1, s)``, ``s = rho / (eps R)``:

    v_t + c . Dv = eps omega Lap v - zeta phi(v)
    u_t + c . Du = eps chi   Lap u + zeta phi(v)

with outward wall fluxes ``eps rho_surf v`` (for v) and ``eps Theta(u, v)``
(for u), Dirichlet inflow at ``x1 = 0``, free outflow at ``x1 = L`` and
empty initial state.  ``c`` is evaluated at ``(x1, x/eps, t)``.

Fluxes use two-point stencils with the diagonal part of the mapping metric,
which keeps the explicit scheme monotone: positivity and the bound
``v <= max inflow`` hold step by step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGridError, InvalidParameterError, StepSizeError, UnsupportedGeometryError
from .io import write_csv

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class MicroGrid:
    eps: float
    L: float
    profile: object
    n_z_per_period: int = 16
    n_rho: int = 8
    dt: float | None = None

    def __post_init__(self):
        if not self.profile.axisymmetric:
            raise UnsupportedGeometryError("micro solves need a theta-independent profile")
        if not self.eps > 0 or not self.L > 0:
            raise InvalidGridError("eps and L must be positive")
        n = self.L / self.eps
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
            raise InvalidGridError(f"L/eps = {n} is not a whole number of periods")
        if self.n_z_per_period < 16:
            raise InvalidGridError("n_z_per_period must be >= 16")
        if self.n_rho < 2:
            raise InvalidGridError("n_rho must be >= 2")
        if self.dt is not None and not self.dt > 0:
            raise InvalidGridError("dt must be positive")

    @property
    def n_periods(self):
        return int(round(self.L / self.eps))

    @property
    def n_x(self):
        return self.n_periods * self.n_z_per_period

    @property
    def hx(self):
        return self.L / self.n_x

    @property
    def hs(self):
        return 1.0 / self.n_rho

    @property
    def x_faces(self):
        return np.arange(self.n_x + 1) * self.hx

    @property
    def x_centers(self):
        return (np.arange(self.n_x) + 0.5) * self.hx

    @property
    def s_faces(self):
        return np.arange(self.n_rho + 1) * self.hs

    @property
    def s_centers(self):
        return (np.arange(self.n_rho) + 0.5) * self.hs

    def wall_radius(self, x):
        return self.eps * np.asarray(self.profile.radius(np.asarray(x) / self.eps), dtype=float)

    def ring_weights(self):
        return np.diff(self.s_faces ** 2)


@dataclass
class MicroFields:
    u_eps: np.ndarray     # (n_x, n_rho)
    v_eps: np.ndarray
    time: float = 0.0


class _Geometry:
    """Frustum measures and two-point transmissibilities of a MicroGrid."""

    def __init__(self, grid):
        self.grid = grid
        G = grid.wall_radius(grid.x_faces)
        G0, G1 = G[:-1], G[1:]
        hx, hs = grid.hx, grid.hs
        sf = grid.s_faces
        self.G = G
        self.slope = (G1 - G0) / hx
        ring = np.diff(sf ** 2)
        int_G2 = hx * (G0 ** 2 + G0 * G1 + G1 ** 2) / 3.0
        self.volume = np.pi * np.outer(int_G2, ring)
        self.wall_area = np.pi * (G0 + G1) * np.sqrt(hx ** 2 + (G1 - G0) ** 2)
        s_in = sf[1:-1]
        self.T_rad = TWO_PI * s_in[None, :] * (1.0 + s_in[None, :] ** 2 * self.slope[:, None] ** 2) * hx / hs
        T_ax = np.pi * np.outer(G ** 2, ring) / hx
        T_ax[0] *= 2.0              # half cell to the Dirichlet face
        T_ax[-1] = 0.0              # free outflow: no diffusive flux
        self.T_ax = T_ax
        # wall sample points in cell coordinates, for the surface coefficients
        zc = grid.x_centers / grid.eps
        th = TWO_PI * np.arange(8) / 8
        Z, TH = np.meshgrid(zc, th, indexing="ij")
        self.wall_X = grid.profile.wall_point(Z, TH)

    def stream_fluxes(self, velocity, t):
        g = self.grid
        Xf, Sf = np.meshgrid(g.x_faces, g.s_faces, indexing="ij")
        psi = np.asarray(velocity.stream_fn(Xf, Xf / g.eps, Sf, t), dtype=float) * np.ones_like(Xf)
        psi = g.eps ** 2 * (psi - psi[:, :1])
        psi[:, -1] = np.mean(psi[:, -1])
        Fz = TWO_PI * (psi[:, 1:] - psi[:, :-1])
        Fs = TWO_PI * (psi[:-1, :] - psi[1:, :])
        return Fz, Fs

    def surface_mean(self, fn):
        """Theta-mean over each wall panel of ``fn(x1, X)`` (x1 = panel centre)."""
        x1 = self.grid.x_centers[:, None]
        return (np.asarray(fn(x1, self.wall_X), dtype=float) * np.ones(self.wall_X.shape[:2])).mean(axis=1)


def _transport(q, q_in, D, geo, Fz, Fs):
    """Net inflow into every cell from diffusion and upwind advection."""
    net = np.zeros_like(q)
    # radial diffusion and advection (axis and wall faces carry nothing here)
    f = D * geo.T_rad * (q[:, :-1] - q[:, 1:])
    F = Fs[:, 1:-1]
    f = f + np.where(F >= 0, F * q[:, :-1], F * q[:, 1:])
    net[:, :-1] -= f
    net[:, 1:] += f
    # axial faces 0..n_x
    left = np.vstack([np.full((1, q.shape[1]), q_in), q])
    right = np.vstack([q, q[-1:]])
    f = D * geo.T_ax * (left - right)
    f = f + np.where(Fz >= 0, Fz * left, Fz * right)
    net += f[:-1] - f[1:]
    return net


def _out_rates(geo, Fz, Fs):
    """Sum of outgoing advective fluxes per cell."""
    out = np.maximum(Fz[1:], 0.0) + np.maximum(-Fz[:-1], 0.0)
    out += np.maximum(Fs[:, 1:], 0.0) + np.maximum(-Fs[:, :-1], 0.0)
    return out


def stable_dt(grid, velocity, absorption, T, n_samples=33):
    geo = _Geometry(grid)
    eps = grid.eps
    D = max(eps * absorption.chi, eps * absorption.omega)
    diff = np.zeros_like(geo.volume)
    diff[:, :-1] += geo.T_rad
    diff[:, 1:] += geo.T_rad
    diff += geo.T_ax[:-1] + geo.T_ax[1:]
    rho = geo.surface_mean(absorption.rho_surf)
    etap = geo.surface_mean(absorption.eta_p)
    best = 0.0
    for t in np.linspace(0.0, T, n_samples):
        Fz, Fs = geo.stream_fluxes(velocity, t)
        etaa = geo.surface_mean(lambda x1, X: absorption.eta_a(x1, X, t))
        wall = eps * geo.wall_area * np.maximum(etap + etaa * absorption.g_a_lipschitz, rho)
        zeta = np.max(np.asarray(absorption.zeta(grid.x_centers, t), dtype=float))
        rate = (D * diff + _out_rates(geo, Fz, Fs)) / geo.volume
        rate[:, -1] += wall / geo.volume[:, -1]
        rate += zeta * absorption.phi_lipschitz
        best = max(best, float(np.max(rate)))
    hmin = min(grid.hx, float(np.min(geo.G)) * grid.hs)
    bounds = [1.0 / best, 0.4 * hmin ** 2 / D]
    return 0.9 * min(bounds)


@dataclass
class MicroResult:
    grid: MicroGrid
    times: np.ndarray
    u: np.ndarray                # (n_snap, n_x, n_rho)
    v: np.ndarray
    dt: float
    v_max_history: np.ndarray = field(repr=False, default=None)
    u_min_history: np.ndarray = field(repr=False, default=None)
    v_min_history: np.ndarray = field(repr=False, default=None)

    def fields(self, k):
        return MicroFields(self.u[k], self.v[k], float(self.times[k]))

    def averages(self):
        w = self.grid.ring_weights()
        w = w / w.sum()
        return self.u @ w, self.v @ w

    def snapshot_rows(self):
        x, s = self.grid.x_centers, self.grid.s_centers
        for k, t in enumerate(self.times):
            for i in range(x.size):
                for j in range(s.size):
                    yield (t, x[i], s[j], self.u[k, i, j], self.v[k, i, j])

    def to_csv(self, path):
        return write_csv(path, ["t", "x1", "rho_hat", "u", "v"], self.snapshot_rows())


def solve_micro(grid, velocity, absorption, inflow, T, n_snapshots=10):
    if velocity.stream_fn is None:
        raise InvalidParameterError("micro solves need a velocity with a stream function")
    if not T > 0 or int(n_snapshots) < 1:
        raise InvalidParameterError("need T > 0 and n_snapshots >= 1")
    dt_bound = stable_dt(grid, velocity, absorption, T)
    if grid.dt is not None and grid.dt > dt_bound * (1 + 1e-12):
        raise StepSizeError(f"dt={grid.dt:.3e} exceeds the stability bound {dt_bound:.3e}")
    dt_max = grid.dt or dt_bound
    per = max(1, math.ceil(T / (n_snapshots * dt_max) - 1e-12))
    n_steps = per * n_snapshots
    dt = T / n_steps

    geo = _Geometry(grid)
    eps = grid.eps
    Du, Dv = eps * absorption.chi, eps * absorption.omega
    xc = grid.x_centers
    etap = geo.surface_mean(absorption.eta_p)
    rho = geo.surface_mean(absorption.rho_surf)
    steady = _is_steady(velocity)
    fluxes = geo.stream_fluxes(velocity, 0.0) if steady else None
    wall_scale = eps * geo.wall_area
    Vw = geo.volume[:, -1]
    ratio = absorption.alpha / absorption.omega

    u = np.zeros_like(geo.volume)
    v = np.zeros_like(geo.volume)
    su, sv, st = [u.copy()], [v.copy()], [0.0]
    vmax = [0.0]
    umin = [0.0]
    vmin = [0.0]
    for n in range(n_steps):
        t = n * dt
        Fz, Fs = fluxes if steady else geo.stream_fluxes(velocity, t)
        u_in, v_in = inflow(t)
        etaa = geo.surface_mean(lambda x1, X: absorption.eta_a(x1, X, t))
        zeta = np.asarray(absorption.zeta(xc, t), dtype=float)[:, None] * np.ones_like(v)
        conv = zeta * absorption.phi(v)
        uw, vw = u[:, -1], v[:, -1]
        theta = etap * uw + etaa * absorption.g_a(uw) - ratio * rho * vw
        du = _transport(u, u_in, Du, geo, Fz, Fs) / geo.volume + conv
        dv = _transport(v, v_in, Dv, geo, Fz, Fs) / geo.volume - conv
        du[:, -1] -= wall_scale * theta / Vw
        dv[:, -1] -= wall_scale * rho * vw / Vw
        u = u + dt * du
        v = v + dt * dv
        vmax.append(float(np.max(v)))
        vmin.append(float(np.min(v)))
        umin.append(float(np.min(u)))
        if (n + 1) % per == 0:
            su.append(u.copy())
            sv.append(v.copy())
            st.append((n + 1) * dt)
    return MicroResult(grid, np.array(st), np.array(su), np.array(sv), dt,
                       np.array(vmax), np.array(umin), np.array(vmin))


def _is_steady(velocity):
    probe = np.array([[0.5]])
    a = velocity.stream_fn(0.0, probe, probe, 0.0)
    b = velocity.stream_fn(0.0, probe, probe, 0.37)
    c = velocity.stream_fn(0.0, probe, probe, 0.81)
    return np.allclose(a, b, rtol=0, atol=0) and np.allclose(a, c, rtol=0, atol=0)


def cross_section_average(fields, grid):
    """Area-weighted slice means ``(x1, ubar, vbar)`` of a MicroFields."""
    w = grid.ring_weights()
    w = w / w.sum()
    return grid.x_centers, np.asarray(fields.u_eps) @ w, np.asarray(fields.v_eps) @ w


def cross_section_average_fn(f, x1, grid, n_gauss=16):
    """Slice mean of a callable ``f(x1, rho)`` by Gauss-Legendre quadrature in rho."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    s = 0.5 * (xg + 1.0)
    w = 0.5 * wg * s
    Rw = grid.wall_radius(x1)
    vals = np.asarray(f(x1[:, None], Rw[:, None] * s[None, :]), dtype=float)
    return (vals * w).sum(axis=1) / w.sum()


@dataclass(frozen=True)
class MicroScenario:
    profile: object
    velocity: object
    absorption: object
    inflow: object
    L: float = 1.0
    T: float = 1.0
    n_z_per_period: int = 16
    n_rho: int = 8
    macro_cells: int = 1600
    n_snapshots: int = 20
    coeff_x1_samples: tuple = (0.0,)
    coeff_t_samples: tuple = (0.0,)
    check_assumptions: bool = True      # off only for degenerate reaction-free oracles


@dataclass
class ComparisonTable:
    eps: list
    err_u: list
    err_v: list
    flags: list = field(default_factory=list)

    @property
    def monotone(self):
        return not self.flags

    def rows(self):
        for i in range(len(self.eps)):
            yield (self.eps[i], self.err_u[i], self.err_v[i])

    def to_csv(self, path):
        return write_csv(path, ["eps", "err_u", "err_v"], self.rows())


def macro_reference(scenario):
    from .homogenize import homogenized_coefficients
    from .macro import AxialGrid, solve_macro

    coeffs = homogenized_coefficients(scenario.profile, scenario.velocity, scenario.absorption,
                                      scenario.coeff_x1_samples, scenario.coeff_t_samples,
                                      check_assumptions=scenario.check_assumptions)
    grid = AxialGrid(scenario.L, scenario.macro_cells, scenario.T)
    return solve_macro(grid, coeffs, scenario.absorption, scenario.inflow, n_snapshots=scenario.n_snapshots)


def compare_micro_macro(eps_list, scenario, macro=None):
    """Sup over snapshot times and slices of |slice mean - 1-d limit|, per eps.

    Non-decreasing errors are flagged (usually under-resolution), not raised.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise InvalidParameterError("eps_list needs at least 3 entries")
    if macro is None:
        macro = macro_reference(scenario)
    xm = macro.grid.centers
    err_u, err_v = [], []
    for eps in eps_list:
        grid = MicroGrid(eps, scenario.L, scenario.profile, scenario.n_z_per_period, scenario.n_rho)
        res = solve_micro(grid, scenario.velocity, scenario.absorption, scenario.inflow, scenario.T,
                          scenario.n_snapshots)
        ubar, vbar = res.averages()
        x = grid.x_centers
        eu = max(float(np.max(np.abs(ubar[k] - np.interp(x, xm, macro.u[k])))) for k in range(len(res.times)))
        ev = max(float(np.max(np.abs(vbar[k] - np.interp(x, xm, macro.v[k])))) for k in range(len(res.times)))
        err_u.append(eu)
        err_v.append(ev)
    flags = []
    for i in range(1, len(eps_list)):
        for name, err in (("u", err_u), ("v", err_v)):
            if not err[i] < err[i - 1]:
                flags.append(f"error in {name} did not decrease from eps={eps_list[i - 1]} to eps={eps_list[i]}")
    return ComparisonTable(eps_list, err_u, err_v, flags)
