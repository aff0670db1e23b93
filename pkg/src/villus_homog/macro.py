"""Explicit upwind solver for the homogenized 1-d transport-absorption system

    u_t + a(x, t) u_x =  zeta phi(v) - R * Thetabar(u, v)
    v_t + a(x, t) v_x = -zeta phi(v) - R * (1/omega) rhobar v

on ``(0, L)`` with Dirichlet inflow at ``x = 0``, free outflow at ``x = L``
and empty initial state; ``a = cbar . e1 > 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidParameterError, StepSizeError
from .io import write_csv


@dataclass(frozen=True)
class AxialGrid:
    L: float
    n_cells: int
    T: float
    cfl: float = 0.9

    def __post_init__(self):
        if not self.L > 0 or not self.T > 0:
            raise InvalidParameterError("L and T must be positive")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise InvalidParameterError("n_cells must be an integer >= 2")
        if not 0 < self.cfl < 1:
            raise InvalidParameterError("cfl must lie in (0, 1)")

    @property
    def dx(self):
        return self.L / self.n_cells

    @property
    def centers(self):
        return (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self):
        return np.arange(self.n_cells + 1) * self.dx


@dataclass
class AxialFields:
    u: np.ndarray
    v: np.ndarray
    time: float = 0.0

    @classmethod
    def empty(cls, grid):
        return cls(np.zeros(grid.n_cells), np.zeros(grid.n_cells), 0.0)


@dataclass(frozen=True)
class InflowSignals:
    u0: Callable
    v0: Callable

    def __post_init__(self):
        if abs(float(self.u0(0.0))) > 1e-14 or abs(float(self.v0(0.0))) > 1e-14:
            raise InvalidParameterError("inflow must vanish at t = 0 (the intestine starts empty)")

    def __call__(self, t):
        return float(self.u0(t)), float(self.v0(t))


def zero_inflow():
    return InflowSignals(lambda t: 0.0, lambda t: 0.0)


def _rates(grid, coeffs, absorption, t):
    x = grid.centers
    R = coeffs.ratio_RP
    return {
        "a": np.asarray(coeffs.cbar_e1(grid.faces, t), dtype=float),
        "etap": R * np.asarray(coeffs.etabar_p(x), dtype=float),
        "etaa": R * np.asarray(coeffs.etabar_a(x, t), dtype=float),
        "rho": R * np.asarray(coeffs.rhobar(x), dtype=float) / absorption.omega,
        "zeta": np.asarray(absorption.zeta(x, t), dtype=float) * np.ones_like(x),
    }


def _reaction_bound(r, absorption):
    lu = np.max(r["etap"] + r["etaa"] * absorption.g_a_lipschitz)
    lv = np.max(r["zeta"] * absorption.phi_lipschitz + r["rho"])
    return float(max(lu, lv))


def _check_dt(grid, r, absorption, dt):
    amax = float(np.max(r["a"]))
    lip = _reaction_bound(r, absorption)
    tol = 1 + 1e-12
    if amax > 0 and dt > grid.cfl * grid.dx / amax * tol:
        raise StepSizeError(f"dt={dt:.3e} violates the CFL bound {grid.cfl * grid.dx / amax:.3e}")
    if dt * lip > 0.5 * tol:
        raise StepSizeError(f"dt={dt:.3e} too large for the reaction rates (dt*L={dt * lip:.3e} > 0.5)")
    if dt * (amax / grid.dx + lip) > tol:
        raise StepSizeError("dt breaks the positivity condition dt*(a/dx + L) <= 1")


def _advance(fields, grid, coeffs, absorption, inflow, dt):
    """One forward-Euler step; returns the new state and the step's budget terms."""
    t = fields.time
    r = _rates(grid, coeffs, absorption, t)
    _check_dt(grid, r, absorption, dt)
    u, v = fields.u, fields.v
    u_in, v_in = inflow(t)
    a = r["a"]
    lam = dt / grid.dx
    up = np.concatenate(([u_in], u[:-1]))
    vp = np.concatenate(([v_in], v[:-1]))
    conv = dt * r["zeta"] * absorption.phi(v)
    wall_u = dt * (r["etap"] * u + r["etaa"] * absorption.g_a(u))
    wall_v = dt * r["rho"] * v
    alpha = absorption.alpha
    u_new = u - lam * a[:-1] * (u - up) + conv - wall_u + alpha * wall_v
    v_new = v - lam * a[:-1] * (v - vp) - conv - wall_v
    dx = grid.dx
    terms = {
        "inflow": dt * a[0] * (u_in + v_in),
        "outflow": dt * a[-1] * (u[-1] + v[-1]),
        "compression": dt * float(np.sum((u + v) * np.diff(a))),
        "absorbed": dx * float(np.sum(wall_u + (1.0 - alpha) * wall_v)),
        "transformed": dx * float(np.sum(conv + alpha * wall_v)),
        "stored": dx * float(np.sum(u_new + v_new - u - v)),
    }
    return AxialFields(u_new, v_new, t + dt), terms


def step_upwind(fields, grid, coeffs, absorption, inflow, dt):
    return _advance(fields, grid, coeffs, absorption, inflow, dt)[0]


def stable_dt(grid, coeffs, absorption, n_samples=65):
    amax, lip = 0.0, 0.0
    for t in np.linspace(0.0, grid.T, n_samples):
        r = _rates(grid, coeffs, absorption, t)
        amax = max(amax, float(np.max(r["a"])))
        lip = max(lip, _reaction_bound(r, absorption))
    bounds = [0.5 / lip if lip > 0 else math.inf, 1.0 / (amax / grid.dx + lip)]
    if amax > 0:
        bounds.append(grid.cfl * grid.dx / amax)
    # sampled maxima may miss peaks in time-dependent rates: keep a margin
    return 0.95 * min(bounds)


BUDGET_COLUMNS = ("inflow", "outflow", "compression", "absorbed", "transformed", "stored")


@dataclass
class MassBudget:
    """Per-step ledger.  Per step: stored = inflow - outflow + compression - absorbed.

    ``compression`` is ``sum (u + v)(a_{i+1} - a_i) dt``, the non-conservative
    part of the advection; it vanishes when ``cbar . e1`` does not depend on x1.
    ``transformed`` (feedstuff turned into nutrient) is reported but cancels.
    """

    t: np.ndarray
    columns: dict

    @property
    def residual(self):
        c = self.columns
        return c["stored"] - (c["inflow"] - c["outflow"] + c["compression"] - c["absorbed"])

    @property
    def scale(self):
        c = self.columns
        s = (np.abs(c["inflow"]) + np.abs(c["outflow"]) + np.abs(c["compression"])
             + np.abs(c["absorbed"]) + np.abs(c["stored"]))
        return s

    @property
    def relative_residual(self):
        """Step residuals over the peak per-step throughput of the run.

        Steps with no boundary or wall exchange still move mass between cells,
        so their own throughput is no usable scale.
        """
        peak = float(np.max(self.scale)) if self.scale.size else 0.0
        if peak == 0:
            return np.zeros_like(self.residual)
        return np.abs(self.residual) / peak

    def totals(self):
        return {k: float(np.sum(v)) for k, v in self.columns.items()}

    def rows(self):
        res = self.residual
        for i, t in enumerate(self.t):
            yield (t, *(self.columns[k][i] for k in BUDGET_COLUMNS), res[i])

    def to_csv(self, path):
        return write_csv(path, ["t", *BUDGET_COLUMNS, "residual"], self.rows())


@dataclass
class MacroResult:
    grid: AxialGrid
    times: np.ndarray           # snapshot times
    u: np.ndarray               # (n_snap, n_cells)
    v: np.ndarray
    budget: MassBudget
    dt: float
    v_max_history: np.ndarray = field(repr=False, default=None)
    u_min_history: np.ndarray = field(repr=False, default=None)

    @property
    def final(self):
        return AxialFields(self.u[-1].copy(), self.v[-1].copy(), float(self.times[-1]))

    def snapshot_rows(self):
        x = self.grid.centers
        for k, t in enumerate(self.times):
            for i in range(x.size):
                yield (t, x[i], self.u[k, i], self.v[k, i])

    def to_csv(self, path):
        return write_csv(path, ["t", "x1", "u", "v"], self.snapshot_rows())


def solve_macro(grid, coeffs, absorption, inflow, dt=None, n_snapshots=10):
    """March to ``grid.T``; snapshots at ``T*k/n_snapshots`` (exact step times)."""
    if int(n_snapshots) < 1:
        raise InvalidParameterError("n_snapshots must be >= 1")
    dt_max = stable_dt(grid, coeffs, absorption) if dt is None else float(dt)
    if not dt_max > 0:
        raise InvalidParameterError("dt must be positive")
    per = max(1, math.ceil(grid.T / (n_snapshots * dt_max) - 1e-12))
    n_steps = per * n_snapshots
    dt = grid.T / n_steps
    fields = AxialFields.empty(grid)
    snaps_u, snaps_v, snap_t = [fields.u.copy()], [fields.v.copy()], [0.0]
    cols = {k: np.empty(n_steps) for k in BUDGET_COLUMNS}
    t_steps = np.empty(n_steps)
    vmax = np.empty(n_steps + 1)
    umin = np.empty(n_steps + 1)
    vmax[0], umin[0] = 0.0, 0.0
    for n in range(n_steps):
        t_steps[n] = fields.time
        fields, terms = _advance(fields, grid, coeffs, absorption, inflow, dt)
        fields.time = (n + 1) * dt        # avoid drift from repeated addition
        for k in BUDGET_COLUMNS:
            cols[k][n] = terms[k]
        vmax[n + 1] = float(np.max(fields.v))
        umin[n + 1] = float(np.min(fields.u))
        if (n + 1) % per == 0:
            snaps_u.append(fields.u.copy())
            snaps_v.append(fields.v.copy())
            snap_t.append(fields.time)
    return MacroResult(grid, np.array(snap_t), np.array(snaps_u), np.array(snaps_v),
                       MassBudget(t_steps, cols), dt, vmax, umin)


def mass_budget(result):
    if result.budget.t.size == 0:
        raise InvalidParameterError("empty series")
    return result.budget
