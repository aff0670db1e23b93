"""Homogenized coefficients and the compatibility identity of the cell problem.

The effective 1-d system uses cell averages of the microscopic data:

    cbar   = volume mean of c(x1, ., t)
    etap   = wall mean of eta_p(x1, .)
    etaa   = wall mean of eta_a(x1, ., t)
    rhobar = wall mean of rho_surf(x1, .)

and the cell problem for the corrector is solvable exactly when

    lambda = R(P) * Thetabar(mu, nu) + cbar . e1 * p - delta,
    Thetabar = etap mu + etaa g_a(mu) - (alpha / omega) rhobar nu.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import AssumptionViolationError, InvalidParameterError
from .geometry import _periodic_grid, cell_measures, surface_average, volume_average
from .io import write_csv
from .models import check_velocity, require_c1


def theta_surface(x1, X, t, u, v, absorption):
    return absorption.theta(x1, X, t, u, v)


def _interp_xt(xs, ts, table, x1, t):
    """Linear interpolation in t (clamped), then in x1 (clamped)."""
    if len(ts) == 1:
        row = table[:, 0]
    else:
        t = float(np.clip(t, ts[0], ts[-1]))
        j = min(int(np.searchsorted(ts, t, side="right")) - 1, len(ts) - 2)
        w = (t - ts[j]) / (ts[j + 1] - ts[j])
        row = (1.0 - w) * table[:, j] + w * table[:, j + 1]
    out = np.interp(np.asarray(x1, dtype=float), xs, row)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class HomogenizedCoefficients:
    """Cell-averaged coefficients tabulated on ``x1_samples x t_samples``.

    Lookups interpolate linearly and clamp outside the sampled range.
    """

    x1_samples: np.ndarray
    t_samples: np.ndarray
    cbar_table: np.ndarray      # (nx, nt, 3), full vector average
    etap_table: np.ndarray      # (nx,)
    etaa_table: np.ndarray      # (nx, nt)
    rhobar_table: np.ndarray    # (nx,)
    ratio_RP: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.ratio_RP > 0:
            raise InvalidParameterError("ratio_RP must be positive")
        if np.any(self.cbar_table[..., 0] <= 0):
            raise AssumptionViolationError("C1", "cell average of c . e1 must be positive")

    def cbar_e1(self, x1, t):
        return _interp_xt(self.x1_samples, self.t_samples, self.cbar_table[..., 0], x1, t)

    def cbar(self, x1, t):
        return np.array([_interp_xt(self.x1_samples, self.t_samples, self.cbar_table[..., k], x1, t)
                         for k in range(3)])

    def etabar_p(self, x1):
        return _interp_xt(self.x1_samples, self.t_samples[:1], self.etap_table[:, None], x1, 0.0)

    def etabar_a(self, x1, t):
        return _interp_xt(self.x1_samples, self.t_samples, self.etaa_table, x1, t)

    def rhobar(self, x1):
        return _interp_xt(self.x1_samples, self.t_samples[:1], self.rhobar_table[:, None], x1, 0.0)

    @classmethod
    def constant(cls, cbar_e1, etabar_p, etabar_a, rhobar, ratio_RP):
        """X- and x1-independent coefficients (no geometry needed)."""
        return cls(np.array([0.0]), np.array([0.0]), np.array([[[float(cbar_e1), 0.0, 0.0]]]),
                   np.array([float(etabar_p)]), np.array([[float(etabar_a)]]),
                   np.array([float(rhobar)]), float(ratio_RP))

    def with_etabar_p(self, scale):
        return replace(self, etap_table=self.etap_table * scale)

    def rows(self):
        for i, x in enumerate(self.x1_samples):
            for j, t in enumerate(self.t_samples):
                yield (x, t, self.cbar_table[i, j, 0], self.etap_table[i], self.etaa_table[i, j],
                       self.rhobar_table[i])

    def to_csv(self, path):
        return write_csv(path, ["x1", "t", "cbar", "etap", "etaa", "rhobar"], self.rows())


def homogenized_coefficients(profile, velocity, absorption, x1_samples=(0.0,), t_samples=(0.0,),
                             n_z=64, n_theta=64, n_rho=33, check_assumptions=True):
    xs = np.atleast_1d(np.asarray(x1_samples, dtype=float))
    ts = np.atleast_1d(np.asarray(t_samples, dtype=float))
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ts) <= 0):
        raise InvalidParameterError("sample grids must be strictly increasing")
    diagnostics = {"c2_max_divergence": 0.0, "c3_max_normal": 0.0}
    if check_assumptions:
        Z, TH, _ = _periodic_grid(16, 16)
        absorption.check_assumptions(profile.wall_point(Z, TH), xs, ts)
        for x1 in xs:
            for t in ts:
                chk = check_velocity(profile, velocity, x1, t)
                require_c1(chk, f" at x1={x1}, t={t}")
                diagnostics["c2_max_divergence"] = max(diagnostics["c2_max_divergence"], chk.c2_max_divergence)
                diagnostics["c3_max_normal"] = max(diagnostics["c3_max_normal"], chk.c3_max_normal)

    measures = cell_measures(profile, n_z, n_theta)
    cbar = np.empty((xs.size, ts.size, 3))
    etaa = np.empty((xs.size, ts.size))
    etap = np.empty(xs.size)
    rhob = np.empty(xs.size)
    for i, x1 in enumerate(xs):
        etap[i] = surface_average(profile, lambda X: absorption.eta_p(x1, X), n_z, n_theta)
        rhob[i] = surface_average(profile, lambda X: absorption.rho_surf(x1, X), n_z, n_theta)
        for j, t in enumerate(ts):
            cbar[i, j] = volume_average(profile, lambda X: velocity.c_fn(x1, X, t), n_z, n_theta, n_rho)
            etaa[i, j] = surface_average(profile, lambda X: absorption.eta_a(x1, X, t), n_z, n_theta)
    if np.any(cbar[..., 0] <= 0):
        raise AssumptionViolationError("C1", "cell average of c . e1 is not positive at some sample")
    return HomogenizedCoefficients(xs, ts, cbar, etap, etaa, rhob, measures.ratio_RP, diagnostics)


@dataclass(frozen=True)
class CellProblemData:
    p: float
    mu: float
    nu: float
    delta: float
    x1: float = 0.0
    t: float = 0.0
    lam: Optional[float] = None


def theta_bar(coeffs, absorption, x1, t, mu, nu):
    return (coeffs.etabar_p(x1) * mu + coeffs.etabar_a(x1, t) * absorption.g_a(mu)
            - (absorption.alpha / absorption.omega) * coeffs.rhobar(x1) * nu)


def lambda_from_compatibility(data, coeffs, absorption):
    th = theta_bar(coeffs, absorption, data.x1, data.t, data.mu, data.nu)
    return float(coeffs.ratio_RP * th + coeffs.cbar_e1(data.x1, data.t) * data.p - data.delta)


def with_compatible_lambda(data, coeffs, absorption):
    return replace(data, lam=lambda_from_compatibility(data, coeffs, absorption))


def check_solvability(data, coeffs, absorption, tolerance=1e-12):
    """``(solvable, residual)`` with residual ``|lambda - compatible lambda|``."""
    if data.lam is None:
        raise InvalidParameterError("data.lam must be set")
    residual = abs(float(data.lam) - lambda_from_compatibility(data, coeffs, absorption))
    return residual <= tolerance, residual
