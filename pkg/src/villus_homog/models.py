"""Coefficient models shared by the ODE and PDE pipelines.

Everything here is immutable after construction and every evaluation is a
pure function of its arguments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import families
from .errors import (AssumptionViolationError, InvalidParameterError,
                     UnsupportedGeometryError)
from .families import FunctionSpec, michaelis_menten

TWO_PI = 2.0 * np.pi

# Reported physiological scales (growing pig): peristaltic wave speed and
# interval between effective waves reaching the bolus.
WAVE_SPEED_M_PER_H = 7.2
PULSE_INTERVAL_S = 12.0


def eval_michaelis_menten(s, V_max, K_m):
    return michaelis_menten(s, V_max, K_m)


def diffusion_coefficient(kT_over_3mu, rho_over_6piM):
    """Stokes-Einstein type diffusivity ``kT/(3 mu) * (rho/(6 pi M))**(1/3)``."""
    if kT_over_3mu <= 0 or rho_over_6piM <= 0:
        raise InvalidParameterError("diffusion_coefficient inputs must be positive")
    return kT_over_3mu * np.cbrt(rho_over_6piM)


def to_internal_units(wave_speed, pulse_period, length_scale, time_scale):
    """Convert a dimensional wave speed and pulse period to internal units.

    ``wave_speed`` is in length/time and ``pulse_period`` in time, both in the
    same units as ``length_scale`` and ``time_scale``.  Returns
    ``(c, eps)`` with ``c = wave_speed * time_scale / length_scale`` and
    ``eps = pulse_period / time_scale``.  Choosing
    ``length_scale = wave_speed * time_scale`` gives ``c = 1``.
    """
    if min(wave_speed, pulse_period, length_scale, time_scale) <= 0:
        raise InvalidParameterError("unit scales must be positive")
    return wave_speed * time_scale / length_scale, pulse_period / time_scale


# --- pulsed transport -------------------------------------------------------------

def _default_shape(s):
    return 2.0 * np.sin(np.pi * np.asarray(s, dtype=float)) ** 2


def _unit_friction(t):
    return 1.0


@dataclass(frozen=True)
class PulseModel:
    """Peristaltic forcing of the bolus.

    The pulse efficiency is ``g~(s, V, x, y) = w(s) (c0 + c1 sum(y)) / (a + b x)``
    for ``V > 0`` and zero otherwise, with ``w`` a nonnegative 1-periodic shape.
    """

    wave_speed_c: float
    pulse_period_eps: float
    pulse_shape_w: Callable = _default_shape
    friction_k: Callable = _unit_friction
    amplitude_params: tuple = (1.0, 1.0, 1.0, 0.0)

    def __post_init__(self):
        if not self.wave_speed_c > 0:
            raise InvalidParameterError("wave speed c must be positive")
        if not self.pulse_period_eps > 0:
            raise InvalidParameterError("pulse period eps must be positive")
        c0, c1, a, b = self.amplitude_params
        if min(c0, c1, a, b) < 0:
            raise InvalidParameterError("amplitude parameters (c0, c1, a, b) must be nonnegative")
        if a <= 0:
            raise InvalidParameterError("amplitude denominator a + b*x must stay positive (need a > 0)")
        s = np.linspace(0.0, 1.0, 101)
        w = np.asarray(self.pulse_shape_w(s), dtype=float)
        if np.any(w < 0):
            raise InvalidParameterError("pulse shape must be nonnegative")
        if np.max(np.abs(np.asarray(self.pulse_shape_w(s + 1.0)) - w)) > 1e-12:
            raise InvalidParameterError("pulse shape must be 1-periodic")

    def with_eps(self, eps):
        return PulseModel(self.wave_speed_c, eps, self.pulse_shape_w, self.friction_k,
                          self.amplitude_params)

    def check_friction(self, T, n=201):
        t = np.linspace(0.0, T, n)
        k = np.array([self.friction_k(ti) for ti in t])
        if np.any(k <= 0):
            raise InvalidParameterError("friction k(t) must be positive on [0, T]")

    def amplitude(self, x, ysum):
        c0, c1, a, b = self.amplitude_params
        return (c0 + c1 * ysum) / (a + b * x)

    def g_tilde(self, s, V, x, y):
        if V <= 0:
            return np.zeros_like(np.asarray(s, dtype=float))
        return self.pulse_shape_w(s) * self.amplitude(x, float(np.sum(y)))


def eval_pulse_force(s, v_rel, x, y, model):
    """Pulse acceleration ``g = g~ * v_rel``; zero once the bolus catches the wave."""
    if v_rel <= 0:
        return 0.0
    return float(model.g_tilde(s, v_rel, x, y) * v_rel)


@dataclass(frozen=True)
class KineticsModel:
    dimension_K: int
    rate_d: Callable
    lipschitz_bound: float

    def __post_init__(self):
        if int(self.dimension_K) < 1:
            raise InvalidParameterError("dimension_K must be >= 1")
        if not self.lipschitz_bound > 0:
            raise InvalidParameterError("lipschitz_bound must be positive")

    def check_lipschitz(self, x_max=10.0, y_max=10.0, n=200, h=1e-6, seed=0):
        """Largest sampled finite-difference slope; raises if above the bound."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n):
            x = rng.uniform(0, x_max)
            y = rng.uniform(0, y_max, self.dimension_K)
            d0 = np.asarray(self.rate_d(x, y), dtype=float)
            dx = (np.asarray(self.rate_d(x + h, y)) - d0) / h
            worst = max(worst, float(np.max(np.abs(dx))))
            for i in range(self.dimension_K):
                yp = y.copy()
                yp[i] += h
                dy = (np.asarray(self.rate_d(x, yp)) - d0) / h
                worst = max(worst, float(np.max(np.abs(dy))))
        if worst > self.lipschitz_bound * (1 + 1e-4):
            raise InvalidParameterError(
                f"sampled slope {worst:.4g} exceeds declared Lipschitz bound {self.lipschitz_bound}")
        return worst


def linear_decay_kinetics(rates):
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if np.any(rates < 0):
        raise InvalidParameterError("decay rates must be nonnegative")
    bound = max(float(np.max(rates)), 1e-12)
    return KineticsModel(rates.size, lambda x, y: -rates * y, bound)


def inert_kinetics(K=1):
    return KineticsModel(int(K), lambda x, y: np.zeros(int(K)), 1e-12)


# --- absorption / degradation -------------------------------------------------------

@dataclass(frozen=True)
class AbsorptionModel:
    """Wall and volume reaction laws.

    ``eta_p(x1, X)``, ``eta_a(x1, X, t)``, ``rho_surf(x1, X)`` act on the
    villous wall; ``zeta(x1, t) * phi(v)`` is the volumic conversion of
    feedstuff into nutrient.  A fraction ``alpha`` of the surfacic product
    re-enters the lumen.
    """

    eta_p: Callable
    eta_a: Callable
    g_a: Callable
    rho_surf: Callable
    alpha: float
    omega: float
    chi: float
    zeta: Callable
    phi: Callable
    eta_lower_bound: float
    g_a_lipschitz: float = 1.0
    phi_lipschitz: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidParameterError("alpha must lie in (0, 1]")
        if not self.omega > 0 or not self.chi > 0:
            raise InvalidParameterError("omega and chi must be positive")
        if self.omega > self.chi:
            raise InvalidParameterError("omega must not exceed chi (feedstuff diffuses slower)")
        if not self.eta_lower_bound > 0:
            raise InvalidParameterError("eta_lower_bound must be positive")
        s = np.linspace(-2.0, 10.0, 121)
        for name, fn in (("g_a", self.g_a), ("phi", self.phi)):
            vals = np.asarray(fn(s), dtype=float)
            if np.any(np.diff(vals) < -1e-14):
                raise InvalidParameterError(f"{name} must be nondecreasing")
            if np.any(vals[s <= 0] != 0):
                raise InvalidParameterError(f"{name} must vanish for s <= 0")

    def theta(self, x1, X, t, u, v):
        return (self.eta_p(x1, X) * u + self.eta_a(x1, X, t) * self.g_a(u)
                - (self.alpha / self.omega) * self.rho_surf(x1, X) * v)

    def check_assumptions(self, wall_points, x1_samples=(0.0,), t_samples=(0.0,)):
        """Sampled (T2) checks on the given wall points: periodicity, lower bound, sign."""
        X = np.asarray(wall_points, dtype=float)
        shift = np.zeros(3)
        shift[0] = 1.0
        for x1 in x1_samples:
            for t in t_samples:
                for name, fn in (("eta_p", lambda X: self.eta_p(x1, X)),
                                 ("eta_a", lambda X: self.eta_a(x1, X, t)),
                                 ("rho_surf", lambda X: self.rho_surf(x1, X))):
                    a, b = np.asarray(fn(X)), np.asarray(fn(X + shift))
                    if np.max(np.abs(a - b)) > 1e-12:
                        raise AssumptionViolationError("T2", f"{name} is not 1-periodic in X1")
                    if np.any(a < 0):
                        raise AssumptionViolationError("T2", f"{name} must be nonnegative")
                if np.any(np.asarray(self.eta_p(x1, X)) < self.eta_lower_bound):
                    raise AssumptionViolationError("T2", "eta_p drops below its declared lower bound")
                if np.any(np.asarray(self.rho_surf(x1, X)) <= 0):
                    raise AssumptionViolationError("T2", "rho_surf must be positive")


def absorption_from_specs(*, eta_p, eta_a, g_a, rho_surf, zeta, phi, alpha, omega, chi,
                          eta_lower_bound):
    """Build an :class:`AbsorptionModel` from family specs.

    Lipschitz constants of ``g_a`` and ``phi`` are read off the families
    (they bound explicit time steps).
    """
    def lip(spec):
        p = families.resolve("rate", spec).params
        if spec.family == "michaelis_menten":
            return float(p["vmax"]) / float(p["km"])
        if spec.family in ("linear", "capped_linear"):
            return float(p["slope"])
        return 0.0

    return AbsorptionModel(
        eta_p=_drop_t(families.build("surface", eta_p)),
        eta_a=families.build("surface", eta_a),
        g_a=families.build("rate", g_a),
        rho_surf=_drop_t(families.build("surface", rho_surf)),
        alpha=float(alpha), omega=float(omega), chi=float(chi),
        zeta=families.build("field", zeta),
        phi=families.build("rate", phi),
        eta_lower_bound=float(eta_lower_bound),
        g_a_lipschitz=lip(g_a), phi_lipschitz=lip(phi),
    )


def _drop_t(f):
    return lambda x1, X: f(x1, X, 0.0)


# --- velocity -----------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityField:
    """Microscopic velocity ``c(x1, X, t)`` in cell units.

    Built-in fields are axisymmetric and come with a Stokes stream function
    ``stream_fn(x1, Z, s, t)`` (``Z`` axial cell coordinate, ``s`` normalised
    radius), so that ``c_z = (1/rho) dPsi/drho`` and ``c_rho = -(1/rho) dPsi/dz``.
    """

    c_fn: Callable
    cbar_fn: Optional[Callable] = None
    stream_fn: Optional[Callable] = None
    name: str = "custom"


@dataclass(frozen=True)
class VelocityCheck:
    c1_min_axial: float
    c1_mean_axial: float
    c2_max_divergence: float
    c3_max_normal: float


_STREAM_SHAPES = {
    # f(s), f'(s)/s
    "plug": (lambda s: 0.5 * s ** 2, lambda s: np.ones_like(s)),
    "poiseuille": (lambda s: s ** 2 - 0.5 * s ** 4, lambda s: 2.0 - 2.0 * s ** 2),
}


def stream_velocity(profile, speed=1.0, kind="plug", modulation=0.0, mod_period=1.0):
    """Divergence-free, wall-tangent velocity following the villous wall.

    ``Psi = A(t) f(rho / R(Z))`` is constant on the wall, so (C2) and (C3)
    hold exactly; ``A`` is scaled so the cell average of ``c . e1`` equals
    ``speed * (1 + modulation * sin(2 pi t / mod_period))``.
    """
    if not profile.axisymmetric:
        raise UnsupportedGeometryError("stream-function velocities need a theta-independent profile")
    if kind not in _STREAM_SHAPES:
        raise InvalidParameterError(f"unknown stream velocity kind {kind!r}")
    if speed < 0 or abs(modulation) >= 1:
        raise InvalidParameterError("need speed >= 0 and |modulation| < 1")
    f, fp_over_s = _STREAM_SHAPES[kind]
    zq = np.arange(1024) / 1024
    mean_R2 = float(np.mean(profile.radius(zq) ** 2))
    A0 = speed * mean_R2 / (2.0 * f(1.0))

    def amp(t):
        return A0 * (1.0 + modulation * np.sin(TWO_PI * np.asarray(t, dtype=float) / mod_period))

    def stream(x1, Z, s, t):
        return amp(t) * f(np.asarray(s, dtype=float)) + 0.0 * np.asarray(Z)

    def c_fn(x1, X, t):
        X = np.asarray(X, dtype=float)
        Z = X[..., 0]
        rho_p = np.hypot(X[..., 1], X[..., 2])
        R, Rz, _ = profile.radius_derivatives(Z)
        s = rho_p / R
        g = fp_over_s(s)
        A = amp(t)
        cz = A * g / R ** 2
        crho = A * g * s * Rz / R ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(rho_p > 0, X[..., 1] / np.where(rho_p > 0, rho_p, 1), 1.0)
            sin = np.where(rho_p > 0, X[..., 2] / np.where(rho_p > 0, rho_p, 1), 0.0)
        return np.stack([cz, crho * cos, crho * sin], axis=-1)

    def cbar(x1, t):
        return np.array([float(amp(t)) * 2.0 * f(1.0) / mean_R2, 0.0, 0.0])

    return VelocityField(c_fn, cbar, stream, name=kind)


def uniform_velocity(profile, speed=1.0):
    """Constant axial vector ``(speed, 0, 0)``; tangent to the wall only for a flat profile."""
    def c_fn(x1, X, t):
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape)
        out[..., 0] = speed
        return out

    def stream(x1, Z, s, t):
        return 0.5 * speed * (profile.radius(np.asarray(Z, dtype=float)) * np.asarray(s)) ** 2

    return VelocityField(c_fn, lambda x1, t: np.array([speed, 0.0, 0.0]),
                         stream if profile.axisymmetric else None, name="uniform")


def zero_velocity():
    return VelocityField(lambda x1, X, t: np.zeros(np.asarray(X).shape),
                         lambda x1, t: np.zeros(3), lambda x1, Z, s, t: 0.0 * np.asarray(s), name="zero")


VELOCITY_FAMILIES = {
    "plug": {"speed": 1.0, "modulation": 0.0, "mod_period": 1.0},
    "poiseuille": {"speed": 1.0, "modulation": 0.0, "mod_period": 1.0},
    "uniform": {"speed": 1.0},
    "zero": {},
}


def velocity_from_family(family, profile, **params):
    if family not in VELOCITY_FAMILIES:
        raise InvalidParameterError(f"unknown velocity family {family!r}")
    p = {**VELOCITY_FAMILIES[family], **params}
    if family in ("plug", "poiseuille"):
        return stream_velocity(profile, float(p["speed"]), family, float(p["modulation"]),
                               float(p["mod_period"]))
    if family == "uniform":
        return uniform_velocity(profile, float(p["speed"]))
    return zero_velocity()


def check_velocity(profile, velocity, x1=0.0, t=0.0, n=24, h=1e-5, seed=0):
    """Sampled residuals of (C1)-(C3) for ``velocity`` on ``profile``."""
    from .geometry import outward_normal, volume_average

    rng = np.random.default_rng(seed)
    z = rng.uniform(0, 1, n)
    th = rng.uniform(0, TWO_PI, n)
    s = rng.uniform(0.05, 0.95, n)
    rho = profile.radius(z, th) * s
    X = np.stack([z, rho * np.cos(th), rho * np.sin(th)], axis=-1)
    c = np.asarray(velocity.c_fn(x1, X, t))
    div = np.zeros(n)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        div += (np.asarray(velocity.c_fn(x1, X + e, t))[..., k]
                - np.asarray(velocity.c_fn(x1, X - e, t))[..., k]) / (2 * h)
    scale = max(1.0, float(np.max(np.abs(c))))
    W = profile.wall_point(z, th)
    N = outward_normal(profile, z, th)
    cw = np.asarray(velocity.c_fn(x1, W, t))
    mean_axial = float(volume_average(profile, lambda Y: velocity.c_fn(x1, Y, t)[..., 0], 32, 16, 17))
    return VelocityCheck(
        c1_min_axial=float(min(np.min(c[..., 0]), np.min(cw[..., 0]))),
        c1_mean_axial=mean_axial,
        c2_max_divergence=float(np.max(np.abs(div))) / scale,
        c3_max_normal=float(np.max(np.abs(np.sum(cw * N, axis=-1)))) / scale,
    )


def require_c1(check, where=""):
    if check.c1_min_axial < -1e-12:
        raise AssumptionViolationError("C1", f"c . e1 < 0 somewhere{where}")
    if check.c1_mean_axial <= 0:
        raise AssumptionViolationError("C1", f"cell average of c . e1 is not positive{where}")
