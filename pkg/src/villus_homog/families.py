"""Named parametric families for every coefficient function.

A coefficient is described by a :class:`FunctionSpec` (family name plus
numeric parameters) so that configs stay declarative; :func:`build` turns a
spec into a vectorised callable.  Tabulated data are just another family
(``table``) evaluated by linear interpolation.

Call signatures by kind:

``shape``      w(s), 1-periodic, nonnegative
``time``       f(t)
``rate``       f(s), nondecreasing, zero for s <= 0
``surface``    f(x1, X, t) with X of shape (..., 3)
``field``      f(x1, t)
``inflow``     f(t) with f(0) = 0
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import InvalidParameterError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FunctionSpec:
    family: str
    params: Mapping[str, object] = field(default_factory=dict)

    def get(self, key, default=None):
        return self.params.get(key, default)


def _table(params, periodic=False):
    xp = np.asarray(params["points"], dtype=float)
    fp = np.asarray(params["values"], dtype=float)
    if xp.ndim != 1 or xp.shape != fp.shape or xp.size < 2:
        raise InvalidParameterError("table needs matching 'points' and 'values' with >= 2 entries")
    if np.any(np.diff(xp) <= 0):
        raise InvalidParameterError("table points must be strictly increasing")
    if periodic:
        return lambda s: np.interp(s, xp, fp, period=1.0)
    return lambda s: np.interp(s, xp, fp)


# --- shape ---------------------------------------------------------------

def _shape_sin2(p):
    amp = float(p["amp"])
    return lambda s: amp * 2.0 * np.sin(np.pi * np.asarray(s, dtype=float)) ** 2


def _shape_constant(p):
    value = float(p["value"])
    return lambda s: np.full_like(np.asarray(s, dtype=float), value)


# --- time ----------------------------------------------------------------

def _time_sinusoid(p):
    mean, amp, period = float(p["mean"]), float(p["amp"]), float(p["period"])
    return lambda t: mean + amp * np.sin(TWO_PI * np.asarray(t, dtype=float) / period)


# --- rate laws -------------------------------------------------------------

def michaelis_menten(s, vmax, km):
    """Saturating uptake ``vmax*s/(km+s)`` for s > 0, zero otherwise."""
    if km <= 0:
        raise InvalidParameterError(f"K_m must be positive, got {km}")
    if vmax < 0:
        raise InvalidParameterError(f"V_max must be nonnegative, got {vmax}")
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 0.0)
    out = vmax * sp / (km + sp)
    return out if out.ndim else float(out)


def _rate_mm(p):
    vmax, km = float(p["vmax"]), float(p["km"])
    michaelis_menten(0.0, vmax, km)  # validates
    return lambda s: michaelis_menten(s, vmax, km)


def _rate_linear(p):
    slope = float(p["slope"])
    return lambda s: slope * np.maximum(np.asarray(s, dtype=float), 0.0)


def _rate_capped(p):
    slope, cap = float(p["slope"]), float(p["cap"])
    return lambda s: np.minimum(slope * np.maximum(np.asarray(s, dtype=float), 0.0), cap)


def _rate_zero(p):
    return lambda s: np.zeros_like(np.asarray(s, dtype=float))


# --- surface coefficients (x1, X, t) ---------------------------------------

def _surf_constant(p):
    value = float(p["value"])
    return lambda x1, X, t: np.full(np.broadcast(np.asarray(x1), np.asarray(X)[..., 0]).shape, value)


def _surf_harmonic(p):
    value, amp, phase = float(p["value"]), float(p["amp"]), float(p["phase"])

    def f(x1, X, t):
        X1 = np.asarray(X, dtype=float)[..., 0]
        return value * (1.0 + amp * np.cos(TWO_PI * (X1 - phase))) + 0.0 * np.asarray(x1)
    return f


def _surf_radial(p):
    # grows towards the villus tip: larger distance from the axis
    value, amp, r0 = float(p["value"]), float(p["amp"]), float(p["r0"])

    def f(x1, X, t):
        X = np.asarray(X, dtype=float)
        rad = np.hypot(X[..., 1], X[..., 2])
        return value * (1.0 + amp * (rad / r0 - 1.0)) + 0.0 * np.asarray(x1)
    return f


def _surf_axial_table(p):
    g = _table(p)
    return lambda x1, X, t: g(np.broadcast_to(np.asarray(x1, dtype=float), np.asarray(X)[..., 0].shape))


def _surf_time_table(p):
    g = _table(p)
    return lambda x1, X, t: float(g(t)) * np.ones(np.broadcast(np.asarray(x1), np.asarray(X)[..., 0]).shape)


# --- fields (x1, t) --------------------------------------------------------

def _field_constant(p):
    value = float(p["value"])
    return lambda x1, t: np.full_like(np.asarray(x1, dtype=float), value)


def _field_axial_table(p):
    g = _table(p)
    return lambda x1, t: g(np.asarray(x1, dtype=float))


def _field_time_table(p):
    g = _table(p)
    return lambda x1, t: float(g(t)) * np.ones_like(np.asarray(x1, dtype=float))


# --- inflow signals ----------------------------------------------------------

def _inflow_ramp(p):
    amp, rise = float(p["amp"]), float(p["rise"])

    def f(t):
        tt = np.clip(np.asarray(t, dtype=float), 0.0, rise)
        return amp * 0.5 * (1.0 - np.cos(np.pi * tt / rise))
    return f


def _inflow_sin_pos(p):
    amp, freq = float(p["amp"]), float(p["freq"])
    return lambda t: amp * np.maximum(0.0, np.sin(np.pi * freq * np.asarray(t, dtype=float)))


def _inflow_pulse(p):
    # smooth bump supported on [0, width]
    amp, width = float(p["amp"]), float(p["width"])

    def f(t):
        tt = np.asarray(t, dtype=float)
        inside = (tt > 0) & (tt < width)
        return np.where(inside, amp * np.sin(np.pi * np.clip(tt, 0, width) / width) ** 2, 0.0)
    return f


# family -> (defaults, factory).  None marks a required parameter.
REGISTRY: dict[str, dict[str, tuple[dict, Callable]]] = {
    "shape": {
        "sin2": ({"amp": 1.0}, _shape_sin2),
        "constant": ({"value": 1.0}, _shape_constant),
        "table": ({"points": None, "values": None}, lambda p: _table(p, periodic=True)),
    },
    "time": {
        "constant": ({"value": None}, lambda p: (lambda t, v=float(p["value"]): v + 0.0 * np.asarray(t, dtype=float))),
        "sinusoid": ({"mean": None, "amp": 0.0, "period": 1.0}, _time_sinusoid),
        "table": ({"points": None, "values": None}, _table),
    },
    "rate": {
        "michaelis_menten": ({"vmax": 1.0, "km": 1.0}, _rate_mm),
        "linear": ({"slope": 1.0}, _rate_linear),
        "capped_linear": ({"slope": 1.0, "cap": 1.0}, _rate_capped),
        "zero": ({}, _rate_zero),
    },
    "surface": {
        "constant": ({"value": None}, _surf_constant),
        "harmonic": ({"value": None, "amp": 0.5, "phase": 0.0}, _surf_harmonic),
        "radial": ({"value": None, "amp": 1.0, "r0": 1.0}, _surf_radial),
        "axial_table": ({"points": None, "values": None}, _surf_axial_table),
        "time_table": ({"points": None, "values": None}, _surf_time_table),
    },
    "field": {
        "constant": ({"value": None}, _field_constant),
        "axial_table": ({"points": None, "values": None}, _field_axial_table),
        "time_table": ({"points": None, "values": None}, _field_time_table),
    },
    "inflow": {
        "ramp": ({"amp": 1.0, "rise": 1.0}, _inflow_ramp),
        "sin_pos": ({"amp": 1.0, "freq": 1.0}, _inflow_sin_pos),
        "pulse": ({"amp": 1.0, "width": 1.0}, _inflow_pulse),
        "zero": ({}, lambda p: (lambda t: 0.0 * np.asarray(t, dtype=float))),
        "table": ({"points": None, "values": None}, _table),
    },
}


def resolve(kind, spec):
    """Return a copy of ``spec`` with family defaults filled in."""
    try:
        families = REGISTRY[kind]
    except KeyError:
        raise InvalidParameterError(f"unknown coefficient kind {kind!r}") from None
    if spec.family not in families:
        raise InvalidParameterError(
            f"unknown {kind} family {spec.family!r}; choose from {sorted(families)}")
    defaults, _ = families[spec.family]
    unknown = set(spec.params) - set(defaults)
    if unknown:
        raise InvalidParameterError(f"{kind} family {spec.family!r} has no parameter(s) {sorted(unknown)}")
    params = {}
    for key, default in defaults.items():
        if key in spec.params:
            params[key] = spec.params[key]
        elif default is None:
            raise InvalidParameterError(f"{kind} family {spec.family!r} requires parameter {key!r}")
        else:
            params[key] = default
    return FunctionSpec(spec.family, params)


def build(kind, spec):
    spec = resolve(kind, spec)
    return REGISTRY[kind][spec.family][1](spec.params)


def family_parameters(kind, family):
    return dict(REGISTRY[kind][family][0])
