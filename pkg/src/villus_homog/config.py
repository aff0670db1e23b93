"""Sectioned ``key = value`` experiment configs.

Format::

    # comment
    [section]
    key = value
    family_key = family_name
    family_key.param = value

Lists are comma separated.  Every problem found is reported together, each
with its line number.  :func:`emit_config` writes the fully resolved config
(defaults included) so ``parse_config(emit_config(cfg)) == cfg``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import families
from .errors import ConfigError, VillusHomogError
from .families import FunctionSpec
from .geometry import PROFILE_FAMILIES
from .io import fmt
from .models import VELOCITY_FAMILIES

MODULES = ("ode-sim", "ode-converge", "geometry", "homogenize", "cell-solve", "macro-solve",
           "micro-verify", "compare")

_PDE = ("profile", "velocity", "absorption", "inflow", "grids")
REQUIRED_SECTIONS = {
    "ode-sim": ("pulse", "ode"),
    "ode-converge": ("pulse", "ode"),
    "geometry": ("profile",),
    "homogenize": ("profile", "velocity", "absorption"),
    "cell-solve": ("profile", "velocity", "absorption", "cell"),
    "macro-solve": _PDE,
    "micro-verify": _PDE,
    "compare": _PDE,
}
# consumed when present, filled with defaults otherwise (so manifests list them)
OPTIONAL_SECTIONS = {
    "ode-sim": ("kinetics",),
    "ode-converge": ("kinetics",),
    "homogenize": ("grids",),
    "cell-solve": ("grids", "tolerances"),
}


def F(family, **params):
    return FunctionSpec(family, params)


# section -> key -> (type, default).  Types: float, int, str, floats (tuple),
# "opt_float" (may be absent), or ("family", kind).
SCHEMA = {
    "run": {
        "scenario": ("str", "default"),
        "module": ("str", ""),
        "out": ("str", "results"),
    },
    "pulse": {
        "c": ("float", 1.0),
        "eps": ("float", 0.01),
        "shape": (("family", "shape"), F("sin2", amp=1.0)),
        "friction": (("family", "time"), F("constant", value=1.0)),
        "c0": ("float", 1.0),
        "c1": ("float", 1.0),
        "a": ("float", 1.0),
        "b": ("float", 0.1),
    },
    "kinetics": {
        "rates": ("floats", (0.1,)),
        "y0": ("floats", (1.0,)),
    },
    "ode": {
        "v0": ("float", 0.3),
        "T": ("float", 5.0),
        "dt": ("opt_float", None),
        "eps_list": ("floats", (0.1, 0.05, 0.025, 0.0125)),
        "quadrature_nodes": ("int", 257),
    },
    "profile": {
        "r": ("float", 1.0),
        "shape": (("family", "profile"), F("cosine", amp=0.1)),
        "quad_n": ("int", 64),
    },
    "velocity": {
        "field": (("family", "velocity"), F("plug", speed=1.0, modulation=0.0, mod_period=1.0)),
    },
    "absorption": {
        "eta_p": (("family", "surface"), F("radial", value=0.5, amp=1.0, r0=1.0)),
        "eta_a": (("family", "surface"), F("constant", value=0.3)),
        "g_a": (("family", "rate"), F("michaelis_menten", vmax=1.0, km=1.0)),
        "rho_surf": (("family", "surface"), F("constant", value=0.5)),
        "zeta": (("family", "field"), F("constant", value=0.5)),
        "phi": (("family", "rate"), F("linear", slope=1.0)),
        "alpha": ("float", 0.8),
        "omega": ("float", 1.0),
        "chi": ("float", 1.0),
        "eta_lower_bound": ("float", 0.1),
    },
    "grids": {
        "L": ("float", 1.0),
        "T": ("float", 1.0),
        "macro_cells": ("int", 400),
        "cfl": ("float", 0.9),
        "n_snapshots": ("int", 10),
        "micro_eps": ("float", 0.125),
        "micro_eps_list": ("floats", (0.25, 0.125, 0.0625)),
        "micro_n_z": ("int", 16),
        "micro_n_rho": ("int", 8),
        "reference_cells": ("int", 1600),
        "coeff_x1_samples": ("floats", (0.0,)),
        "coeff_t_samples": ("floats", (0.0,)),
    },
    "inflow": {
        "u0": (("family", "inflow"), F("zero")),
        "v0": (("family", "inflow"), F("ramp", amp=1.0, rise=0.5)),
    },
    "cell": {
        "p": ("float", 0.3),
        "mu": ("float", 0.7),
        "nu": ("float", 0.4),
        "delta": ("opt_float", None),
        "x1": ("float", 0.0),
        "t": ("float", 0.0),
        "n_z": ("int", 64),
        "n_rho": ("int", 64),
        "kernel": ("str", "bordered"),
    },
    "tolerances": {
        "solvability": ("float", 5e-3),
    },
}


@dataclass
class ExperimentConfig:
    scenario: str
    module: str
    out: str
    sections: dict                 # section -> key -> resolved value
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def get(self, section, key):
        return self.sections[section][key]

    def has(self, section):
        return section in self.sections

    def section(self, name):
        return SimpleNamespace(**self.sections[name])

    def resolved(self):
        """Plain nested dict of every parameter (families expanded), for manifests."""
        out = {}
        for sec, keys in self.sections.items():
            out[sec] = {}
            for k, v in keys.items():
                if isinstance(v, FunctionSpec):
                    out[sec][k] = {"family": v.family, **{p: _plain(x) for p, x in v.params.items()}}
                else:
                    out[sec][k] = _plain(v)
        return out


def _plain(v):
    if isinstance(v, tuple):
        return list(v)
    return v


# --- family parameter handling -------------------------------------------------

def _family_defaults(kind, family):
    if kind == "profile":
        reg = {k: d for k, (d, _) in PROFILE_FAMILIES.items()}
    elif kind == "velocity":
        reg = VELOCITY_FAMILIES
    else:
        reg = {k: d for k, (d, _) in families.REGISTRY[kind].items()}
    if family not in reg:
        raise ValueError(f"unknown {kind} family {family!r}; choose from {sorted(reg)}")
    return dict(reg[family])


def _resolve_family(kind, spec):
    defaults = _family_defaults(kind, spec.family)
    unknown = set(spec.params) - set(defaults)
    if unknown:
        raise ValueError(f"{kind} family {spec.family!r} has no parameter(s) {sorted(unknown)}")
    params = {}
    for k, d in defaults.items():
        if k in spec.params:
            params[k] = spec.params[k]
        elif d is None:
            raise ValueError(f"{kind} family {spec.family!r} requires parameter {k!r}")
        else:
            params[k] = float(d) if isinstance(d, (int, float)) else d
    return FunctionSpec(spec.family, params)


def _parse_scalar_or_list(text):
    parts = [p.strip() for p in text.split(",")]
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        if len(parts) > 1:
            raise ValueError(f"cannot read {text!r} as a list of numbers") from None
        return text
    return vals if len(vals) > 1 else vals[0]


def _convert(kind, text):
    if kind == "float" or kind == "opt_float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    if kind == "int":
        v = float(text)
        if v != int(v):
            raise ValueError("must be an integer")
        return int(v)
    if kind == "floats":
        vals = tuple(float(p) for p in text.split(","))
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("entries must be finite")
        return vals
    return text


# --- parsing ---------------------------------------------------------------------

def _tokenize(text, problems):
    """Yield ``(section, key, value, line)`` and the header line of each section."""
    entries, headers = [], {}
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                problems.append((ln, f"unknown section [{section}]"))
            elif section in headers:
                problems.append((ln, f"duplicate section [{section}]"))
            headers.setdefault(section, ln)
            continue
        if "=" not in line:
            problems.append((ln, f"expected 'key = value', got {line!r}"))
            continue
        if section is None:
            problems.append((ln, "key outside of any section"))
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        entries.append((section, key, value, ln))
    return entries, headers


def parse_config(text, module=None):
    """Parse and validate; raise :class:`ConfigError` listing every problem.

    ``module`` (e.g. from the command line) takes precedence over ``[run] module``.
    """
    problems = []
    entries, headers = _tokenize(text, problems)
    raw = {}
    lines = {sec: {"__section__": ln} for sec, ln in headers.items() if sec in SCHEMA}
    fam_params = {}
    for sec, key, value, ln in entries:
        if sec not in SCHEMA:
            continue
        base, _, param = key.partition(".")
        spec = SCHEMA[sec].get(base)
        if spec is None:
            problems.append((ln, f"unknown key {key!r} in [{sec}]"))
            continue
        kind = spec[0]
        if param:
            if not isinstance(kind, tuple):
                problems.append((ln, f"{base!r} takes no parameters"))
                continue
            try:
                fam_params.setdefault((sec, base), {})[param] = _parse_scalar_or_list(value)
            except ValueError as exc:
                problems.append((ln, f"{sec}.{key}: {exc}"))
            lines[sec].setdefault(key, ln)
            continue
        if (sec, key) in raw:
            problems.append((ln, f"duplicate key {key!r} in [{sec}]"))
            continue
        lines[sec][key] = ln
        if isinstance(kind, tuple):
            raw[(sec, key)] = value
            continue
        try:
            raw[(sec, key)] = _convert(kind, value)
        except ValueError as exc:
            problems.append((ln, f"{sec}.{key}: cannot read {value!r} ({exc})"))

    run_module = module or raw.get(("run", "module")) or ""
    if run_module not in MODULES:
        ln = lines.get("run", {}).get("module", 0)
        problems.append((ln, f"unknown module {run_module!r}; choose from {', '.join(MODULES)}"))
    n_lines = len(text.splitlines())
    for sec in REQUIRED_SECTIONS.get(run_module, ()):
        if sec not in headers:
            problems.append((n_lines, f"missing section [{sec}] required by module {run_module}"))

    sections = {}
    wanted = set(headers) | set(REQUIRED_SECTIONS.get(run_module, ())) | set(OPTIONAL_SECTIONS.get(run_module, ()))
    for sec, keys in SCHEMA.items():
        if sec not in wanted:
            continue
        lines.setdefault(sec, {"__section__": 0})
        sections[sec] = {}
        for key, (kind, default) in keys.items():
            ln = lines[sec].get(key, lines[sec]["__section__"])
            if isinstance(kind, tuple):
                given = (sec, key) in raw
                params = fam_params.get((sec, key), {})
                if given:
                    spec = FunctionSpec(raw[(sec, key)], params)
                elif params:
                    spec = FunctionSpec(default.family, params)
                else:
                    spec = default
                try:
                    sections[sec][key] = _resolve_family(kind[1], spec)
                except (ValueError, KeyError) as exc:
                    problems.append((ln, f"{sec}.{key}: {exc}"))
                    sections[sec][key] = default     # keeps later checks running
            else:
                sections[sec][key] = raw.get((sec, key), default)
        if sec == "run":
            sections[sec]["module"] = run_module
    if "run" not in sections:
        sections["run"] = {"scenario": "default", "module": run_module, "out": "results"}

    cfg = ExperimentConfig(sections["run"]["scenario"], run_module, sections["run"]["out"], sections, lines)
    problems.extend(check_values(cfg))
    if not problems:
        problems.extend(check_build(cfg))
    if problems:
        raise ConfigError(sorted(problems, key=lambda p: p[0]))
    return cfg


def load_config(path, module=None):
    with open(path) as fh:
        return parse_config(fh.read(), module)


# --- validation ----------------------------------------------------------------------

def _line(cfg, sec, key=None):
    d = cfg.lines.get(sec, {})
    return d.get(key, d.get("__section__", 0))


def validate(cfg):
    """All problems of an already parsed config, as ``(line, message)`` pairs."""
    problems = check_values(cfg)
    return problems or check_build(cfg)


def check_values(cfg):
    """Type invariants of the target modules, key by key."""
    problems = []

    def line(sec, key=None):
        return _line(cfg, sec, key)

    def need(cond, sec, key, msg):
        if not cond:
            problems.append((line(sec, key), f"{sec}.{key}: {msg}"))

    s = cfg.sections
    if "pulse" in s:
        p = s["pulse"]
        need(p["c"] > 0, "pulse", "c", "wave speed must be positive")
        need(0 < p["eps"] < 1, "pulse", "eps", "pulse period must lie in (0, 1)")
        need(p["a"] > 0, "pulse", "a", "must be positive")
        for k in ("c0", "c1", "b"):
            need(p[k] >= 0, "pulse", k, "must be nonnegative")
    if "ode" in s:
        o = s["ode"]
        c = s.get("pulse", {}).get("c", 1.0)
        need(0 <= o["v0"] < c, "ode", "v0",
             f"initial velocity must satisfy 0 <= v0 < c = {fmt(c)} (bounded-velocity precondition "
             "of the averaging result)")
        need(o["T"] > 0, "ode", "T", "must be positive")
        need(o["dt"] is None or o["dt"] > 0, "ode", "dt", "must be positive")
        el = o["eps_list"]
        need(len(el) >= 3 and all(0 < e < 1 for e in el) and all(b < a for a, b in zip(el, el[1:])),
             "ode", "eps_list", "need >= 3 strictly decreasing values in (0, 1)")
        need(o["quadrature_nodes"] >= 3 and o["quadrature_nodes"] % 2 == 1, "ode", "quadrature_nodes",
             "must be odd and >= 3")
    if "kinetics" in s:
        k = s["kinetics"]
        need(len(k["rates"]) == len(k["y0"]), "kinetics", "y0", "needs one entry per rate")
        need(all(r >= 0 for r in k["rates"]), "kinetics", "rates", "decay rates must be nonnegative")
    if "profile" in s:
        need(s["profile"]["r"] > 0, "profile", "r", "must be positive")
        need(s["profile"]["quad_n"] >= 8, "profile", "quad_n", "must be >= 8")
    if "absorption" in s:
        a = s["absorption"]
        need(0 < a["alpha"] <= 1, "absorption", "alpha", "must lie in (0, 1]")
        need(a["chi"] > 0, "absorption", "chi", "must be positive")
        need(0 < a["omega"] <= a["chi"], "absorption", "omega", "must lie in (0, chi]")
        need(a["eta_lower_bound"] > 0, "absorption", "eta_lower_bound", "must be positive")
    if "grids" in s:
        g = s["grids"]
        need(g["L"] > 0, "grids", "L", "must be positive")
        need(g["T"] > 0, "grids", "T", "must be positive")
        need(g["macro_cells"] >= 2, "grids", "macro_cells", "must be >= 2")
        need(g["reference_cells"] >= 2, "grids", "reference_cells", "must be >= 2")
        need(0 < g["cfl"] < 1, "grids", "cfl", "must lie in (0, 1)")
        need(g["n_snapshots"] >= 1, "grids", "n_snapshots", "must be >= 1")
        need(g["micro_n_z"] >= 16, "grids", "micro_n_z", "must be >= 16")
        need(g["micro_n_rho"] >= 2, "grids", "micro_n_rho", "must be >= 2")
        for key, vals in (("micro_eps", (g["micro_eps"],)), ("micro_eps_list", g["micro_eps_list"])):
            ok = all(e > 0 and abs(g["L"] / e - round(g["L"] / e)) <= 1e-9 * max(1.0, g["L"] / e)
                     for e in vals)
            need(ok, "grids", key, "L/eps must be a whole number of periods")
        need(len(g["micro_eps_list"]) >= 3, "grids", "micro_eps_list", "needs >= 3 entries")
        for key in ("coeff_x1_samples", "coeff_t_samples"):
            need(all(b > a for a, b in zip(g[key], g[key][1:])), "grids", key, "must be increasing")
    if "cell" in s:
        c = s["cell"]
        need(c["n_z"] >= 16 and c["n_rho"] >= 16, "cell", "n_z", "cell grid sizes must be >= 16")
        need(c["kernel"] in ("bordered", "pin"), "cell", "kernel", "must be 'bordered' or 'pin'")
    if "tolerances" in s:
        need(s["tolerances"]["solvability"] > 0, "tolerances", "solvability", "must be positive")
    if "inflow" in s:
        for key in ("u0", "v0"):
            try:
                f = families.build("inflow", s["inflow"][key])
                need(abs(float(f(0.0))) <= 1e-14, "inflow", key,
                     "inflow must vanish at t = 0 (the intestine starts empty)")
            except VillusHomogError as exc:
                problems.append((line("inflow", key), f"inflow.{key}: {exc}"))
    return problems


def check_build(cfg):
    """Trial build of every model: catches invariants enforced by the constructors."""
    problems = []
    s = cfg.sections

    def line(sec, key=None):
        return _line(cfg, sec, key)

    for sec, builder in (("pulse", build_pulse), ("kinetics", build_kinetics), ("profile", build_profile),
                         ("absorption", build_absorption)):
        if sec in s:
            try:
                builder(cfg)
            except (VillusHomogError, ValueError, OSError) as exc:
                problems.append((line(sec), f"[{sec}]: {exc}"))
    if not problems and "velocity" in s and "profile" in s:
        try:
            build_velocity(cfg)
        except (VillusHomogError, ValueError) as exc:
            problems.append((line("velocity"), f"[velocity]: {exc}"))
    return problems


# --- builders ----------------------------------------------------------------------------

def build_pulse(cfg):
    from .models import PulseModel

    p = cfg.sections["pulse"]
    shape = families.build("shape", p["shape"])
    friction = families.build("time", p["friction"])
    return PulseModel(p["c"], p["eps"], pulse_shape_w=shape, friction_k=friction,
                      amplitude_params=(p["c0"], p["c1"], p["a"], p["b"]))


def build_kinetics(cfg):
    from .models import linear_decay_kinetics

    k = cfg.sections.get("kinetics", {"rates": SCHEMA["kinetics"]["rates"][1],
                                      "y0": SCHEMA["kinetics"]["y0"][1]})
    return linear_decay_kinetics(list(k["rates"])), np.array(k["y0"], dtype=float)


def build_profile(cfg):
    from .geometry import profile_from_family

    p = cfg.sections["profile"]
    spec = p["shape"]
    return profile_from_family(spec.family, p["r"], **dict(spec.params))


def build_velocity(cfg, profile=None):
    from .models import velocity_from_family

    profile = profile or build_profile(cfg)
    spec = cfg.sections["velocity"]["field"]
    return velocity_from_family(spec.family, profile, **dict(spec.params))


def build_absorption(cfg):
    from .models import absorption_from_specs

    a = cfg.sections["absorption"]
    return absorption_from_specs(eta_p=a["eta_p"], eta_a=a["eta_a"], g_a=a["g_a"], rho_surf=a["rho_surf"],
                                 zeta=a["zeta"], phi=a["phi"], alpha=a["alpha"], omega=a["omega"],
                                 chi=a["chi"], eta_lower_bound=a["eta_lower_bound"])


def build_inflow(cfg):
    from .macro import InflowSignals

    s = cfg.sections["inflow"]
    return InflowSignals(families.build("inflow", s["u0"]), families.build("inflow", s["v0"]))


# --- emission ----------------------------------------------------------------------------

def _emit_value(v):
    # shortest repr that reads back to the same float
    if isinstance(v, tuple):
        return ", ".join(_emit_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(cfg):
    """Fully resolved text form; families are written with all their parameters."""
    out = []
    for sec in SCHEMA:
        if sec not in cfg.sections:
            continue
        out.append(f"[{sec}]")
        for key, value in cfg.sections[sec].items():
            if value is None:
                continue
            if isinstance(value, FunctionSpec):
                out.append(f"{key} = {value.family}")
                for p, x in value.params.items():
                    out.append(f"{key}.{p} = {_emit_value(x)}")
            else:
                out.append(f"{key} = {_emit_value(value)}")
        out.append("")
    return "\n".join(out)
