"""``villus-homog <module> --config <path> [--out <dir>]``

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
On failure a machine-readable ``error.json`` is written to the output
directory (when it can be determined) and echoed to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (MODULES, build_absorption, build_inflow, build_kinetics, build_profile, build_pulse,
                     build_velocity, load_config)
from .errors import ConfigError, VillusHomogError
from .io import write_csv, write_json, write_series

ENV_OUT = "VILLUS_HOMOG_OUT"


class _Outputs:
    def __init__(self, root):
        self.root = Path(root)
        self.files = []
        self.results = {}

    def csv(self, name, header, rows):
        self.files.append(write_csv(self.root / name, header, rows).name)

    def series(self, name, x, y):
        self.files.append(write_series(self.root / "plots" / name, x, y).relative_to(self.root).as_posix())


# --- pipelines -----------------------------------------------------------------

def _ode_sim(cfg, out):
    from .ode import averaged_force, integrate_averaged, integrate_oscillatory

    model = build_pulse(cfg)
    kin, y0 = build_kinetics(cfg)
    o = cfg.sections["ode"]
    dt = o["dt"] or min(model.pulse_period_eps / 20, o["T"] / 10_000)
    traj = integrate_oscillatory(model, kin, o["v0"], y0, o["T"], dt)
    avg = integrate_averaged(model, kin, averaged_force(model, o["quadrature_nodes"]), o["v0"], y0, o["T"], dt)
    header = ["t", "x", "xdot"] + [f"y{i + 1}" for i in range(y0.size)]
    out.csv("trajectory.csv", header, traj.rows())
    out.csv("averaged_trajectory.csv", header, avg.rows())
    out.series("x_vs_t.dat", traj.times, traj.x)
    out.series("xdot_vs_t.dat", traj.times, traj.xdot)
    out.series("x_averaged_vs_t.dat", avg.times, avg.x)
    out.results.update(dt=dt, bound_violation=traj.bound_violation(model.wave_speed_c),
                       sup_x_difference=float(np.max(np.abs(traj.x - avg.x))))


def _ode_converge(cfg, out):
    from .ode import convergence_study

    model = build_pulse(cfg)
    kin, y0 = build_kinetics(cfg)
    o = cfg.sections["ode"]
    tab = convergence_study(model, kin, o["v0"], y0, o["T"], o["eps_list"], o["quadrature_nodes"], o["dt"])
    rows = []
    for i, row in enumerate(tab.rows()):
        mono = i == 0 or (tab.err_x[i] < tab.err_x[i - 1] and tab.err_xdot[i] < tab.err_xdot[i - 1])
        rows.append((*row, mono))
    out.csv("convergence.csv", ["eps", "err_x", "err_xdot", "order_x", "order_xdot", "monotone"], rows)
    out.series("err_x_vs_eps.dat", tab.eps, tab.err_x)
    out.series("err_xdot_vs_eps.dat", tab.eps, tab.err_xdot)
    out.results.update(dt=tab.dt, monotone=tab.monotone, flags=tab.flags)


def _geometry(cfg, out):
    from .geometry import cell_measures

    prof = build_profile(cfg)
    n = cfg.sections["profile"]["quad_n"]
    m = cell_measures(prof, n, n)
    out.csv("measures.csv", ["quantity", "value"],
            [("volume", m.volume), ("lateral_area", m.lateral_area), ("ratio_RP", m.ratio_RP)])
    z = np.linspace(0.0, 1.0, 201)
    out.series("radius_vs_z.dat", z, prof.radius(z))
    out.results.update(volume=m.volume, lateral_area=m.lateral_area, ratio_RP=m.ratio_RP)


def _coefficients(cfg, prof=None):
    from .homogenize import homogenized_coefficients

    prof = prof or build_profile(cfg)
    vel = build_velocity(cfg, prof)
    ab = build_absorption(cfg)
    g = cfg.sections.get("grids", {})
    n = cfg.sections["profile"]["quad_n"]
    xs = g.get("coeff_x1_samples", (0.0,))
    ts = g.get("coeff_t_samples", (0.0,))
    return prof, vel, ab, homogenized_coefficients(prof, vel, ab, xs, ts, n, n)


def _homogenize(cfg, out):
    _, _, _, co = _coefficients(cfg)
    out.csv("coefficients.csv", ["x1", "t", "cbar", "etap", "etaa", "rhobar"], co.rows())
    out.series("cbar_vs_x1.dat", co.x1_samples, co.cbar_table[:, 0, 0])
    out.results.update(ratio_RP=co.ratio_RP, **{k: float(v) for k, v in co.diagnostics.items()})


def _cell_solve(cfg, out):
    from .cell import solve_cell_problem
    from .homogenize import CellProblemData, check_solvability, lambda_from_compatibility

    prof, vel, ab, co = _coefficients(cfg)
    c = cfg.sections["cell"]
    delta = c["delta"]
    if delta is None:
        delta = float(np.asarray(ab.zeta(c["x1"], c["t"])) * ab.phi(c["nu"]))
    data = CellProblemData(c["p"], c["mu"], c["nu"], delta, c["x1"], c["t"])
    field, lam_d = solve_cell_problem(prof, vel, ab, data, c["n_z"], c["n_rho"], c["kernel"])
    lam = lambda_from_compatibility(data, co, ab)
    tol = cfg.sections.get("tolerances", {}).get("solvability", 5e-3)
    ok, res = check_solvability(CellProblemData(data.p, data.mu, data.nu, delta, data.x1, data.t, lam_d),
                                co, ab, tol * max(1.0, abs(lam)))
    out.csv("corrector.csv", ["z", "rho_hat", "u1"], field.rows())
    out.csv("cell_summary.csv", ["quantity", "value"],
            [("lambda_discrete", lam_d), ("lambda_compatibility", lam), ("abs_difference", res),
             ("solvable", ok), ("residual", field.residual), ("delta", delta)])
    out.series("u1_wall_vs_z.dat", field.z, field.values[:, -1])
    out.results.update(lambda_discrete=lam_d, lambda_compatibility=lam, solvable=bool(ok),
                       residual=field.residual)
    if not ok:
        raise _NumericFailure(f"discrete and compatibility lambda differ by {res:.3e}")


def _macro_solve(cfg, out):
    from .macro import AxialGrid, solve_macro

    _, _, ab, co = _coefficients(cfg)
    g = cfg.sections["grids"]
    grid = AxialGrid(g["L"], g["macro_cells"], g["T"], g["cfl"])
    res = solve_macro(grid, co, ab, build_inflow(cfg), n_snapshots=g["n_snapshots"])
    out.csv("snapshots.csv", ["t", "x1", "u", "v"], res.snapshot_rows())
    res.budget.to_csv(out.root / "budget.csv")
    out.files.append("budget.csv")
    out.series("u_final_vs_x1.dat", grid.centers, res.u[-1])
    out.series("v_final_vs_x1.dat", grid.centers, res.v[-1])
    out.results.update(dt=res.dt, max_budget_residual=float(np.max(res.budget.relative_residual)),
                       v_max=float(np.max(res.v_max_history)), u_min=float(np.min(res.u_min_history)))


def _scenario(cfg):
    from .micro import MicroScenario

    prof, vel, ab, _ = _coefficients(cfg)
    g = cfg.sections["grids"]
    return MicroScenario(prof, vel, ab, build_inflow(cfg), g["L"], g["T"], g["micro_n_z"], g["micro_n_rho"],
                         g["reference_cells"], g["n_snapshots"], tuple(g["coeff_x1_samples"]),
                         tuple(g["coeff_t_samples"]))


def _micro_verify(cfg, out):
    from .micro import MicroGrid, solve_micro

    sc = _scenario(cfg)
    g = cfg.sections["grids"]
    grid = MicroGrid(g["micro_eps"], sc.L, sc.profile, sc.n_z_per_period, sc.n_rho)
    res = solve_micro(grid, sc.velocity, sc.absorption, sc.inflow, sc.T, sc.n_snapshots)
    out.csv("micro_snapshots.csv", ["t", "x1", "rho_hat", "u", "v"], res.snapshot_rows())
    ub, vb = res.averages()
    x = grid.x_centers
    out.csv("averages.csv", ["t", "x1", "ubar", "vbar"],
            ((t, x[i], ub[k, i], vb[k, i]) for k, t in enumerate(res.times) for i in range(x.size)))
    out.series("ubar_final_vs_x1.dat", x, ub[-1])
    out.series("vbar_final_vs_x1.dat", x, vb[-1])
    out.results.update(dt=res.dt, v_max=float(np.max(res.v_max_history)),
                       u_min=float(np.min(res.u_min_history)))


def _compare(cfg, out):
    from .micro import compare_micro_macro

    sc = _scenario(cfg)
    tab = compare_micro_macro(cfg.sections["grids"]["micro_eps_list"], sc)
    out.csv("comparison.csv", ["eps", "err_u", "err_v"], tab.rows())
    out.series("err_u_vs_eps.dat", tab.eps, tab.err_u)
    out.series("err_v_vs_eps.dat", tab.eps, tab.err_v)
    out.results.update(monotone=tab.monotone, flags=tab.flags)


PIPELINES = {
    "ode-sim": _ode_sim,
    "ode-converge": _ode_converge,
    "geometry": _geometry,
    "homogenize": _homogenize,
    "cell-solve": _cell_solve,
    "macro-solve": _macro_solve,
    "micro-verify": _micro_verify,
    "compare": _compare,
}


class _NumericFailure(VillusHomogError):
    pass


def resolve_out_dir(cfg_out=None, cli_out=None):
    return Path(cli_out or os.environ.get(ENV_OUT) or cfg_out or "results")


def run_experiment(cfg, out_dir=None):
    """Run the configured pipeline; returns ``(exit_status, manifest)``.

    Numerical failures are recorded in ``error.json`` and give status 1.
    """
    root = Path(out_dir) if out_dir is not None else resolve_out_dir(cfg.out)
    out = _Outputs(root)
    root.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    status, error = 0, None
    try:
        PIPELINES[cfg.module](cfg, out)
    except VillusHomogError as exc:
        status = 1
        error = {"type": type(exc).__name__, "message": str(exc), "exit_status": 1}
        if getattr(exc, "residual", None) is not None:
            error["residual"] = exc.residual
        if getattr(exc, "assumption", None):
            error["assumption"] = exc.assumption
    manifest = {
        "tool": "villus-homog",
        "version": __version__,
        "module": cfg.module,
        "scenario": cfg.scenario,
        "parameters": cfg.resolved(),
        "results": out.results,
        "files": sorted(out.files),
        "wall_time_s": time.perf_counter() - start,
        "status": status,
    }
    if error:
        manifest["error"] = error
        write_json(root / "error.json", error)
    write_json(root / "manifest.json", manifest)
    return status, manifest


def _usage_error(message, out_dir, problems=None):
    record = {"type": "UsageError", "message": message, "exit_status": 2}
    if problems:
        record["problems"] = [{"line": ln, "message": msg} for ln, msg in problems]
    print(json.dumps(record, indent=2, sort_keys=True), file=sys.stderr)
    if out_dir is not None:
        try:
            write_json(Path(out_dir) / "error.json", record)
        except OSError:
            pass
    return 2


def main(argv=None):
    parser = argparse.ArgumentParser(prog="villus-homog", description=__doc__.splitlines()[0])
    parser.add_argument("module", help=" | ".join(MODULES))
    parser.add_argument("--config", required=True, help="sectioned key = value config file")
    parser.add_argument("--out", default=None, help=f"output directory (overrides ${ENV_OUT})")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out_guess = args.out or os.environ.get(ENV_OUT)
    if args.module not in MODULES:
        return _usage_error(f"unknown module {args.module!r}; choose from {', '.join(MODULES)}",
                            out_guess or "results")
    try:
        cfg = load_config(args.config, module=args.module)
    except ConfigError as exc:
        return _usage_error(str(exc), out_guess, exc.problems)
    except OSError as exc:
        return _usage_error(f"cannot read config: {exc}", out_guess)
    out_dir = resolve_out_dir(cfg.out, args.out)
    status, manifest = run_experiment(cfg, out_dir)
    if status:
        print(json.dumps(manifest["error"], indent=2, sort_keys=True), file=sys.stderr)
    else:
        print(f"{cfg.module}: wrote {len(manifest['files'])} files to {out_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
