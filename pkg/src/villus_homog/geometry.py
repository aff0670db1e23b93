"""Period-cell geometry of the rescaled villous tube.

The wall of one period is the radial graph ``rho = r * (1 + psi(z, theta))``
for ``z`` in [0, 1) and ``theta`` in [0, 2*pi).  All quantities are computed
on this unit cell; the villus spacing never enters here.

Quadrature: composite trapezoid in the two periodic directions (spectrally
accurate for smooth periodic integrands, second order for merely Lipschitz
ones) and Simpson in the normalised radius ``rho_hat = rho / rho_wall``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import RegularGridInterpolator

from .errors import InvalidParameterError, InvalidProfileError, SingularGeometryError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class VillusProfile:
    base_radius_r: float
    psi: Callable
    psi_z: Callable
    psi_theta: Callable
    axisymmetric: bool = True
    name: str = "custom"

    def radius(self, z, theta=0.0):
        return self.base_radius_r * (1.0 + self.psi(z, theta))

    def radius_derivatives(self, z, theta=0.0):
        """Return ``(rho, d rho/dz, d rho/dtheta)``."""
        r = self.base_radius_r
        return (r * (1.0 + self.psi(z, theta)), r * self.psi_z(z, theta),
                r * self.psi_theta(z, theta))

    def wall_point(self, z, theta):
        z, theta = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(theta, dtype=float))
        rho = self.radius(z, theta)
        return np.stack([z, rho * np.cos(theta), rho * np.sin(theta)], axis=-1)


@dataclass(frozen=True)
class PeriodCellMeasures:
    volume: float
    lateral_area: float
    ratio_RP: float


# --- built-in profiles --------------------------------------------------------

def _zeros(z, theta):
    return np.zeros(np.broadcast(np.asarray(z), np.asarray(theta)).shape)


def flat_profile(r=1.0):
    return make_profile(r, _zeros, _zeros, _zeros, axisymmetric=True, name="flat")


def cosine_profile(r=1.0, amp=0.1):
    """``psi(z) = amp * (1 - cos 2 pi z)``: villus tips at half periods."""
    def psi(z, theta):
        return amp * (1.0 - np.cos(TWO_PI * np.asarray(z, dtype=float))) + 0.0 * np.asarray(theta)

    def psi_z(z, theta):
        return amp * TWO_PI * np.sin(TWO_PI * np.asarray(z, dtype=float)) + 0.0 * np.asarray(theta)

    return make_profile(r, psi, psi_z, _zeros, axisymmetric=True, name="cosine")


def bump_profile(r=1.0, amp=0.3, sharpness=4.0):
    """Narrow periodic villus centred at z = 1/2 (von Mises shape)."""
    k = float(sharpness)

    def psi(z, theta):
        c = np.cos(TWO_PI * (np.asarray(z, dtype=float) - 0.5))
        return amp * np.exp(k * (c - 1.0)) + 0.0 * np.asarray(theta)

    def psi_z(z, theta):
        arg = TWO_PI * (np.asarray(z, dtype=float) - 0.5)
        return -amp * k * TWO_PI * np.sin(arg) * np.exp(k * (np.cos(arg) - 1.0)) + 0.0 * np.asarray(theta)

    return make_profile(r, psi, psi_z, _zeros, axisymmetric=True, name="bump")


def cosine_theta_profile(r=1.0, amp=0.1, amp_theta=0.05, m=4):
    """Axial folds plus ``m`` longitudinal ridges around the circumference."""
    m = int(m)

    def psi(z, theta):
        z, theta = np.asarray(z, dtype=float), np.asarray(theta, dtype=float)
        return amp * (1.0 - np.cos(TWO_PI * z)) + amp_theta * (1.0 - np.cos(m * theta))

    def psi_z(z, theta):
        return amp * TWO_PI * np.sin(TWO_PI * np.asarray(z, dtype=float)) + 0.0 * np.asarray(theta)

    def psi_theta(z, theta):
        return amp_theta * m * np.sin(m * np.asarray(theta, dtype=float)) + 0.0 * np.asarray(z)

    return make_profile(r, psi, psi_z, psi_theta, axisymmetric=(amp_theta == 0), name="cosine_theta")


def tabulated_profile(r, z_nodes, theta_nodes, psi_values, fd_step=1e-6):
    """Profile from samples on a tensor grid, periodic bilinear interpolation.

    ``psi_values`` has shape ``(len(z_nodes), len(theta_nodes))``.  A node at
    z = 1 (or theta = 2 pi) is accepted only if it repeats the first one.
    Derivatives are centred differences of the interpolant.
    """
    z = np.asarray(z_nodes, dtype=float)
    th = np.asarray(theta_nodes, dtype=float)
    vals = np.atleast_2d(np.asarray(psi_values, dtype=float))
    if vals.shape != (z.size, th.size):
        raise InvalidProfileError(f"psi table shape {vals.shape} does not match grid {(z.size, th.size)}")
    if np.isclose(z[-1] - z[0], 1.0):
        if not np.allclose(vals[0], vals[-1], atol=1e-12):
            raise InvalidProfileError("non-periodic sampled profile in z")
        z, vals = z[:-1], vals[:-1]
    if th.size > 1 and np.isclose(th[-1] - th[0], TWO_PI):
        if not np.allclose(vals[:, 0], vals[:, -1], atol=1e-12):
            raise InvalidProfileError("non-periodic sampled profile in theta")
        th, vals = th[:-1], vals[:, :-1]
    if np.any(np.diff(z) <= 0) or (th.size > 1 and np.any(np.diff(th) <= 0)):
        raise InvalidProfileError("profile table nodes must be strictly increasing")

    # wrap one node on each side so interpolation is periodic
    zz = np.concatenate([[z[-1] - 1.0], z, [z[0] + 1.0]])
    vz = np.concatenate([vals[-1:], vals, vals[:1]], axis=0)
    if th.size == 1:
        axisym = True
        interp_z = lambda zq: np.interp(zq, zz, vz[:, 0])
        fn = lambda zq, tq: interp_z(np.mod(np.asarray(zq, dtype=float), 1.0)) + 0.0 * np.asarray(tq)
    else:
        axisym = False
        tt = np.concatenate([[th[-1] - TWO_PI], th, [th[0] + TWO_PI]])
        vzt = np.concatenate([vz[:, -1:], vz, vz[:, :1]], axis=1)
        rgi = RegularGridInterpolator((zz, tt), vzt)

        def fn(zq, tq):
            zq, tq = np.broadcast_arrays(np.mod(np.asarray(zq, dtype=float), 1.0),
                                         np.mod(np.asarray(tq, dtype=float), TWO_PI))
            pts = np.stack([zq.ravel(), tq.ravel()], axis=-1)
            return rgi(pts).reshape(zq.shape)

    h = fd_step

    def fz(zq, tq):
        return (fn(np.asarray(zq) + h, tq) - fn(np.asarray(zq) - h, tq)) / (2 * h)

    def ft(zq, tq):
        if axisym:
            return _zeros(zq, tq)
        return (fn(zq, np.asarray(tq) + h) - fn(zq, np.asarray(tq) - h)) / (2 * h)

    return make_profile(r, fn, fz, ft, axisymmetric=axisym, name="table")


def load_profile_csv(path, r=1.0):
    """Read a ``z,theta,psi`` table (header row required)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"z", "theta", "psi"} <= set(rows[0]):
        raise InvalidProfileError(f"{path}: expected columns z,theta,psi")
    z = np.array([float(row["z"]) for row in rows])
    th = np.array([float(row["theta"]) for row in rows])
    psi = np.array([float(row["psi"]) for row in rows])
    zu, thu = np.unique(z), np.unique(th)
    if zu.size * thu.size != len(rows):
        raise InvalidProfileError(f"{path}: samples do not form a tensor grid")
    grid = np.empty((zu.size, thu.size))
    grid[np.searchsorted(zu, z), np.searchsorted(thu, th)] = psi
    return tabulated_profile(r, zu, thu, grid)


def make_profile(r, psi, psi_z, psi_theta, axisymmetric=True, name="custom", n_check=100, seed=0):
    """Construct a profile and run the sampled periodicity / positivity checks."""
    if not r > 0:
        raise InvalidParameterError(f"base radius must be positive, got {r}")
    prof = VillusProfile(float(r), psi, psi_z, psi_theta, axisymmetric, name)
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.0, 1.0, n_check)
    th = rng.uniform(0.0, TWO_PI, n_check)
    p0 = np.asarray(psi(z, th), dtype=float)
    if np.max(np.abs(np.asarray(psi(z + 1.0, th)) - p0)) > 1e-12:
        raise InvalidProfileError("profile is not 1-periodic in z")
    if np.max(np.abs(np.asarray(psi(z, th + TWO_PI)) - p0)) > 1e-12:
        raise InvalidProfileError("profile is not 2*pi-periodic in theta")
    if np.any(prof.radius(z, th) <= 0):
        raise InvalidProfileError("wall radius must stay positive")
    return prof


PROFILE_FAMILIES = {
    "flat": ({}, lambda r, p: flat_profile(r)),
    "cosine": ({"amp": 0.1}, lambda r, p: cosine_profile(r, float(p["amp"]))),
    "bump": ({"amp": 0.3, "sharpness": 4.0}, lambda r, p: bump_profile(r, float(p["amp"]), float(p["sharpness"]))),
    "cosine_theta": ({"amp": 0.1, "amp_theta": 0.05, "m": 4},
                     lambda r, p: cosine_theta_profile(r, float(p["amp"]), float(p["amp_theta"]), int(p["m"]))),
    "table": ({"path": None}, lambda r, p: load_profile_csv(p["path"], r)),
}


def profile_from_family(family, r=1.0, **params):
    if family not in PROFILE_FAMILIES:
        raise InvalidParameterError(f"unknown profile family {family!r}")
    defaults, factory = PROFILE_FAMILIES[family]
    merged = {**defaults, **params}
    missing = [k for k, v in merged.items() if v is None]
    if missing:
        raise InvalidParameterError(f"profile family {family!r} requires {missing}")
    return factory(r, merged)


# --- cell quadrature ----------------------------------------------------------

def _periodic_grid(n_z, n_theta):
    if n_z < 8 or n_theta < 8:
        raise InvalidParameterError("n_z and n_theta must both be >= 8")
    z = np.arange(n_z) / n_z
    th = TWO_PI * np.arange(n_theta) / n_theta
    Z, TH = np.meshgrid(z, th, indexing="ij")
    return Z, TH, (1.0 / n_z) * (TWO_PI / n_theta)


def _area_density(profile, Z, TH):
    rho, rz, rt = profile.radius_derivatives(Z, TH)
    return np.sqrt(rho ** 2 * (1.0 + rz ** 2) + rt ** 2)


def cell_measures(profile, n_z=64, n_theta=64):
    Z, TH, w = _periodic_grid(n_z, n_theta)
    rho = profile.radius(Z, TH)
    volume = float(np.sum(0.5 * rho ** 2) * w)
    area = float(np.sum(_area_density(profile, Z, TH)) * w)
    return PeriodCellMeasures(volume, area, area / volume)


def surface_average(profile, f, n_z=64, n_theta=64):
    """Mean of ``f(X)`` over the villous wall of one period (area weighted).

    ``f`` receives wall points of shape ``(n_z, n_theta, 3)`` and may return
    scalars or vectors per point.
    """
    Z, TH, _ = _periodic_grid(n_z, n_theta)
    dens = _area_density(profile, Z, TH)
    vals = np.asarray(f(profile.wall_point(Z, TH)), dtype=float)
    return np.einsum("ij,ij...->...", dens, vals) / dens.sum()


def volume_average(profile, f, n_z=64, n_theta=64, n_rho=33):
    """Mean of ``f(X)`` over the cell volume.

    Points are ``(z, s*rho_w cos th, s*rho_w sin th)`` with ``s`` on ``n_rho``
    Simpson nodes in [0, 1]; the Jacobian is ``rho_w**2 * s``.
    """
    if n_rho < 3:
        raise InvalidParameterError("n_rho must be >= 3")
    Z, TH, _ = _periodic_grid(n_z, n_theta)
    s = np.linspace(0.0, 1.0, n_rho)
    rho_w = profile.radius(Z, TH)
    R = rho_w[..., None] * s
    X = np.stack([np.broadcast_to(Z[..., None], R.shape), R * np.cos(TH)[..., None],
                  R * np.sin(TH)[..., None]], axis=-1)
    vals = np.asarray(f(X), dtype=float)
    jac = rho_w[..., None] ** 2 * s
    extra = vals.ndim - 3
    jac_b = jac.reshape(jac.shape + (1,) * extra)
    integral = simpson(vals * jac_b, x=s, axis=2).sum(axis=(0, 1))
    volume = simpson(jac, x=s, axis=2).sum()
    return integral / volume


def tangents(profile, z, theta):
    """Surface tangents ``(d X/dz, d X/dtheta)`` of the wall parametrisation."""
    rho, rz, rt = profile.radius_derivatives(z, theta)
    c, s = np.cos(theta), np.sin(theta)
    t_z = np.stack(np.broadcast_arrays(np.ones_like(rho), rz * c, rz * s), axis=-1)
    t_th = np.stack(np.broadcast_arrays(np.zeros_like(rho), rt * c - rho * s, rt * s + rho * c), axis=-1)
    return t_z, t_th


def outward_normal(profile, z, theta):
    rho, rz, rt = profile.radius_derivatives(z, theta)
    if np.any(np.asarray(rho) < 1e-12):
        raise SingularGeometryError("wall radius vanishes; tangent basis is degenerate")
    c, s = np.cos(theta), np.sin(theta)
    n = np.stack(np.broadcast_arrays(-rho * rz, rho * c + rt * s, rho * s - rt * c), axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)
