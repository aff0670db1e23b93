"""Axisymmetric cell-problem solver.

Solves, on one period of a theta-independent villous cell,

    -chi Lap(u1) + c . (p e1 + D u1) = lambda + delta      in the cell
    (p e1 + D u1) . N = -Theta / chi                        on the wall

periodic in z, with the regularity condition on the axis.

Discretisation: cell-centred finite volumes on the mapped rectangle
``(z, s) in [0, 1]^2`` with ``rho = s * G(z)``.  The wall ``G`` is the
polygon through ``R(z_i)`` at the axial faces, so cell volumes and wall areas
are exact frustum measures.  Diffusive fluxes carry the full metric of the
mapping (including the cross terms), advective fluxes are first-order upwind
and come from a discrete stream function, which makes the discrete velocity
exactly divergence free with zero flux through the wall.  All internal
fluxes telescope, so the discrete operator has constants as kernel and the
all-ones vector as left kernel; the compatible ``lambda`` follows from
summing the right-hand side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .errors import InvalidParameterError, SolverFailureError, UnsupportedGeometryError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class CellGrid:
    n_z: int
    n_s: int
    z_faces: np.ndarray      # (n_z + 1,)
    s_faces: np.ndarray      # (n_s + 1,)
    G_faces: np.ndarray      # wall radius at z_faces
    slope: np.ndarray        # dG/dz per axial cell
    volume: np.ndarray       # (n_z, n_s)
    wall_area: np.ndarray    # (n_z,)
    wall_n1: np.ndarray      # integral of N . e1 over each wall panel

    @property
    def hz(self):
        return 1.0 / self.n_z

    @property
    def hs(self):
        return 1.0 / self.n_s

    @property
    def z_centers(self):
        return 0.5 * (self.z_faces[1:] + self.z_faces[:-1])

    @property
    def s_centers(self):
        return 0.5 * (self.s_faces[1:] + self.s_faces[:-1])

    def index(self, i, j):
        return (np.mod(i, self.n_z)) * self.n_s + j


def cell_grid(profile, n_z, n_s):
    if not profile.axisymmetric:
        raise UnsupportedGeometryError("the cell solver needs a theta-independent profile")
    if n_z < 16 or n_s < 16:
        raise InvalidParameterError("cell grid sizes must be >= 16")
    zf = np.arange(n_z + 1) / n_z
    sf = np.arange(n_s + 1) / n_s
    G = np.asarray(profile.radius(zf), dtype=float)
    G0, G1 = G[:-1], G[1:]
    hz = 1.0 / n_z
    slope = (G1 - G0) / hz
    int_G2 = hz * (G0 ** 2 + G0 * G1 + G1 ** 2) / 3.0
    volume = np.pi * np.diff(sf ** 2)[None, :] * int_G2[:, None]
    wall_area = np.pi * (G0 + G1) * np.sqrt(hz ** 2 + (G1 - G0) ** 2)
    wall_n1 = -np.pi * (G1 ** 2 - G0 ** 2)
    return CellGrid(n_z, n_s, zf, sf, G, slope, volume, wall_area, wall_n1)


def stream_nodes(grid, velocity, profile, x1=0.0, t=0.0, n_gauss=6):
    """Stokes stream function at the grid nodes, normalised so the axis is 0
    and the wall carries one constant value (no flux through the wall)."""
    Zf, Sf = np.meshgrid(grid.z_faces, grid.s_faces, indexing="ij")
    if velocity.stream_fn is not None:
        psi = np.asarray(velocity.stream_fn(x1, Zf, Sf, t), dtype=float) * np.ones_like(Zf)
    else:
        # integrate c_z rho drho along each axial face line
        xg, wg = np.polynomial.legendre.leggauss(n_gauss)
        psi = np.zeros_like(Zf)
        for i, z in enumerate(grid.z_faces):
            G = grid.G_faces[i]
            acc = 0.0
            for j in range(grid.n_s):
                a, b = grid.s_faces[j] * G, grid.s_faces[j + 1] * G
                rho = 0.5 * (b - a) * xg + 0.5 * (b + a)
                X = np.stack([np.full_like(rho, z), rho, np.zeros_like(rho)], axis=-1)
                cz = np.asarray(velocity.c_fn(x1, X, t))[..., 0]
                acc += 0.5 * (b - a) * np.sum(wg * cz * rho)
                psi[i, j + 1] = acc
    psi = psi - psi[:, :1]
    psi[:, -1] = np.mean(psi[:-1, -1])
    return psi


def _advective_fluxes(grid, psi):
    """Volume fluxes: axial through face (i, ring j), radial through (cell i, s-face j)."""
    Fz = TWO_PI * (psi[:, 1:] - psi[:, :-1])            # (n_z + 1, n_s)
    Fs = TWO_PI * (psi[:-1, :] - psi[1:, :])            # (n_z, n_s + 1)
    return Fz, Fs


def _d_s_centered(grid):
    """Sparse operator for the cell-wise s-derivative (symmetric at the axis,
    one-sided next to the wall)."""
    n_z, n_s, hs = grid.n_z, grid.n_s, grid.hs
    rows, cols, vals = [], [], []
    for j in range(n_s):
        i = np.arange(n_z)
        k = grid.index(i, j)
        if j == 0:
            pairs = ((1, 1.0 / (2 * hs)), (0, -1.0 / (2 * hs)))
        elif j == n_s - 1:
            pairs = ((j, 1.0 / hs), (j - 1, -1.0 / hs))
        else:
            pairs = ((j + 1, 1.0 / (2 * hs)), (j - 1, -1.0 / (2 * hs)))
        for jj, w in pairs:
            rows.append(k)
            cols.append(grid.index(i, jj))
            vals.append(np.full(n_z, w))
    N = n_z * n_s
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))


def assemble_operator(grid, chi, psi=None, cross_terms=True):
    """Integrated finite-volume operator ``u -> sum of outgoing fluxes``."""
    n_z, n_s, hz, hs = grid.n_z, grid.n_s, grid.hz, grid.hs
    N = n_z * n_s
    rows, cols, vals = [], [], []

    def add(r, c, v):
        r, c, v = np.broadcast_arrays(np.asarray(r), np.asarray(c), np.asarray(v, dtype=float))
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(v.ravel())

    def add_flux(k_from, k_to, coeff_cols, coeff_vals):
        # flux leaves k_from and enters k_to
        for c, v in zip(coeff_cols, coeff_vals):
            add(k_from, c, v)
            add(k_to, c, -np.asarray(v))

    I = np.arange(n_z)
    Gbar = 0.5 * (grid.G_faces[:-1] + grid.G_faces[1:])

    # radial interior faces between ring j and j+1 inside axial cell i
    for j in range(n_s - 1):
        s = grid.s_faces[j + 1]
        kj, kj1 = grid.index(I, j), grid.index(I, j + 1)
        T = chi * TWO_PI * s * (1.0 + s ** 2 * grid.slope ** 2) * hz / hs
        coeff_cols, coeff_vals = [kj, kj1], [T, -T]
        if cross_terms:
            X = chi * TWO_PI * s ** 2 * grid.slope * Gbar * hz / (4.0 * hz)
            for jj in (j, j + 1):
                coeff_cols += [grid.index(I + 1, jj), grid.index(I - 1, jj)]
                coeff_vals += [X, -X]
        add_flux(kj, kj1, coeff_cols, coeff_vals)

    # axial faces between cell i and i+1 (periodic), ring j
    slope_face = 0.5 * (grid.slope + np.roll(grid.slope, -1))
    Gf = grid.G_faces[1:]
    for j in range(n_s):
        s0, s1 = grid.s_faces[j], grid.s_faces[j + 1]
        ki, ki1 = grid.index(I, j), grid.index(I + 1, j)
        T = chi * np.pi * Gf ** 2 * (s1 ** 2 - s0 ** 2) / hz
        add_flux(ki, ki1, [ki, ki1], [T, -T])
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))

    if cross_terms:
        # axial-face cross term: +chi * 2 pi G G' (s1^3 - s0^3)/3 * mean(D_s u) over the two cells
        Ds = _d_s_centered(grid)
        ring = np.diff(grid.s_faces ** 3) / 3.0
        coef = chi * TWO_PI * np.outer(Gf * slope_face, ring)       # (n_z, n_s)
        k_from = grid.index(I[:, None], np.arange(n_s)[None, :]).ravel()
        k_to = grid.index(I[:, None] + 1, np.arange(n_s)[None, :]).ravel()
        c = coef.ravel()
        half = 0.5 * (Ds[k_from] + Ds[k_to])
        contrib = sp.diags(c) @ half
        # scatter: +contrib on k_from rows, -contrib on k_to rows
        P_from = sp.csr_matrix((np.ones(N), (k_from, np.arange(N))), shape=(N, N))
        P_to = sp.csr_matrix((np.ones(N), (k_to, np.arange(N))), shape=(N, N))
        A = A + (P_from - P_to) @ contrib

    if psi is not None:
        Fz, Fs = _advective_fluxes(grid, psi)
        rows, cols, vals = [], [], []
        for j in range(n_s):
            F = Fz[1:, j]                       # face at z_faces[i+1]
            ki, ki1 = grid.index(I, j), grid.index(I + 1, j)
            up = np.where(F >= 0, ki, ki1)
            rows += [ki, ki1]
            cols += [up, up]
            vals += [F, -F]
        for j in range(1, n_s):
            F = Fs[:, j]
            kin, kout = grid.index(I, j - 1), grid.index(I, j)
            up = np.where(F >= 0, kin, kout)
            rows += [kin, kout]
            cols += [up, up]
            vals += [F, -F]
        A = A + sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(N, N))
    return A.tocsr()


@dataclass
class CellSystem:
    grid: CellGrid
    A: sp.csr_matrix
    rhs_fixed: np.ndarray     # right-hand side without the lambda * volume part
    volume: np.ndarray        # flattened cell volumes

    def rhs(self, lam):
        return self.rhs_fixed + lam * self.volume

    def compatible_lambda(self):
        # ones^T A = 0, so the rhs must sum to zero
        return -float(np.sum(self.rhs_fixed)) / float(np.sum(self.volume))

    def least_squares_residual(self, lam):
        """``min_u ||A u - b(lam)||_2``: the component of b along the left kernel."""
        b = self.rhs(lam)
        return abs(float(np.sum(b))) / np.sqrt(b.size)

    def solve(self, lam, kernel="bordered", tol=1e-10):
        b = self.rhs(lam)
        N = b.size
        if kernel == "bordered":
            ones = np.ones((N, 1))
            M = sp.bmat([[self.A, sp.csr_matrix(ones)],
                         [sp.csr_matrix(self.volume[None, :]), None]], format="csc")
            sol = spla.spsolve(M, np.concatenate([b, [0.0]]))
            u = sol[:N]
        elif kernel == "pin":
            M = self.A.tolil()
            M[N - 1, :] = 0.0
            M[N - 1, N - 1] = 1.0
            bb = b.copy()
            bb[N - 1] = 0.0
            u = spla.spsolve(M.tocsc(), bb)
        else:
            raise InvalidParameterError(f"unknown kernel handling {kernel!r}")
        if not np.all(np.isfinite(u)):
            raise SolverFailureError("cell solve produced non-finite values")
        u = u - np.dot(self.volume, u) / np.sum(self.volume)
        bnorm = float(np.linalg.norm(b))
        res = float(np.linalg.norm(self.A @ u - b)) / (bnorm if bnorm > 0 else 1.0)
        if res > tol:
            raise SolverFailureError("cell problem residual above tolerance", res)
        return u, res


@dataclass
class CorrectorField:
    z: np.ndarray           # cell-centre z
    rho_hat: np.ndarray     # cell-centre normalised radius
    values: np.ndarray      # (n_z, n_s)
    weights: np.ndarray     # cell volumes
    residual: float = 0.0

    @property
    def mean(self):
        return float(np.sum(self.values * self.weights) / np.sum(self.weights))

    def evaluate(self, z, rho_hat):
        """Periodic-in-z bilinear interpolation of the cell values."""
        z, s = np.broadcast_arrays(np.mod(np.asarray(z, dtype=float), 1.0), np.asarray(rho_hat, dtype=float))
        zc = np.concatenate([[self.z[-1] - 1.0], self.z, [self.z[0] + 1.0]])
        vals = np.concatenate([self.values[-1:], self.values, self.values[:1]], axis=0)
        # clamp radially: values beyond the outermost centres are held constant
        s = np.clip(s, self.rho_hat[0], self.rho_hat[-1])
        interp = RegularGridInterpolator((zc, self.rho_hat), vals)
        out = interp(np.stack([z, s], axis=-1))
        return out if out.ndim else float(out)

    def rows(self):
        for i, z in enumerate(self.z):
            for j, s in enumerate(self.rho_hat):
                yield (z, s, self.values[i, j])


def wall_theta_integrals(grid, profile, absorption, x1, t, mu, nu, n_theta=16):
    """Integral of Theta over each wall panel (midpoint in z, mean over theta)."""
    zc = grid.z_centers
    th = TWO_PI * np.arange(n_theta) / n_theta
    Z, TH = np.meshgrid(zc, th, indexing="ij")
    X = profile.wall_point(Z, TH)
    theta_vals = np.asarray(absorption.theta(x1, X, t, mu, nu), dtype=float)
    return theta_vals.mean(axis=1) * grid.wall_area


def assemble_cell_system(profile, velocity, absorption, p, mu, nu, delta, x1=0.0, t=0.0,
                         n_z=64, n_s=64, cross_terms=True):
    grid = cell_grid(profile, n_z, n_s)
    chi = absorption.chi
    psi = stream_nodes(grid, velocity, profile, x1, t)
    A = assemble_operator(grid, chi, psi, cross_terms)
    Fz, _ = _advective_fluxes(grid, psi)
    # integral of c . e1 over each cell from the axial fluxes at its two faces
    c_int = grid.hz * 0.5 * (Fz[:-1] + Fz[1:])
    rhs = delta * grid.volume - p * c_int
    wall = wall_theta_integrals(grid, profile, absorption, x1, t, mu, nu) + chi * p * grid.wall_n1
    rhs[:, -1] -= wall
    return CellSystem(grid, A, rhs.ravel(), grid.volume.ravel())


def solve_cell_problem(profile, velocity, absorption, data, n_z=64, n_s=64, kernel="bordered",
                       cross_terms=True):
    """Corrector ``u1`` (volume-weighted mean zero) and the discrete compatible lambda."""
    system = assemble_cell_system(profile, velocity, absorption, data.p, data.mu, data.nu, data.delta,
                                  data.x1, data.t, n_z, n_s, cross_terms)
    lam = system.compatible_lambda()
    u, res = system.solve(lam, kernel)
    g = system.grid
    field = CorrectorField(g.z_centers, g.s_centers, u.reshape(g.n_z, g.n_s), g.volume, res)
    return field, lam
