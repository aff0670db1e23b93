import numpy as np
import pytest
from scipy.integrate import quad

from villus_homog.errors import InvalidParameterError, InvalidProfileError, SingularGeometryError
from villus_homog.geometry import (bump_profile, cell_measures, cosine_profile, cosine_theta_profile,
                                   flat_profile, load_profile_csv, make_profile, outward_normal,
                                   surface_average, tangents, volume_average)

TWO_PI = 2 * np.pi


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_cylinder_measures(r):
    m = cell_measures(flat_profile(r))
    assert m.volume == pytest.approx(np.pi * r ** 2, rel=1e-12)
    assert m.lateral_area == pytest.approx(2 * np.pi * r, rel=1e-12)
    assert abs(m.ratio_RP - 2.0 / r) <= 1e-10


def axisym_oracle(R, Rz):
    vol = quad(lambda z: np.pi * R(z) ** 2, 0, 1, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
    area = quad(lambda z: TWO_PI * R(z) * np.sqrt(1 + Rz(z) ** 2), 0, 1, epsabs=1e-12, epsrel=1e-12,
                limit=200)[0]
    return vol, area


def test_cosine_profile_against_adaptive_quadrature():
    amp = 0.1
    R = lambda z: 1.0 + amp * (1 - np.cos(TWO_PI * z))
    Rz = lambda z: amp * TWO_PI * np.sin(TWO_PI * z)
    vol, area = axisym_oracle(R, Rz)
    m = cell_measures(cosine_profile(1.0, amp))
    assert m.volume == pytest.approx(vol, rel=1e-6)
    assert m.lateral_area == pytest.approx(area, rel=1e-6)
    assert m.ratio_RP == pytest.approx(area / vol, rel=1e-6)


def test_theta_dependent_profile_against_million_node_grid():
    prof = cosine_theta_profile(1.0, 0.1, 0.05, 4)
    n = 1000
    z = (np.arange(n) + 0.5) / n
    th = TWO_PI * (np.arange(n) + 0.5) / n
    Z, TH = np.meshgrid(z, th, indexing="ij")
    # written out by hand: rho = 1 + 0.1(1 - cos 2 pi z) + 0.05(1 - cos 4 theta)
    rho = 1 + 0.1 * (1 - np.cos(TWO_PI * Z)) + 0.05 * (1 - np.cos(4 * TH))
    rz = 0.1 * TWO_PI * np.sin(TWO_PI * Z)
    rt = 0.2 * np.sin(4 * TH)
    w = TWO_PI / n ** 2
    vol = np.sum(0.5 * rho ** 2) * w
    area = np.sum(np.sqrt(rho ** 2 * (1 + rz ** 2) + rt ** 2)) * w
    m = cell_measures(prof, 128, 128)
    assert m.volume == pytest.approx(vol, rel=1e-6)
    assert m.lateral_area == pytest.approx(area, rel=1e-6)


def test_bump_profile_against_adaptive_quadrature():
    prof = bump_profile(1.0, 0.3, 4.0)
    R = lambda z: float(prof.radius(z))
    Rz = lambda z: float(prof.radius_derivatives(z)[1])
    vol, area = axisym_oracle(R, Rz)
    m = cell_measures(prof, 256, 16)
    assert m.volume == pytest.approx(vol, rel=1e-6)
    assert m.lateral_area == pytest.approx(area, rel=1e-6)


def test_normals_are_unit_and_orthogonal():
    prof = cosine_theta_profile(1.0, 0.2, 0.05, 3)
    rng = np.random.default_rng(0)
    z, th = rng.uniform(0, 1, 50), rng.uniform(0, TWO_PI, 50)
    n = outward_normal(prof, z, th)
    tz, tt = tangents(prof, z, th)
    np.testing.assert_allclose(np.linalg.norm(n, axis=-1), 1.0, atol=1e-14)
    assert np.max(np.abs(np.sum(n * tz, -1))) < 1e-13
    assert np.max(np.abs(np.sum(n * tt, -1))) < 1e-13
    # outward: points away from the axis
    W = prof.wall_point(z, th)
    assert np.all(np.sum(n[:, 1:] * W[:, 1:], -1) > 0)


def test_cylinder_normal_is_radial():
    n = outward_normal(flat_profile(2.0), 0.3, np.pi / 2)
    np.testing.assert_allclose(n, [0.0, 0.0, 1.0], atol=1e-15)


def test_degenerate_wall_raises():
    bad = flat_profile(1.0)
    object.__setattr__(bad, "base_radius_r", 0.0)
    with pytest.raises(SingularGeometryError):
        outward_normal(bad, 0.1, 0.0)


def test_profile_validation():
    zero = lambda z, t: np.zeros_like(np.asarray(z, dtype=float))
    with pytest.raises(InvalidProfileError):
        make_profile(1.0, lambda z, t: 0.1 * np.asarray(z, dtype=float), zero, zero)
    with pytest.raises(InvalidProfileError):
        make_profile(1.0, lambda z, t: -2.0 + 0.0 * np.asarray(z, dtype=float), zero, zero)
    with pytest.raises(InvalidParameterError):
        make_profile(0.0, zero, zero, zero)
    with pytest.raises(InvalidParameterError):
        cell_measures(flat_profile(), 4, 4)


def test_surface_and_volume_average_of_constants(villous):
    prof = villous[0]
    assert surface_average(prof, lambda X: 3.0 + 0 * X[..., 0]) == pytest.approx(3.0, abs=1e-12)
    assert volume_average(prof, lambda X: 3.0 + 0 * X[..., 0]) == pytest.approx(3.0, abs=1e-12)


def test_volume_average_against_quadrature():
    amp = 0.2
    prof = cosine_profile(1.0, amp)
    R = lambda z: 1.0 + amp * (1 - np.cos(TWO_PI * z))
    # mean of rho^2 over the cell: int pi R^4 / 2 dz / int pi R^2 dz
    num = quad(lambda z: np.pi * R(z) ** 4 / 2, 0, 1, epsabs=1e-14)[0]
    den = quad(lambda z: np.pi * R(z) ** 2, 0, 1, epsabs=1e-14)[0]
    got = volume_average(prof, lambda X: X[..., 1] ** 2 + X[..., 2] ** 2, 64, 16, 33)
    assert got == pytest.approx(num / den, rel=1e-10)


def test_tabulated_profile_round_trip(tmp_path):
    z = np.arange(64) / 64
    th = TWO_PI * np.arange(8) / 8
    psi = 0.1 * (1 - np.cos(TWO_PI * z))[:, None] * np.ones(8)
    lines = ["z,theta,psi"] + [f"{float(a)!r},{float(b)!r},{float(p)!r}" for i, a in enumerate(z) for j, b in enumerate(th)
                               for p in [psi[i, j]]]
    path = tmp_path / "prof.csv"
    path.write_text("\n".join(lines) + "\n")
    prof = load_profile_csv(path)
    m = cell_measures(prof, 64, 8)
    ref = cell_measures(cosine_profile(1.0, 0.1), 64, 8)
    assert m.volume == pytest.approx(ref.volume, rel=1e-10)
    assert m.lateral_area == pytest.approx(ref.lateral_area, rel=2e-3)
