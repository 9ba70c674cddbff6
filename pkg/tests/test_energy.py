import numpy as np
import pytest

from annular import boundary as bd
from annular import manifold as mf
from annular.energy import (Configuration, Settings, boundary_gradient, cone_lp, criticality,
                            denergy_rho, directional_derivative, energy, feasibility,
                            hopf_differential)
from annular.errors import DegenerateModulus
from annular.grid import SurfaceField, build_grid
from annular.harmonic import harmonic_euclidean

SMALL = Settings(ns=33, nr=17)
TWO_PI = 2 * np.pi


class _Point(bd.JordanCurve):
    """Degenerate 'curve' at a single point, for constant traces."""

    def __init__(self, p):
        p = np.asarray(p, float)
        z = lambda u: np.zeros((len(np.atleast_1d(u)), len(p)))
        self.p = p
        self.eval = lambda u: np.tile(p, (len(np.atleast_1d(u)), 1))
        self.d1 = self.d2 = self.d3 = z
        self.name = "point"
        self.dim = len(p)


def constants(p, q, rho, n=32):
    th = bd.theta_grid(n)
    x1 = bd.BoundaryParametrization(th.copy(), _Point(p))
    x2 = bd.BoundaryParametrization(th.copy(), _Point(q))
    return Configuration(x1, x2, rho, settings=SMALL, l=(1.0, 1.0))


def ring(rho, n=64, z=0.0):
    return Configuration(bd.identity(bd.circle_3d((0, 0, z)), n),
                         bd.identity(bd.circle_3d((0, 0, z), rho), n), rho, settings=SMALL)


def ellipse_config(rho=0.4, n=64):
    e1 = bd.ellipse([0, 0, 0.3], 1.3, 0.8, [1, 0, 0], [0, 1, 0])
    e2 = bd.circle_3d((0.1, 0, -0.3), 0.9)
    th = bd.theta_grid(n)
    return Configuration(bd.BoundaryParametrization(th + 0.05 * np.sin(th), e1),
                         bd.BoundaryParametrization(th + 0.1 * np.cos(2 * th), e2), rho, settings=SMALL)


def test_energy_examples():
    p, q = np.array([0.0, 0, 1]), np.array([1.0, 0, -1])
    assert np.isclose(energy(constants(p, q, 0.5)), np.pi * 5 / np.log(2), rtol=1e-12)
    for rho in (0.2, 0.6):
        assert np.isclose(energy(ring(rho)), np.pi * (1 - rho ** 2), rtol=1e-12)
    discs = Configuration(bd.identity(bd.circle_3d((0, 0, 1)), 64), bd.identity(bd.circle_3d(), 64), 0.0,
                          settings=SMALL)
    assert np.isclose(energy(discs), TWO_PI, rtol=1e-12)


def test_denergy_rho_examples():
    assert abs(denergy_rho(ring(0.4))) < 1e-12
    assert abs(denergy_rho(ring(0.4), "radial")) < 1e-12
    p, q = np.zeros(3), np.array([0.0, 0.0, 2.0])
    rho = 0.3
    exact = np.pi * 4 / (rho * np.log(rho) ** 2)
    c = constants(p, q, rho)
    assert np.isclose(denergy_rho(c), exact, rtol=1e-12)
    assert np.isclose(denergy_rho(c, "radial"), exact, rtol=1e-12)
    with pytest.raises(DegenerateModulus):
        denergy_rho(ring(0.4).derive(rho=0.0))


@pytest.mark.parametrize("method", ["envelope", "radial"])
def test_denergy_rho_finite_differences(method):
    c = ellipse_config(0.4)
    h = 1e-3
    fd = (energy(c.derive(rho=0.4 + h)) - energy(c.derive(rho=0.4 - h))) / (2 * h)
    assert abs(denergy_rho(c, method) - fd) < 1e-3 * abs(fd)


def test_boundary_gradient_vanishes_on_identity():
    c = ring(0.4)
    assert np.max(np.abs(boundary_gradient(c, 1))) < 1e-12
    assert np.max(np.abs(boundary_gradient(c, 2))) < 1e-12
    d = Configuration(bd.identity(bd.circle_3d(), 64), bd.identity(bd.circle_3d(), 64), 0.0, settings=SMALL)
    assert np.max(np.abs(boundary_gradient(d, 1))) < 1e-12
    with pytest.raises(ValueError):
        boundary_gradient(c, 3)


def test_boundary_gradient_ellipse_fd():
    for rho in (0.4, 0.0):
        c = ellipse_config(rho)
        phi = 0.3 * np.sin(c.x1.theta) + 0.1
        G = boundary_gradient(c, 1)
        assert np.max(np.abs(G)) > 1e-3
        pair = np.sum(G * phi) * TWO_PI / c.ntheta
        h = 1e-4
        x1h = bd.exp_update(c.x1, bd.TangentVariation(phi), h)
        E0 = energy(c)
        fd = (energy(c.derive(x1=x1h, warm=False)) - E0) / h
        assert abs(pair - fd) < 5e-3 * abs(fd)


def test_criticality_examples():
    rep = criticality(ring(0.5), hopf=True)
    assert rep.g1 < 1e-12 and rep.g2 < 1e-12 and rep.g3 < 1e-12 and rep.hopf_defect < 1e-12
    p, q = np.zeros(3), np.array([1.0, 0, 0])
    rho = 0.5
    rc = criticality(constants(p, q, rho))
    assert np.isclose(rc.g3, np.pi / np.log(rho) ** 2, rtol=1e-12)
    assert rc.g1 == 0 and rc.g2 == 0 and rc.g >= 0


def test_cone_lp_large_l_is_unbounded_only_by_box():
    G = np.ones(16)
    val, phi = cone_lp(G, bd.theta_grid(16), 0.5)
    assert np.isclose(val, 0.5 * TWO_PI) and np.allclose(phi, -0.5)


def test_hopf_examples():
    assert hopf_differential(ring(0.4).fields())["defect"] < 1e-12
    rho = 0.4
    p, q = np.zeros(3), np.array([0.0, 1.5, 0.0])
    h = hopf_differential(constants(p, q, rho).fields())
    val = 1.5 ** 2 / np.log(rho) ** 2
    assert np.allclose(h["field"], val, atol=1e-12) and h["real_const_dev"] < 1e-12
    assert np.isclose(h["mean"], val)
    # F = (r cos, r sin, a r cos): Phi = a^2 r^2 (cos 2 theta + i sin 2 theta)
    a = 0.7
    g = build_grid(rho, 33, 32)
    r = g.radii[:, None]
    th = g.theta[None, :]
    F = SurfaceField(np.stack([r * np.cos(th), r * np.sin(th), a * r * np.cos(th)], -1), g)
    phi = hopf_differential(F)["field"]
    assert np.allclose(phi, a * a * r * r * (np.cos(2 * th) + 1j * np.sin(2 * th)), atol=1e-12)


def test_directional_derivative():
    c = ellipse_config(0.4)
    assert directional_derivative(c, (None, None)) == 0.0
    phi1 = 0.2 * np.cos(2 * c.x1.theta)
    phi2 = 0.1 * np.sin(c.x2.theta) + 0.05
    xi = (bd.TangentVariation(phi1), bd.TangentVariation(phi2))
    vol = directional_derivative(c, xi)
    dth = TWO_PI / c.ntheta
    pair = dth * (np.sum(boundary_gradient(c, 1) * phi1) + np.sum(boundary_gradient(c, 2) * phi2))
    assert abs(vol - pair) < 1e-3 * abs(pair)
    # Euclidean: J is the harmonic extension of xi
    F = c.fields()
    H = harmonic_euclidean(xi[0].vector(c.x1), xi[1].vector(c.x2), F.grid)
    from annular.energy import _bilinear
    assert np.isclose(vol, _bilinear(F, H), rtol=1e-12)


def test_directional_derivative_sphere(sphere_pair):
    M, g1, g2 = sphere_pair
    th = bd.theta_grid(64)
    c = Configuration(bd.BoundaryParametrization(th + 0.2 * np.sin(th), g1), bd.identity(g2, 64), 0.3, M, SMALL)
    phi = 0.2 * np.sin(c.x1.theta) + 0.1 * np.cos(3 * c.x1.theta)
    vol = directional_derivative(c, (bd.TangentVariation(phi), None))
    h = 1e-4
    fd = (energy(c.derive(x1=bd.exp_update(c.x1, bd.TangentVariation(phi), h))) - energy(c)) / h
    assert abs(vol - fd) < 5e-3 * abs(fd)


def test_feasibility():
    for rho in (0.1, 0.4, 0.7):
        f = feasibility(ring(rho).derive(x2=bd.identity(bd.circle_3d((0, 0, 0.5)), 64)))
        assert f["ok"]


def test_disc_mobius_invariance():
    n = 128
    e1 = bd.ellipse([0, 0, 0], 1.2, 0.9, [1, 0, 0], [0, 1, 0])
    th = bd.theta_grid(n)
    c0 = Configuration(bd.BoundaryParametrization(th.copy(), e1), bd.identity(bd.circle_3d(), n), 0.0,
                       settings=Settings(ns=33, nr=33))
    w = bd.mobius_angles([0.4, 2.2, 4.5], th)
    assert np.all(np.diff(w) > 0) and np.isclose(w[-1] - w[0], TWO_PI - (w[1] - w[0]), atol=0.2)
    c1 = c0.derive(x1=bd.BoundaryParametrization(w, e1), warm=False)
    assert abs(energy(c1) - energy(c0)) < 1e-8


def test_degeneration_gap_decreases():
    # well separated circles, where no annulus undercuts the two discs
    c = Configuration(bd.identity(bd.circle_3d((0, 0, 1.0)), 64), bd.identity(bd.circle_3d((0, 0, -1.0)), 64),
                      0.1, settings=SMALL)
    E0 = energy(c.derive(rho=0.0))
    gaps = [abs(energy(c.derive(rho=r)) - E0) for r in (0.1, 0.05, 0.01)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_configuration_validation():
    with pytest.raises(ValueError):
        Configuration(bd.identity(bd.circle_3d(), 32), bd.identity(bd.circle_3d(), 64), 0.3)
    from annular.errors import InvalidModulus
    with pytest.raises(InvalidModulus):
        ring(0.4).derive(rho=1.0)
