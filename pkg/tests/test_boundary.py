import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from annular import boundary as bd
from annular.errors import DegreeMismatch, TargetNotAttained

TWO_PI = 2 * np.pi
CIRCLE = bd.circle_3d()


def qp_projection(w):
    """Least-squares monotone degree-one fit by a generic QP solver."""
    n = len(w)
    v = cp.Variable(n)
    cons = [v[1:] >= v[:-1], v[-1] <= v[0] + TWO_PI]
    cp.Problem(cp.Minimize(cp.sum_squares(v - w)), cons).solve()
    return v.value


def smooth_lift(coeffs, n=128):
    th = bd.theta_grid(n)
    pert = sum(a * np.sin((k + 1) * th + b) / (k + 1) for k, (a, b) in enumerate(coeffs))
    return th + pert


lift_coeffs = st.lists(st.tuples(st.floats(-0.3, 0.3), st.floats(0, 6.28)), min_size=1, max_size=4)


# curves and evaluation -----------------------------------------------------------


def test_identity_evaluation():
    x = bd.identity(CIRCLE, 64)
    pts = bd.eval_boundary(x)
    assert np.allclose(pts, np.c_[np.cos(x.theta), np.sin(x.theta), 0 * x.theta], atol=1e-15)


def test_shifted_identity_is_rotation():
    x = bd.BoundaryParametrization(bd.theta_grid(64) + 1.0, CIRCLE)
    th = bd.theta_grid(64) + 1.0
    assert np.allclose(x.points(), np.c_[np.cos(th), np.sin(th), 0 * th], atol=1e-15)


def test_spline_ellipse():
    u = bd.theta_grid(16)
    ell = np.c_[1.5 * np.cos(u), 0.7 * np.sin(u), 0 * u]
    curve = bd.spline_curve(ell)
    # exact at the samples
    assert np.max(np.abs(bd.eval_boundary(bd.identity(curve, 16)) - ell)) < 1e-12
    # cubic accuracy in between
    v = bd.theta_grid(256)
    err = np.max(np.abs(curve.eval(v) - np.c_[1.5 * np.cos(v), 0.7 * np.sin(v), 0 * v]))
    assert err < 5e-3
    fine = bd.spline_curve(np.c_[1.5 * np.cos(bd.theta_grid(128)), 0.7 * np.sin(bd.theta_grid(128)), 0 * bd.theta_grid(128)])
    assert np.max(np.abs(fine.eval(v) - np.c_[1.5 * np.cos(v), 0.7 * np.sin(v), 0 * v])) < 1e-6


def test_curve_periodicity_and_derivatives():
    e = bd.ellipse([0, 0, 1.0], 1.3, 0.8, [1, 0, 0], [0, 1, 0])
    u = np.linspace(0, 1, 7)
    assert np.allclose(e.eval(u + TWO_PI), e.eval(u), atol=1e-10)
    h = 1e-5
    assert np.allclose((e.eval(u + h) - e.eval(u - h)) / (2 * h), e.d1(u), atol=1e-8)
    assert np.allclose((e.d2(u + h) - e.d2(u - h)) / (2 * h), e.d3(u), atol=1e-8)


def test_irregular_curve_rejected():
    with pytest.raises(ValueError):
        bd.JordanCurve((lambda u: np.zeros((len(u), 3)),) * 4)
    with pytest.raises(ValueError):
        bd.spline_curve(np.zeros((8, 3)))


# monotone projection --------------------------------------------------------------


def test_pava_example():
    w = np.array([0, 0.5, 0.3, 1.0, 2.0, 3.0, 4.0, 5.0])
    out = bd.monotone_project(w)
    assert np.allclose(out, [0, 0.4, 0.4, 1.0, 2.0, 3.0, 4.0, 5.0])
    assert np.allclose(out, qp_projection(w), atol=1e-6)


def test_decreasing_pair_replaced_by_mean():
    w = bd.theta_grid(8).copy()
    w[3], w[4] = w[4] + 0.1, w[3] - 0.1
    out = bd.monotone_project(w)
    assert np.isclose(out[3], out[4]) and np.isclose(out[3], 0.5 * (w[3] + w[4]))


def test_against_qp_oracle():
    rng = np.random.default_rng(0)
    for _ in range(60):
        n = int(rng.integers(3, 9))
        w = np.sort(rng.uniform(0, TWO_PI, n)) + rng.normal(0, 1.0, n)
        assert np.max(np.abs(bd.monotone_project(w) - qp_projection(w))) < 1e-5


def test_wrap_constraint_bound():
    # violates only the wrap constraint w[-1] <= w[0] + 2 pi
    w = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 7.0])
    out = bd.monotone_project(w)
    assert out[-1] <= out[0] + TWO_PI + 1e-12
    assert np.allclose(out, qp_projection(w), atol=1e-6)


@given(arrays(float, 12, elements=st.floats(-1, 1)))
def test_projection_idempotent_and_monotone(noise):
    w = bd.theta_grid(12) + noise
    out = bd.monotone_project(w)
    assert bd._check_monotone(out, 1e-12)
    assert np.array_equal(bd.monotone_project(out), out)


def test_degree_mismatch():
    w = np.append(bd.theta_grid(8), TWO_PI + 0.1)
    with pytest.raises(DegreeMismatch):
        bd.monotone_project_closed(w)
    ok = np.append(bd.theta_grid(8), TWO_PI)
    assert np.allclose(bd.monotone_project_closed(ok), bd.theta_grid(8))
    with pytest.raises(DegreeMismatch):
        bd.monotone_project(np.array([0.0, np.nan, 1.0, 2.0]))


# exp_update -------------------------------------------------------------------------


def test_exp_update_examples():
    x = bd.identity(CIRCLE, 64)
    assert bd.exp_update(x, bd.TangentVariation(np.zeros(64)), 1.0) is x
    y = bd.exp_update(x, bd.TangentVariation(np.full(64, 0.3)), 1.0)
    assert np.allclose(y.w, x.theta + 0.3)
    z = bd.exp_update(x, bd.TangentVariation(np.sin(x.theta)), 0.1)
    assert np.allclose(z.w, x.theta + 0.1 * np.sin(x.theta), atol=1e-15)
    with pytest.raises(ValueError):
        bd.exp_update(x, bd.TangentVariation(np.sin(x.theta)), 1.5)


@given(lift_coeffs, st.floats(0, 1), st.floats(0, 1))
def test_exp_update_lipschitz_in_t(coeffs, s, t):
    x = bd.BoundaryParametrization(smooth_lift(coeffs), CIRCLE)
    phi = 0.8 * np.cos(3 * x.theta)
    a = bd.exp_update(x, bd.TangentVariation(phi), s).w
    b = bd.exp_update(x, bd.TangentVariation(phi), t).w
    assert np.max(np.abs(a - b)) <= np.max(np.abs(phi)) * abs(s - t) + 1e-12


@given(lift_coeffs, st.floats(0, 1))
def test_cone_convexity(coeffs, lam):
    x = bd.BoundaryParametrization(smooth_lift(coeffs), CIRCLE)
    # two admissible directions: move to other monotone lifts
    p1 = bd.monotone_project(x.w + 0.7 * np.sin(2 * x.theta)) - x.w
    p2 = bd.monotone_project(x.w - 0.9 * np.cos(x.theta)) - x.w
    assert bd.is_admissible(x, p1) and bd.is_admissible(x, p2)
    assert bd.is_admissible(x, lam * p1 + (1 - lam) * p2, tol=1e-12)


def test_h12_seminorm():
    th = bd.theta_grid(64)
    assert np.isclose(bd.h12_seminorm(np.cos(3 * th)) ** 2, 3 * np.pi)
    assert np.isclose(bd.h12_seminorm(np.sin(th) + 2 * np.cos(2 * th)) ** 2, np.pi * (1 + 8))
    assert bd.h12_seminorm(np.full(64, 5.0)) == 0


# normalizations ------------------------------------------------------------------------


def test_three_point_identity_when_normalized():
    x = bd.identity(CIRCLE, 96)
    y = bd.normalize_three_point(x, bd.ANCHORS)
    assert y is x


def test_three_point_undoes_shift():
    c = 0.7
    x = bd.identity(CIRCLE, 96, shift=c)
    y = bd.normalize_three_point(x, bd.ANCHORS)
    assert np.allclose(y.w, x.theta, atol=1e-12)


def test_three_point_generic():
    th = bd.theta_grid(128)
    x = bd.BoundaryParametrization(th + 0.3 * np.sin(th) + 0.1 * np.cos(2 * th), CIRCLE)
    P = np.array([0.2, 2.5, 4.4])
    y = bd.normalize_three_point(x, P)
    assert y.is_monotone()
    at_anchor = y.w[np.arange(3) * 128 // 3]
    assert np.all(np.abs(at_anchor - P) < TWO_PI / 128)
    assert np.allclose(bd.resample(y, bd.ANCHORS), P, atol=1e-12)
    # idempotent
    assert np.allclose(bd.normalize_three_point(y, P).w, y.w, atol=1e-10)


def test_three_point_rejects_bad_targets():
    x = bd.identity(CIRCLE, 64)
    with pytest.raises(TargetNotAttained):
        bd.normalize_three_point(x, [0.0, np.inf, 1.0])
    with pytest.raises(TargetNotAttained):
        bd.normalize_three_point(x, [0.0, 4.0, 2.0])


def test_one_point_examples():
    x = bd.identity(CIRCLE, 64)
    y, a = bd.normalize_one_point(x, 0.0, return_angle=True)
    assert a == 0.0 and np.array_equal(y.w, x.w)
    c = 0.4
    y, a = bd.normalize_one_point(bd.identity(CIRCLE, 64, shift=c), 0.0, return_angle=True)
    assert np.isclose(a, -c) and np.allclose(y.w, x.theta, atol=1e-12)


@given(lift_coeffs, st.floats(0, TWO_PI))
def test_one_point_generic(coeffs, target):
    x = bd.BoundaryParametrization(smooth_lift(coeffs), CIRCLE)
    y = bd.normalize_one_point(x, target)
    assert np.linalg.norm(y.points()[0] - CIRCLE.eval(np.array([target]))[0]) < 1e-9
    z = bd.normalize_one_point(y, target)
    assert np.allclose(z.w, y.w, atol=1e-9)


@given(lift_coeffs)
def test_normalization_preserves_image(coeffs):
    x = bd.BoundaryParametrization(smooth_lift(coeffs, 64), CIRCLE)
    y = bd.normalize_three_point(x, [0.3, 2.4, 4.0])
    # every normalized sample lies on the curve (same point set)
    pts = y.points()
    assert np.allclose(np.linalg.norm(pts[:, :2], axis=1), 1.0) and np.allclose(pts[:, 2], 0)
    assert np.isclose(y.w[-1] - y.w[0], x.w[-1] - x.w[0], atol=0.5)
