"""Boundary curves and monotone reparametrizations.

A boundary map is stored as the lift ``w`` of a weakly monotone degree-one
circle map, sampled at ``theta_j = 2*pi*j/N``.  The value at ``theta_N`` is
implicit: ``w(theta + 2*pi) = w(theta) + 2*pi``.  The point on the curve is
``gamma(w(theta))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import brentq

from .errors import DegreeMismatch, TargetNotAttained

TWO_PI = 2 * np.pi


def theta_grid(n: int) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


# curves -----------------------------------------------------------------


class JordanCurve:
    """A closed C^3 curve gamma: R/2pi -> R^k given by its derivatives.

    Parameters
    ----------
    funcs : sequence of four callables
        Position and first three derivatives.  Each maps an array of
        parameters of shape ``(n,)`` to ``(n, k)``.
    """

    def __init__(self, funcs: Sequence[Callable], name: str = "curve"):
        if len(funcs) != 4:
            raise ValueError("need position and three derivatives")
        self._f = tuple(funcs)
        self.name = name
        u = theta_grid(256)
        speed = np.linalg.norm(self.d1(u), axis=-1)
        if not np.all(speed > 1e-12):
            raise ValueError(f"{name}: curve is not regular (|gamma'| vanishes)")
        self.dim = self.eval(u[:1]).shape[-1]

    def _call(self, k, u):
        u = np.asarray(u, dtype=float)
        out = np.asarray(self._f[k](u.ravel()), dtype=float)
        return out.reshape(u.shape + (out.shape[-1],))

    def eval(self, u):
        return self._call(0, u)

    def d1(self, u):
        return self._call(1, u)

    def d2(self, u):
        return self._call(2, u)

    def d3(self, u):
        return self._call(3, u)

    def regularity_radius(self, samples: int = 512) -> float:
        """Smallest radius of curvature along the curve (ambient)."""
        u = theta_grid(samples)
        t = self.d1(u)
        a = self.d2(u)
        speed2 = np.sum(t * t, axis=-1)
        a_perp = a - (np.sum(a * t, axis=-1) / speed2)[:, None] * t
        kappa = np.linalg.norm(a_perp, axis=-1) / speed2
        return float(1.0 / max(np.max(kappa), 1e-300))

    def min_distance(self, other: "JordanCurve", samples: int = 512) -> float:
        """Ambient chordal distance between the two point sets (sampled)."""
        u = theta_grid(samples)
        a = self.eval(u)
        b = other.eval(u)
        d2 = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2 * a @ b.T
        return float(np.sqrt(max(np.min(d2), 0.0)))


def circle(center, radius: float, e1, e2, name: str = "circle") -> JordanCurve:
    """The curve ``center + radius*(cos u e1 + sin u e2)``.

    With ``center = cos(a) p`` and ``radius = sin(a)`` for orthonormal
    p, e1, e2 this is a small circle on the unit sphere; likewise
    ``cosh(a) p, sinh(a)`` give a circle on the hyperboloid.
    """
    c = np.asarray(center, dtype=float)
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    R = float(radius)

    def ring(cu, su):
        return R * (cu[:, None] * e1 + su[:, None] * e2)

    return JordanCurve(
        (
            lambda u: c + ring(np.cos(u), np.sin(u)),
            lambda u: ring(-np.sin(u), np.cos(u)),
            lambda u: ring(-np.cos(u), -np.sin(u)),
            lambda u: ring(np.sin(u), -np.cos(u)),
        ),
        name=name,
    )


def ellipse(center, a: float, b: float, e1, e2, name: str = "ellipse") -> JordanCurve:
    """The curve ``center + a cos u e1 + b sin u e2``."""
    c = np.asarray(center, dtype=float)
    e1 = a * np.asarray(e1, dtype=float)
    e2 = b * np.asarray(e2, dtype=float)

    def ring(cu, su):
        return cu[:, None] * e1 + su[:, None] * e2

    return JordanCurve(
        (
            lambda u: c + ring(np.cos(u), np.sin(u)),
            lambda u: ring(-np.sin(u), np.cos(u)),
            lambda u: ring(-np.cos(u), -np.sin(u)),
            lambda u: ring(np.sin(u), -np.cos(u)),
        ),
        name=name,
    )


def _plane_basis(normal):
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    trial = np.eye(len(n))[np.argmin(np.abs(n))]
    e1 = trial - n * (trial @ n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1) if len(n) == 3 else None
    return e1, e2


def circle_3d(center=(0.0, 0.0, 0.0), radius=1.0, normal=(0.0, 0.0, 1.0), name="circle") -> JordanCurve:
    """Circle in R^3 with the given normal, oriented counterclockwise about it."""
    n = np.asarray(normal, dtype=float)
    if n.shape != (3,):
        raise ValueError("circle_3d needs a 3-vector normal")
    if np.allclose(n / np.linalg.norm(n), (0, 0, 1)):
        e1, e2 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    else:
        e1, e2 = _plane_basis(n)
    return circle(center, radius, e1, e2, name=name)


def spline_curve(points, name: str = "spline") -> JordanCurve:
    """Periodic cubic spline through samples taken at u_j = 2*pi*j/n."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 16:
        raise ValueError("spline curves need at least 16 samples")
    n = len(pts)
    knots = TWO_PI * np.arange(n + 1) / n
    cs = CubicSpline(knots, np.vstack([pts, pts[:1]]), bc_type="periodic", axis=0)
    ders = [cs.derivative(k) for k in (1, 2, 3)]

    def wrap(f):
        return lambda u: f(np.mod(u, TWO_PI))

    return JordanCurve((wrap(cs), wrap(ders[0]), wrap(ders[1]), wrap(ders[2])), name=name)


# parametrizations ---------------------------------------------------------


def _check_monotone(w, tol=1e-10):
    steps = np.diff(np.append(w, w[0] + TWO_PI))
    return bool(np.all(steps >= -tol))


@dataclass(frozen=True)
class BoundaryParametrization:
    """Lift w sampled on the uniform angular grid, paired with its curve."""

    w: np.ndarray
    curve: JordanCurve = field(repr=False)

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        if w.ndim != 1 or len(w) < 4:
            raise ValueError("lift must be a 1-d array with at least 4 samples")

    @property
    def n(self) -> int:
        return len(self.w)

    @property
    def theta(self) -> np.ndarray:
        return theta_grid(self.n)

    def is_monotone(self, tol: float = 1e-10) -> bool:
        return _check_monotone(self.w, tol)

    def points(self) -> np.ndarray:
        return self.curve.eval(self.w)

    def tangents(self) -> np.ndarray:
        return self.curve.d1(self.w)

    def lift(self) -> PchipInterpolator:
        """Monotone cubic interpolant of the lift, valid on all of R."""
        return _lift_interpolant(self.w)


def identity(curve: JordanCurve, n: int = 256, shift: float = 0.0) -> BoundaryParametrization:
    return BoundaryParametrization(theta_grid(n) + shift, curve)


@dataclass(frozen=True)
class TangentVariation:
    """Scalar variation phi of the lift; the tangent vector is gamma'(w) phi."""

    phi: np.ndarray
    norm_bound: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.phi))) if self.phi.size else 0.0

    def vector(self, x: BoundaryParametrization) -> np.ndarray:
        return x.tangents() * self.phi[:, None]


def is_admissible(x: BoundaryParametrization, phi, tol: float = 1e-12) -> bool:
    """Membership of w + phi in the monotone degree-one cone."""
    return _check_monotone(x.w + np.asarray(phi, dtype=float), tol)


def h12_seminorm(phi) -> float:
    """Spectral H^{1/2} seminorm: sqrt(pi * sum_n n |c_n|^2) with real coefficients."""
    phi = np.asarray(phi, dtype=float)
    n = len(phi)
    c = np.fft.rfft(phi) / n
    k = np.arange(len(c))
    # a_n^2 + b_n^2 = 4 |c_n|^2, except at Nyquist where it is |c_n|^2
    wk = np.full(len(c), 4.0)
    if n % 2 == 0:
        wk[-1] = 1.0
    return float(np.sqrt(np.pi * np.sum(wk * k * np.abs(c) ** 2)))


def eval_boundary(x: BoundaryParametrization) -> np.ndarray:
    return x.points()


# monotone projection -------------------------------------------------------


def pava(y, weights=None) -> np.ndarray:
    """Least-squares non-decreasing fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    wts = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    vals, wsum, counts = [], [], []
    for yi, wi in zip(y, wts):
        vals.append(yi)
        wsum.append(wi)
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            v2, w2, c2 = vals.pop(), wsum.pop(), counts.pop()
            w1 = wsum[-1]
            vals[-1] = (vals[-1] * w1 + v2 * w2) / (w1 + w2)
            wsum[-1] = w1 + w2
            counts[-1] += c2
    return np.repeat(vals, counts)


def _circular_isotonic(w: np.ndarray) -> np.ndarray:
    n = len(w)
    u = pava(w)
    if u[-1] <= u[0] + TWO_PI:
        return u
    # the wrap constraint binds: some cut between distinct blocks of the
    # optimum leaves it slack, and at that cut the linear fit is optimal
    best, best_cost = None, np.inf
    for k in range(1, n):
        v = np.concatenate([w[k:], w[:k] + TWO_PI])
        fit = pava(v)
        if fit[-1] > fit[0] + TWO_PI + 1e-12:
            continue
        cost = float(np.sum((fit - v) ** 2))
        if cost < best_cost:
            best_cost = cost
            best = np.concatenate([fit[n - k:] - TWO_PI, fit[:n - k]])
    if best is None:
        raise DegreeMismatch("no monotone degree-one projection found")
    return best


def monotone_project(w_raw, curve: Optional[JordanCurve] = None, tol: float = 1e-8):
    """Nearest weakly monotone degree-one lift in the least-squares sense.

    ``w_raw`` holds N samples with the period implicit, so the wrap
    constraint reads ``w[N-1] <= w[0] + 2*pi``.  Lifts sampled closed
    (N + 1 values) go through :func:`monotone_project_closed`.

    Returns a :class:`BoundaryParametrization` when ``curve`` is given,
    otherwise the projected array.

    Raises
    ------
    DegreeMismatch
        If the lift has non-finite entries.
    """
    if isinstance(w_raw, BoundaryParametrization):
        curve = w_raw.curve
        w_raw = w_raw.w
    w = np.asarray(w_raw, dtype=float)
    if w.ndim != 1:
        raise ValueError("lift must be one-dimensional")
    if not np.all(np.isfinite(w)):
        raise DegreeMismatch("lift has non-finite entries")
    out = w.copy() if _check_monotone(w, 0.0) else _circular_isotonic(w)
    if curve is None:
        return out
    return BoundaryParametrization(out, curve)


def monotone_project_closed(w_closed, curve: Optional[JordanCurve] = None, tol: float = 1e-8):
    """Projection for a closed lift of N + 1 samples (last = first + 2*pi)."""
    w = np.asarray(w_closed, dtype=float)
    total = w[-1] - w[0]
    if not abs(total - TWO_PI) <= tol:
        raise DegreeMismatch(f"total increase {total:.12g} differs from 2*pi")
    return monotone_project(w[:-1], curve)


def exp_update(x: BoundaryParametrization, xi, t: float) -> BoundaryParametrization:
    """The update gamma(w + t phi), projected back onto the monotone cone."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    phi = xi.phi if isinstance(xi, TangentVariation) else np.asarray(xi, dtype=float)
    if t == 0.0 or not np.any(phi):
        return x
    return monotone_project(x.w + t * phi, x.curve)


# normalizations ------------------------------------------------------------


def _lift_interpolant(w: np.ndarray) -> PchipInterpolator:
    n = len(w)
    th = theta_grid(n)
    ext_t = np.concatenate([th - TWO_PI, th, th + TWO_PI, [2 * TWO_PI]])
    ext_w = np.concatenate([w - TWO_PI, w, w + TWO_PI, [w[0] + 2 * TWO_PI]])
    # pchip needs strictly increasing abscissae only; plateaus stay flat
    return PchipInterpolator(ext_t, ext_w, extrapolate=False)


def _eval_lift(interp, w0_period, theta):
    """Evaluate the lift anywhere using the quasi-periodicity."""
    theta = np.asarray(theta, dtype=float)
    m = np.floor(theta / TWO_PI)
    return interp(theta - m * TWO_PI) + m * TWO_PI


def _trig_eval(v, theta):
    """Trigonometric interpolant of periodic samples v at arbitrary angles."""
    n = len(v)
    c = np.fft.rfft(v) / n
    k = np.arange(len(c))
    wts = np.full(len(c), 2.0)
    wts[0] = 1.0
    if n % 2 == 0:
        wts[-1] = 1.0
    ph = np.exp(1j * np.outer(np.asarray(theta, dtype=float), k))
    return (ph.real @ (wts * c.real) - ph.imag @ (wts * c.imag))


def resample(x: BoundaryParametrization, theta) -> np.ndarray:
    """Lift values at arbitrary angles.

    Uses the trigonometric interpolant of ``w - theta`` (spectrally accurate
    for smooth lifts) and falls back to the monotone PCHIP lift when that
    would break monotonicity."""
    theta = np.asarray(theta, dtype=float)
    w = theta + _trig_eval(x.w - x.theta, theta)
    if np.all(np.diff(w) >= 0) and (len(w) < 2 or w[-1] - w[0] <= TWO_PI + 1e-9):
        return w
    return _eval_lift(x.lift(), None, theta)


def preimage(x: BoundaryParametrization, target: float) -> float:
    """First theta in [0, 2pi) with w(theta) = target (mod 2pi)."""
    w = x.w
    if not np.isfinite(target):
        raise TargetNotAttained("target is not finite")
    # lift the target into [w_0, w_0 + 2pi)
    p = target - TWO_PI * np.floor((target - w[0]) / TWO_PI)
    w_ext = np.append(w, w[0] + TWO_PI)
    j = int(np.searchsorted(w_ext, p, side="left"))
    th = theta_grid(len(w))
    if j == 0:
        return 0.0
    if j > len(w):
        raise TargetNotAttained(f"target {target} outside the range of the lift")
    if w_ext[j] == p:
        # a plateau at p starts at theta_j or earlier; take its first node
        k = j
        while k > 0 and w_ext[k - 1] == p:
            k -= 1
        return float(th[k]) if k < len(w) else TWO_PI
    a = th[j - 1]
    b = th[j] if j < len(w) else TWO_PI
    f = lambda t: float(resample(x, [t])[0]) - p
    if f(a) * f(b) > 0:
        interp = x.lift()
        f = lambda t: float(interp(t)) - p
    return float(brentq(f, a, b, xtol=1e-15, rtol=1e-15))


def rotate(x: BoundaryParametrization, alpha: float) -> BoundaryParametrization:
    """Precompose with the rotation theta -> theta + alpha."""
    if alpha == 0.0:
        return x
    steps = alpha / (TWO_PI / x.n)
    if abs(steps - round(steps)) < 1e-12:
        k = int(round(steps))
        q, r = divmod(k, x.n)
        w = np.concatenate([x.w[r:], x.w[:r] + TWO_PI]) + q * TWO_PI
        return BoundaryParametrization(w, x.curve)
    w = resample(x, x.theta + alpha)
    return BoundaryParametrization(w, x.curve)


def normalize_one_point(x1: BoundaryParametrization, target: float, return_angle: bool = False):
    """Rotate so that w(0) = target (mod 2pi).

    The same angle must be applied to the inner boundary map by the caller
    (precomposition by a rotation of the annulus moves both circles).
    """
    alpha = preimage(x1, target)
    # smallest rotation; small negative angles otherwise wrap to nearly 2pi
    if alpha > np.pi:
        alpha -= TWO_PI
    out = rotate(x1, alpha)
    # keep the lift branch that starts at the target
    shift = np.round((out.w[0] - target) / TWO_PI) * TWO_PI
    if shift != 0.0:
        out = BoundaryParametrization(out.w - shift, out.curve)
    return (out, alpha) if return_angle else out


ANCHORS = TWO_PI * np.arange(3) / 3


def _mobius_from_points(z, wv):
    """2x2 matrix of the Moebius map sending z_k to w_k (k = 0, 1, 2)."""

    def to_std(a):
        # sends a0, a1, a2 to 0, 1, infinity
        return np.array([[a[1] - a[2], -a[0] * (a[1] - a[2])],
                         [a[1] - a[0], -a[2] * (a[1] - a[0])]], dtype=complex)

    A = to_std(z)
    B = to_std(wv)
    return np.linalg.solve(B, A)


def mobius_angles(preimages, theta) -> np.ndarray:
    """Unwrapped angle map of the disc automorphism sending the anchors to ``preimages``.

    ``theta`` must start at 0; the result satisfies Theta(0) = preimages[0].
    """
    z = np.exp(1j * ANCHORS)
    q = np.exp(1j * np.asarray(preimages, dtype=float))
    m = _mobius_from_points(z, q)
    e = np.exp(1j * np.asarray(theta, dtype=float))
    img = (m[0, 0] * e + m[0, 1]) / (m[1, 0] * e + m[1, 1])
    ang = np.unwrap(np.angle(img))
    return ang - ang[0] + preimages[0]


def normalize_three_point(x: BoundaryParametrization, targets) -> BoundaryParametrization:
    """Precompose with the disc automorphism putting ``targets`` at the anchors.

    After normalization ``w(2*pi*k/3) = targets[k]`` (mod 2pi) up to
    interpolation error.

    Raises
    ------
    TargetNotAttained
        If the targets are not finite or not in increasing cyclic order.
    """
    P = np.asarray(targets, dtype=float)
    if P.shape != (3,) or not np.all(np.isfinite(P)):
        raise TargetNotAttained("need three finite target values")
    Pc = P[0] + np.mod(P - P[0], TWO_PI)
    if not (Pc[0] < Pc[1] < Pc[2] < P[0] + TWO_PI):
        raise TargetNotAttained("targets must be distinct and in increasing cyclic order")
    Q = np.array([preimage(x, p) for p in P])
    Qc = Q[0] + np.mod(Q - Q[0], TWO_PI)
    if not (Qc[0] < Qc[1] < Qc[2]):
        raise TargetNotAttained("preimages of the targets collapse; the lift is degenerate")
    if np.allclose(Qc, ANCHORS, atol=1e-13, rtol=0):
        return x
    th = x.theta
    big = mobius_angles(Qc, th)
    w = resample(x, big)
    # choose the branch with w(0) near targets[0]
    shift = np.round((w[0] - P[0]) / TWO_PI) * TWO_PI
    return BoundaryParametrization(w - shift, x.curve)
