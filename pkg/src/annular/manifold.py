"""Target manifolds embedded in R^k.

Every operation is vectorized over leading axes: points and vectors are
arrays of shape ``(..., k)``.  Three closed-form kinds are built in
(Euclidean space, the unit 3-sphere in R^4 and the hyperboloid model of
hyperbolic 3-space in Minkowski R^4); a ``custom`` kind wraps user
callbacks for the nearest-point projection and the second fundamental
form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import OutOfTube

_KINDS = ("euclidean", "sphere3", "hyperbolic3", "custom")


def _dot(u, v):
    return np.sum(u * v, axis=-1)


def _lorentz(u, v):
    return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]


@dataclass(frozen=True)
class AmbientManifold:
    """An embedded target manifold N in R^k.

    Parameters
    ----------
    kind : str
        One of ``euclidean``, ``sphere3``, ``hyperbolic3``, ``custom``.
    ambient_dim : int
        Dimension k of the ambient space.
    curvature_upper_bound : float
        Upper bound kappa for the sectional curvature of N.
    projection_tube_radius : float
        Radius of the neighbourhood of N where ``project`` is trusted.
    projection, second_form : callable, optional
        Callbacks for the custom kind: ``projection(p) -> p'`` and
        ``second_form(p, u, v) -> II_p(u, v)``, both vectorized.
    injectivity_radius : float, optional
        User-supplied injectivity radius; recorded but otherwise unused.
    """

    kind: str
    ambient_dim: int
    curvature_upper_bound: float
    projection_tube_radius: float
    projection: Optional[Callable] = None
    second_form: Optional[Callable] = None
    injectivity_radius: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if self.ambient_dim < 2:
            raise ValueError("ambient_dim must be at least 2")
        if self.kind == "custom" and (self.projection is None or self.second_form is None):
            raise ValueError("custom manifolds need projection and second_form callbacks")
        if not self.projection_tube_radius > 0:
            raise ValueError("projection_tube_radius must be positive")

    # metric ------------------------------------------------------------

    @property
    def is_flat(self) -> bool:
        return self.kind == "euclidean"

    def inner(self, u, v):
        """Metric pairing of (tangent) vectors, summed over the last axis."""
        if self.kind == "hyperbolic3":
            return _lorentz(u, v)
        return _dot(u, v)

    # projection --------------------------------------------------------

    def distance_to_manifold(self, p):
        """Ambient distance from p to N (a surrogate for hyperbolic3)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "euclidean":
            return np.zeros(p.shape[:-1])
        if self.kind == "sphere3":
            return np.abs(np.linalg.norm(p, axis=-1) - 1.0)
        if self.kind == "hyperbolic3":
            q = -_lorentz(p, p)
            with np.errstate(invalid="ignore"):
                dist = np.abs(np.sqrt(np.where(q > 0, q, np.nan)) - 1.0)
            return np.where((q > 0) & (p[..., 0] > 0), dist, np.inf)
        return np.linalg.norm(self.projection(p) - p, axis=-1)

    def project(self, p):
        """Nearest-point projection onto N.

        Raises
        ------
        OutOfTube
            If some point lies farther than ``projection_tube_radius``.
        """
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.ambient_dim:
            raise ValueError(f"expected ambient dimension {self.ambient_dim}, got {p.shape[-1]}")
        if self.kind == "euclidean":
            return p.copy()
        dist = self.distance_to_manifold(p)
        worst = float(np.max(dist)) if dist.size else 0.0
        if not worst <= self.projection_tube_radius:
            raise OutOfTube(f"point at distance {worst:.3g} outside tube radius {self.projection_tube_radius}")
        if self.kind == "sphere3":
            nrm = np.linalg.norm(p, axis=-1, keepdims=True)
            if np.any(nrm == 0):
                raise OutOfTube("the origin has no nearest point on the sphere")
            return p / nrm
        if self.kind == "hyperbolic3":
            return p / np.sqrt(-_lorentz(p, p))[..., None]
        return np.asarray(self.projection(p), dtype=float)

    def constraint_residual(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "sphere3":
            return np.abs(_dot(p, p) - 1.0)
        if self.kind == "hyperbolic3":
            return np.abs(_lorentz(p, p) + 1.0)
        if self.kind == "custom":
            return np.linalg.norm(self.projection(p) - p, axis=-1)
        return np.zeros(p.shape[:-1])

    # tangent spaces ----------------------------------------------------

    def _custom_jacobian(self, p, v, eps=1e-6):
        # directional derivative of the projection, which is P_T on N
        return (self.projection(p + eps * v) - self.projection(p - eps * v)) / (2 * eps)

    def tangent_project(self, p, v):
        """Metric-orthogonal projection of v onto T_pN."""
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean":
            return v.copy()
        if self.kind == "sphere3":
            return v - _dot(v, p)[..., None] * p
        if self.kind == "hyperbolic3":
            return v + _lorentz(v, p)[..., None] * p
        return self._custom_jacobian(p, v)

    def dtangent_project(self, p, j, v):
        """Derivative of ``p -> tangent_project(p, v)`` in direction j."""
        if self.kind == "euclidean":
            return np.zeros_like(v)
        if self.kind == "sphere3":
            return -_dot(v, j)[..., None] * p - _dot(v, p)[..., None] * j
        if self.kind == "hyperbolic3":
            return _lorentz(v, j)[..., None] * p + _lorentz(v, p)[..., None] * j
        eps = 1e-4
        return (self._custom_jacobian(p + eps * j, v) - self._custom_jacobian(p - eps * j, v)) / (2 * eps)

    def second_fundamental_form(self, p, u, v):
        """II_p(u, v); non-tangent inputs are tangentially projected first."""
        p = np.asarray(p, dtype=float)
        u = self.tangent_project(p, np.asarray(u, dtype=float))
        v = self.tangent_project(p, np.asarray(v, dtype=float))
        if self.kind == "euclidean":
            return np.zeros(np.broadcast_shapes(p.shape, u.shape, v.shape))
        if self.kind == "sphere3":
            return -_dot(u, v)[..., None] * p
        if self.kind == "hyperbolic3":
            return _lorentz(u, v)[..., None] * p
        return np.asarray(self.second_form(p, u, v), dtype=float)

    # distances ---------------------------------------------------------

    def geodesic_distance(self, p, q):
        """Exact geodesic distance for built-ins, chordal for custom."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind == "sphere3":
            # atan2 form is accurate for both nearby and antipodal points
            return 2 * np.arctan2(np.linalg.norm(p - q, axis=-1), np.linalg.norm(p + q, axis=-1))
        if self.kind == "hyperbolic3":
            # chord in the Minkowski metric: cosh(d) = 1 + |p-q|_L^2 / 2
            chord2 = np.maximum(_lorentz(p - q, p - q), 0.0)
            return 2 * np.arcsinh(np.sqrt(chord2) / 2)
        return np.linalg.norm(p - q, axis=-1)


def euclidean(k: int = 3) -> AmbientManifold:
    return AmbientManifold("euclidean", k, 0.0, np.inf)


def sphere3(tube_radius: float = 1.0) -> AmbientManifold:
    return AmbientManifold("sphere3", 4, 1.0, tube_radius)


def hyperbolic3(tube_radius: float = 0.5) -> AmbientManifold:
    return AmbientManifold("hyperbolic3", 4, -1.0, tube_radius)


def custom(ambient_dim, projection, second_form, kappa, tube_radius=0.5, injectivity_radius=None):
    return AmbientManifold("custom", ambient_dim, float(kappa), tube_radius,
                           projection=projection, second_form=second_form,
                           injectivity_radius=injectivity_radius)


def from_spec(kind: str, ambient_dim: Optional[int] = None, tube_radius: Optional[float] = None) -> AmbientManifold:
    """Build a built-in manifold from config values."""
    if kind == "euclidean":
        return euclidean(3 if ambient_dim is None else int(ambient_dim))
    if kind == "sphere3":
        return sphere3() if tube_radius is None else sphere3(tube_radius)
    if kind == "hyperbolic3":
        return hyperbolic3() if tube_radius is None else hyperbolic3(tube_radius)
    raise ValueError(f"unknown manifold kind {kind!r}")


def project(M: AmbientManifold, p):
    return M.project(p)


def second_fundamental_form(M: AmbientManifold, p, u, v):
    return M.second_fundamental_form(p, u, v)


def geodesic_distance(M: AmbientManifold, p, q):
    return M.geodesic_distance(p, q)


def validate_c1_enclosure(M: AmbientManifold, curves, center, r: float, samples: int = 256) -> dict:
    """Check that all curves lie in the geodesic ball B(center, r).

    For positive curvature bound kappa the radius must also satisfy
    ``r < pi / (2 sqrt(kappa))``.  Returns ``{"ok", "margin"}`` where the
    margin is the smallest slack among the constraints.
    """
    u = 2 * np.pi * np.arange(samples) / samples
    center = np.asarray(center, dtype=float)
    far = 0.0
    for curve in curves:
        pts = curve.eval(u)
        far = max(far, float(np.max(M.geodesic_distance(pts, center))))
    margins = [r - far]
    if M.curvature_upper_bound > 0:
        margins.append(np.pi / (2 * np.sqrt(M.curvature_upper_bound)) - r)
    margin = float(min(margins))
    return {"ok": bool(margin > 0), "margin": margin}
