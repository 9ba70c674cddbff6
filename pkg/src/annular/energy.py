"""The energy on configurations (x1, x2, rho) and its derivatives.

A configuration is a pair of monotone boundary parametrizations together
with a conformal modulus.  For rho > 0 the energy is the Dirichlet energy
of the harmonic annulus spanning ``x1`` (outer circle) and ``x2`` (inner
circle); at rho = 0 it is the sum of the two disc energies.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from . import boundary as bd
from .errors import DegenerateModulus, InvalidModulus
from .grid import CylinderGrid, DiscGrid, SurfaceField, d_theta
from .harmonic import harmonic_extension, jacobi_field
from .manifold import AmbientManifold


@dataclass(frozen=True)
class Settings:
    """Discretization and solver parameters shared along a computation."""

    ns: int = 65
    nr: int = 33
    tol: float = 1e-10
    max_iter: int = 200
    damping0: float = 1.0

    def solver(self):
        return {"tol": self.tol, "max_iter": self.max_iter, "damping0": self.damping0}


def default_bound(curve) -> float:
    """Heuristic cone radius l = min(1, regularity radius / 2)."""
    return float(min(1.0, 0.5 * curve.regularity_radius()))


class Configuration:
    """A point (x1, x2, rho) of the configuration space.

    Harmonic fields are computed lazily and cached.  ``init`` optionally
    supplies previous fields (same grid shapes) as warm starts for
    manifold targets.
    """

    def __init__(self, x1: bd.BoundaryParametrization, x2: bd.BoundaryParametrization,
                 rho: float, manifold: Optional[AmbientManifold] = None,
                 settings: Optional[Settings] = None, l=None, anchors=None, init=None):
        rho = float(rho)
        if not 0.0 <= rho < 1.0:
            raise InvalidModulus(f"rho = {rho} is not in [0, 1)")
        if x1.n != x2.n:
            raise ValueError("both boundary maps must use the same angular grid")
        self.x1, self.x2, self.rho = x1, x2, rho
        self.manifold = manifold
        self.settings = settings or Settings()
        self.l = tuple(l) if l is not None else (default_bound(x1.curve), default_bound(x2.curve))
        # normalization targets: one point at rho > 0, three per side at rho = 0
        self.anchors = anchors
        self._init = init
        self._fields = None
        self._grid = None

    @property
    def ntheta(self) -> int:
        return self.x1.n

    @property
    def on_boundary_stratum(self) -> bool:
        return self.rho == 0.0

    def derive(self, x1=None, x2=None, rho=None, warm: bool = True) -> "Configuration":
        """New configuration with some parts replaced; fields seed warm starts."""
        rho = self.rho if rho is None else rho
        init = None
        if warm and self._fields is not None and (rho == 0.0) == (self.rho == 0.0):
            init = self._fields
        return Configuration(x1 or self.x1, x2 or self.x2, rho, self.manifold, self.settings,
                             self.l, self.anchors, init)

    def grid(self):
        if self._grid is None:
            s = self.settings
            if self.rho > 0:
                self._grid = CylinderGrid(self.rho, s.ns, self.ntheta)
            else:
                self._grid = DiscGrid(s.nr, self.ntheta)
        return self._grid

    def fields(self):
        """The harmonic annulus field, or the pair of disc fields at rho = 0."""
        if self._fields is None:
            g = self.grid()
            opts = self.settings.solver()
            M = self.manifold
            if self.rho > 0:
                init = self._init if isinstance(self._init, SurfaceField) else None
                self._fields = harmonic_extension(g, self.x1, self.x2, M, init, **opts)
            else:
                inits = self._init if isinstance(self._init, tuple) else (None, None)
                self._fields = (harmonic_extension(g, self.x1, None, M, inits[0], **opts),
                                harmonic_extension(g, self.x2, None, M, inits[1], **opts))
            self._init = None
        return self._fields

    def is_normalized(self, tol: float = 1e-9) -> bool:
        if self.anchors is None:
            return True
        if self.rho > 0:
            return abs(self.x1.w[0] - self.anchors[0]) < tol
        return all(abs(x.w[0] - a[0]) < tol for x, a in zip((self.x1, self.x2), self.anchors))

    def __repr__(self):
        return f"Configuration(rho={self.rho:.6g}, ntheta={self.ntheta})"


def _inner(F: SurfaceField, u, v):
    return F.inner(u, v)


def _dirichlet_parts(F: SurfaceField):
    """(radial part, angular part) of the energy, each with the factor 1/2."""
    g = F.grid
    Fr, Ft = F.derivatives()
    er = _inner(F, Fr, Fr)
    et = _inner(F, Ft, Ft)
    if isinstance(g, DiscGrid):
        et = et / g.r[:, None] ** 2
    return 0.5 * g.integrate(er), 0.5 * g.integrate(et)


def dirichlet_energy(F: SurfaceField) -> float:
    a, b = _dirichlet_parts(F)
    return a + b


def energy(c: Configuration) -> float:
    """Dirichlet energy of the harmonic extension (two-disc sum at rho = 0)."""
    f = c.fields()
    if c.rho > 0:
        return dirichlet_energy(f)
    return dirichlet_energy(f[0]) + dirichlet_energy(f[1])


def denergy_rho(c: Configuration, method: str = "envelope") -> float:
    """Derivative of the energy in rho at fixed boundary maps.

    ``envelope`` uses ``(E_s - E_theta) / (rho |ln rho|)``, the derivative
    of the cylinder energy under stretching of its length.  ``radial``
    integrates ``(|F_r|^2 - |F_theta|^2 / r^2) / (2 (1 - rho))`` over
    ``[rho, 1] x [0, 2pi]`` in dr dtheta.  The two agree for harmonic maps
    because the theta-mean of the real part of the Hopf differential is
    constant in s.

    Raises
    ------
    DegenerateModulus
        At rho = 0.
    """
    if c.rho == 0.0:
        raise DegenerateModulus("the rho-derivative is undefined on the two-disc stratum")
    F = c.fields()
    g = F.grid
    if method == "envelope":
        es, et = _dirichlet_parts(F)
        return (es - et) / (c.rho * g.L)
    if method == "radial":
        Fs, Ft = F.derivatives()
        dens = (_inner(F, Fs, Fs) - _inner(F, Ft, Ft)) * np.exp(-g.s)[:, None]
        return 0.5 * g.integrate(dens) / (1.0 - c.rho)
    raise ValueError(f"unknown method {method!r}")


def boundary_gradient(c: Configuration, side: int) -> np.ndarray:
    """Density G_i with first variation  sum_j dtheta G_i(theta_j) phi_j.

    G_i is the pairing of the outward normal derivative of the harmonic
    extension with the curve tangent gamma_i'(w_i).
    """
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    x = c.x1 if side == 1 else c.x2
    tang = x.tangents()
    f = c.fields()
    if c.rho > 0:
        Fs = f.grid.d_radial(f.values)
        if side == 1:
            return _inner(f, Fs[-1], tang)
        return -_inner(f, Fs[0], tang)
    F = f[side - 1]
    Fr = F.grid.d_radial(F.values)
    return _inner(F, Fr[-1], tang)


def _lp_matrix(n):
    A = np.zeros((n, n))
    idx = np.arange(n - 1)
    A[idx, idx] = 1.0
    A[idx, idx + 1] = -1.0
    A[n - 1, n - 1] = 1.0
    A[n - 1, 0] = -1.0
    return A


def cone_lp(G, w, l: float, dtheta: Optional[float] = None):
    """Maximize  -sum dtheta G phi  over admissible phi with |phi| <= l.

    Admissible means w + phi weakly monotone with the implicit wrap
    ``w(2pi) = w(0) + 2pi``.  Returns ``(value, phi)``.
    """
    G = np.asarray(G, dtype=float)
    w = np.asarray(w, dtype=float)
    n = len(G)
    dtheta = 2 * np.pi / n if dtheta is None else dtheta
    if not np.any(G):
        return 0.0, np.zeros(n)
    steps = np.diff(np.append(w, w[0] + 2 * np.pi))
    # round-off in w can violate the cone by a hair; phi = 0 must stay feasible
    b = np.maximum(steps, 0.0)
    res = linprog(dtheta * G, A_ub=_lp_matrix(n), b_ub=b, bounds=[(-l, l)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(f"criticality LP failed: {res.message}")
    return max(0.0, float(-res.fun)), np.asarray(res.x)


@dataclass
class CriticalityReport:
    g1: float
    g2: float
    g3: float
    G1: np.ndarray = field(repr=False)
    G2: np.ndarray = field(repr=False)
    phi1: np.ndarray = field(repr=False)
    phi2: np.ndarray = field(repr=False)
    drho: float = 0.0
    hopf_defect: float = float("nan")

    @property
    def g(self) -> float:
        return self.g1 + self.g2 + self.g3


def criticality(c: Configuration, l=None, hopf: bool = False) -> CriticalityReport:
    """The measures g1, g2 (cone LP) and g3 = |rho dE/drho|."""
    l1, l2 = c.l if l is None else l
    G1 = boundary_gradient(c, 1)
    G2 = boundary_gradient(c, 2)
    g1, phi1 = cone_lp(G1, c.x1.w, l1)
    g2, phi2 = cone_lp(G2, c.x2.w, l2)
    drho = denergy_rho(c) if c.rho > 0 else 0.0
    g3 = abs(c.rho * drho)
    rep = CriticalityReport(g1, g2, g3, G1, G2, phi1, phi2, drho)
    if hopf:
        f = c.fields()
        if c.rho > 0:
            rep.hopf_defect = hopf_differential(f)["defect"]
        else:
            rep.hopf_defect = max(hopf_differential(f[0])["defect"], hopf_differential(f[1])["defect"])
    return rep


def hopf_differential(F: SurfaceField) -> dict:
    """Hopf differential r^2|F_r|^2 - |F_theta|^2 - 2i r <F_r, F_theta> per node.

    Returns ``field`` (complex, rows x ntheta), ``defect`` (L^2 norm over
    the parameter domain: ds dtheta on the cylinder, area on the disc) and
    ``real_const_dev`` (L^2 distance to the mean real value).
    """
    g = F.grid
    Fr, Ft = F.derivatives()
    if isinstance(g, DiscGrid):
        Fr = Fr * g.r[:, None, None]
    phi = _inner(F, Fr, Fr) - _inner(F, Ft, Ft) - 2j * _inner(F, Fr, Ft)
    area = g.integrate(np.ones(phi.shape))
    defect = np.sqrt(g.integrate(np.abs(phi) ** 2))
    mean = g.integrate(phi.real) / area
    dev = np.sqrt(g.integrate(np.abs(phi - mean) ** 2))
    return {"field": phi, "defect": float(defect), "real_const_dev": float(dev), "mean": float(mean)}


def _bilinear(F: SurfaceField, J: SurfaceField) -> float:
    g = F.grid
    Fr, Ft = F.derivatives()
    Jr, Jt = J.derivatives()
    dens = _inner(F, Fr, Jr)
    tt = _inner(F, Ft, Jt)
    if isinstance(g, DiscGrid):
        tt = tt / g.r[:, None] ** 2
    return g.integrate(dens + tt)


def directional_derivative(c: Configuration, xi) -> float:
    """First variation along (xi1, xi2) by the volume formula  int <dF, dJ>.

    ``xi`` is a pair of :class:`TangentVariation` (or ``None``); J is the
    Jacobi field with the corresponding boundary values.
    """
    xi1, xi2 = xi
    f = c.fields()
    if c.rho > 0:
        if xi1 is None and xi2 is None:
            return 0.0
        J = jacobi_field(f, xi1, xi2, c.manifold, c.x1, c.x2)
        return _bilinear(f, J)
    total = 0.0
    for F, x, v in zip(f, (c.x1, c.x2), (xi1, xi2)):
        if v is None:
            continue
        J = jacobi_field(F, v, None, c.manifold, x)
        total += _bilinear(F, J)
    return total


def feasibility(c: Configuration) -> dict:
    """The bound rho/(1-rho) <= E / (pi d^2) with d the chordal curve distance.

    Integrating |F_r| along radii gives E >= pi d^2 / ln(1/rho), and
    ln(1/rho) <= (1 - rho)/rho.
    """
    d = c.x1.curve.min_distance(c.x2.curve)
    lhs = c.rho / (1.0 - c.rho)
    rhs = energy(c) / (np.pi * d * d) if d > 0 else np.inf
    return {"lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs * (1 + 1e-9)), "c": 1.0 / (np.pi * d * d) if d > 0 else np.inf}
