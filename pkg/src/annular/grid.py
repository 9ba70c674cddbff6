"""Spectral grids on the annulus and the disc, quadrature and slices.

The annulus A_rho is mapped conformally to the flat cylinder
``[ln rho, 0] x R/2pi`` by ``s = ln r``.  Harmonicity and the Dirichlet
energy are conformally invariant, so all PDE work on the annulus is done
on the cylinder with the constant-coefficient Laplacian
``d^2/ds^2 + d^2/dtheta^2``.

Discretization is Fourier in theta and Chebyshev collocation in the
radial variable.  On the cylinder the Chebyshev-Lobatto nodes are mapped
to ``[ln rho, 0]``; on the disc the radial nodes are the positive half
of an odd-degree Chebyshev grid on ``[-1, 1]`` (no node at the center),
using the parity ``F(-r, theta) = F(r, theta + pi)`` of each Fourier mode.
Both give spectral accuracy for smooth fields.

Field arrays have shape ``(rows, ntheta, k)`` with rows ordered by
increasing radius: on the cylinder row 0 is the inner circle ``r = rho``
and the last row is the outer circle ``r = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import InvalidModulus, SliceOutOfRange

TWO_PI = 2 * np.pi


# Chebyshev machinery ------------------------------------------------------


@lru_cache(maxsize=None)
def _cheb_ld(n: int):
    # extended precision keeps the roundoff floor of D @ D near the data floor
    j = np.arange(n + 1)
    x = np.cos(np.pi * j.astype(np.longdouble) / n)
    c = np.where((j == 0) | (j == n), 2.0, 1.0).astype(np.longdouble) * (-1.0) ** j
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1 / c) / (X + np.eye(n + 1, dtype=np.longdouble))
    D -= np.diag(D.sum(axis=1))
    return x, D


@lru_cache(maxsize=None)
def _cheb(n: int):
    """Lobatto nodes x_j = cos(j pi / n) (descending), D and D^2."""
    x, D = _cheb_ld(n)
    return x.astype(float), D.astype(float), (D @ D).astype(float)


def _bary_weights(n: int) -> np.ndarray:
    lam = (-1.0) ** np.arange(n + 1)
    lam[0] *= 0.5
    lam[-1] *= 0.5
    return lam


def interpolation_matrix(nodes, bary, y) -> np.ndarray:
    """Rows evaluate the polynomial interpolant on ``nodes`` at points ``y``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    diff = y[:, None] - nodes[None, :]
    hit = diff == 0.0
    diff[hit] = 1.0
    terms = bary[None, :] / diff
    M = terms / terms.sum(axis=1, keepdims=True)
    rows = np.any(hit, axis=1)
    M[rows] = hit[rows].astype(float)
    return M


def _poly_weights(n: int, weight: str) -> np.ndarray:
    """Integrals of the Lagrange basis on the degree-n Lobatto grid.

    ``weight="one"`` gives int_{-1}^{1} l_j dx; ``weight="abs"`` gives
    int_{-1}^{1} l_j |x| dx.  Both are exact by Gauss-Legendre.
    """
    x = _cheb(n)[0]
    lam = _bary_weights(n)
    g, gw = np.polynomial.legendre.leggauss(n + 3)
    if weight == "one":
        return gw @ interpolation_matrix(x, lam, g)
    half = 0.5 * (g + 1.0)
    hw = 0.5 * gw
    plus = (hw * half) @ interpolation_matrix(x, lam, half)
    minus = (hw * half) @ interpolation_matrix(x, lam, -half)
    return plus + minus


@lru_cache(maxsize=None)
def _cylinder_ops(ns: int):
    n = ns - 1
    x, D, D2 = _cheb(n)
    # ascending order: x = -cos(j pi / n)
    x = x[::-1].copy()
    D = D[::-1, ::-1].copy()
    D2 = D2[::-1, ::-1].copy()
    lam, V = np.linalg.eig(D2[1:-1, 1:-1])
    order = np.argsort(lam.real)
    lam = lam.real[order]
    V = V.real[:, order]
    Vi = np.linalg.inv(V)
    bcols = D2[1:-1][:, [0, n]]
    wq = _poly_weights(n, "one")[::-1].copy()
    bary = _bary_weights(n)[::-1].copy()
    for a in (x, D, D2, lam, V, Vi, bcols, wq, bary):
        a.setflags(write=False)
    return x, D, D2, lam, V, Vi, bcols, wq, bary


@lru_cache(maxsize=None)
def _disc_ops(nr: int, ntheta: int):
    n = 2 * nr - 1
    x, D, D2 = _cheb(n)
    pos = np.arange(nr)[::-1]          # ascending radii from the descending grid
    mirror = n - pos
    r = x[pos].copy()
    ops = {}
    for parity in (1, -1):
        D1p = D[np.ix_(pos, pos)] + parity * D[np.ix_(pos, mirror)]
        D2p = D2[np.ix_(pos, pos)] + parity * D2[np.ix_(pos, mirror)]
        ops[parity] = (D1p, D2p)
    modes = np.arange(ntheta // 2 + 1)
    inv = np.empty((len(modes), nr - 1, nr - 1))
    bcol = np.empty((len(modes), nr - 1))
    lap = np.empty((len(modes), nr, nr))
    for m in modes:
        D1p, D2p = ops[1 if m % 2 == 0 else -1]
        Lm = D2p + D1p / r[:, None] - np.diag(m * m / r ** 2)
        lap[m] = Lm
        inv[m] = np.linalg.inv(Lm[:-1, :-1])
        bcol[m] = Lm[:-1, -1]
    W = _poly_weights(n, "abs")
    wq = W[pos].copy()
    lam = _bary_weights(n)
    return dict(r=r, ops=ops, inv=inv, bcol=bcol, lap=lap, wq=wq, nodes=x, bary=lam)


def _check_ntheta(ntheta: int):
    if ntheta < 8 or ntheta & (ntheta - 1):
        raise ValueError("N_theta must be a power of two, at least 8")


def _rfft_modes(ntheta):
    return np.arange(ntheta // 2 + 1)


def d_theta(F, order: int = 1):
    """Spectral theta-derivative along axis 1 (Nyquist dropped for odd orders)."""
    n = F.shape[1]
    m = _rfft_modes(n)
    Fh = np.fft.rfft(F, axis=1)
    mult = (1j * m) ** order
    if order % 2 == 1:
        mult = mult.copy()
        mult[-1] = 0.0
    shape = [1] * F.ndim
    shape[1] = len(m)
    return np.fft.irfft(Fh * mult.reshape(shape), n=n, axis=1)


# grids -----------------------------------------------------------------------


class CylinderGrid:
    """Chebyshev x Fourier grid on the cylinder ``[ln rho, 0] x [0, 2pi)``.

    Parameters
    ----------
    rho : float
        Conformal modulus in (0, 1).
    ns : int
        Number of radial nodes (Chebyshev-Lobatto, including both circles).
    ntheta : int
        Number of angular nodes, a power of two.
    """

    kind = "cylinder"

    def __init__(self, rho: float, ns: int = 65, ntheta: int = 256):
        rho = float(rho)
        if not 0.0 < rho < 1.0:
            raise InvalidModulus(f"rho = {rho} is not in (0, 1)")
        if ns < 3:
            raise ValueError("N_s must be at least 3")
        _check_ntheta(ntheta)
        self.rho = rho
        self.ns = int(ns)
        self.ntheta = int(ntheta)
        self.L = -np.log(rho)
        x, D, D2, lam, V, Vi, bcols, wq, bary = _cylinder_ops(self.ns)
        self._x = x
        self._lam, self._V, self._Vi, self._bcols, self._bary = lam, V, Vi, bcols, bary
        self.s = 0.5 * self.L * (x - 1.0)
        self.s[0] = -self.L
        self.s[-1] = 0.0
        self.Ds = (2.0 / self.L) * D
        self.Dss = (2.0 / self.L) ** 2 * D2
        self.wq = 0.5 * self.L * wq
        self.theta = TWO_PI * np.arange(self.ntheta) / self.ntheta
        self.dtheta = TWO_PI / self.ntheta

    rows = property(lambda self: self.ns)
    outer_row = property(lambda self: self.ns - 1)
    inner_row = 0

    @property
    def radii(self):
        return np.exp(self.s)

    @property
    def interior(self):
        return slice(1, self.ns - 1)

    def __repr__(self):
        return f"CylinderGrid(rho={self.rho:.6g}, ns={self.ns}, ntheta={self.ntheta})"

    # operators

    def d_radial(self, F):
        """d/ds along the radial axis."""
        return np.tensordot(self.Ds, F, axes=(1, 0))

    def laplacian(self, F):
        """Cylinder Laplacian F_ss + F_thetatheta at every node."""
        return np.tensordot(self.Dss, F, axes=(1, 0)) + d_theta(F, 2)

    def solve_poisson(self, S, inner, outer, refine: int = 1):
        """Solve ``F_ss + F_tt = S`` on interior rows with Dirichlet circles.

        Parameters
        ----------
        S : array (ns, ntheta, k)
            Source; only interior rows are read.
        inner, outer : array (ntheta, k)
            Values on ``r = rho`` and ``r = 1``.
        refine : int
            Steps of iterative refinement against the collocation operator.
        """
        F = self._solve(S, inner, outer)
        for _ in range(refine):
            res = S[1:-1] - self.laplacian(F)[1:-1]
            zero = np.zeros_like(inner)
            full = np.zeros_like(S)
            full[1:-1] = res
            F += self._solve(full, zero, zero)
        return F

    def _solve(self, S, inner, outer):
        sc = (2.0 / self.L) ** 2
        m = _rfft_modes(self.ntheta)
        Sh = np.fft.rfft(S[1:-1], axis=1)
        bi = np.fft.rfft(inner, axis=0)
        bo = np.fft.rfft(outer, axis=0)
        rhs = Sh - sc * (self._bcols[:, 0, None, None] * bi[None] + self._bcols[:, 1, None, None] * bo[None])
        t = np.tensordot(self._Vi, rhs, axes=(1, 0))
        t /= (sc * self._lam[:, None] - m[None, :] ** 2)[:, :, None]
        u = np.tensordot(self._V, t, axes=(1, 0))
        F = np.empty((self.ns, self.ntheta, S.shape[-1]))
        F[1:-1] = np.fft.irfft(u, n=self.ntheta, axis=1)
        F[0] = inner
        F[-1] = outer
        return F

    def integrate(self, density):
        """Integral over the cylinder of a nodal density (ns, ntheta)."""
        return float(np.einsum("j,ji->", self.wq, density) * self.dtheta)

    def interpolate_rows(self, F, s):
        """Spectral interpolation in s of a field at arbitrary s values."""
        M = interpolation_matrix(self.s, self._bary, s)
        return np.tensordot(M, F, axes=(1, 0))


class DiscGrid:
    """Chebyshev x Fourier grid on the unit disc.

    The radial nodes are the positive half of the degree ``2*nr - 1``
    Chebyshev-Lobatto grid on [-1, 1]: clustered toward r = 1, with the
    center itself not a node.  Each Fourier mode m has parity
    ``(-1)^m`` under r -> -r, which closes the collocation system at the
    center without a pole condition.  Center values are recovered by
    interpolation of the m = 0 mode (see :meth:`center_value`).
    """

    kind = "disc"
    rho = 0.0

    def __init__(self, nr: int = 33, ntheta: int = 256):
        if nr < 3:
            raise ValueError("N_r must be at least 3")
        _check_ntheta(ntheta)
        self.nr = int(nr)
        self.ntheta = int(ntheta)
        self._ops = _disc_ops(self.nr, self.ntheta)
        self.r = self._ops["r"]
        self.wq = self._ops["wq"]
        self.theta = TWO_PI * np.arange(self.ntheta) / self.ntheta
        self.dtheta = TWO_PI / self.ntheta

    rows = property(lambda self: self.nr)
    outer_row = property(lambda self: self.nr - 1)

    @property
    def radii(self):
        return self.r

    @property
    def interior(self):
        return slice(0, self.nr - 1)

    def __repr__(self):
        return f"DiscGrid(nr={self.nr}, ntheta={self.ntheta})"

    def _modewise(self, F, which):
        Fh = np.fft.rfft(F, axis=1)
        out = np.empty_like(Fh)
        even = slice(0, None, 2)
        odd = slice(1, None, 2)
        for sl, parity in ((even, 1), (odd, -1)):
            mat = self._ops["ops"][parity][which]
            out[:, sl] = np.tensordot(mat, Fh[:, sl], axes=(1, 0))
        return out

    def d_radial(self, F):
        return np.fft.irfft(self._modewise(F, 0), n=self.ntheta, axis=1)

    def laplacian(self, F):
        """Polar Laplacian F_rr + F_r / r + F_tt / r^2 at every node."""
        Fh = np.fft.rfft(F, axis=1)
        out = np.einsum("mij,jmk->imk", self._ops["lap"], Fh)
        return np.fft.irfft(out, n=self.ntheta, axis=1)

    def solve_poisson(self, S, outer, refine: int = 1):
        """Solve ``Delta F = S`` in the disc with ``F = outer`` on r = 1."""
        F = self._solve(S, outer)
        for _ in range(refine):
            full = np.zeros_like(S)
            full[:-1] = S[:-1] - self.laplacian(F)[:-1]
            F += self._solve(full, np.zeros_like(outer))
        return F

    def _solve(self, S, outer):
        Sh = np.fft.rfft(S[:-1], axis=1)
        bo = np.fft.rfft(outer, axis=0)
        rhs = Sh - self._ops["bcol"].T[:, :, None] * bo[None]
        u = np.einsum("mij,jmk->imk", self._ops["inv"], rhs)
        F = np.empty((self.nr, self.ntheta, S.shape[-1]))
        F[:-1] = np.fft.irfft(u, n=self.ntheta, axis=1)
        F[-1] = outer
        return F

    def integrate(self, density):
        """Area integral over the disc of a nodal density (nr, ntheta)."""
        return float(np.einsum("j,ji->", self.wq, density) * self.dtheta)

    def _even_extension(self, f):
        n = 2 * self.nr - 1
        full = np.empty((n + 1,) + f.shape[1:])
        pos = np.arange(self.nr)[::-1]
        full[pos] = f
        full[n - pos] = f
        return full

    def center_value(self, F):
        """Value at r = 0 from the theta-mean (the only mode not vanishing there)."""
        mean = F.mean(axis=1)
        full = self._even_extension(mean)
        M = interpolation_matrix(self._ops["nodes"], self._ops["bary"], [0.0])
        return (M @ full.reshape(len(full), -1)).reshape(mean.shape[1:])

    def interpolate_rows(self, F, r):
        """Interpolate at radii in (0, 1] using the mode parities."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        Fh = np.fft.rfft(F, axis=1)
        nodes, bary = self._ops["nodes"], self._ops["bary"]
        M = interpolation_matrix(nodes, bary, r)
        n = 2 * self.nr - 1
        pos = np.arange(self.nr)[::-1]
        out = np.empty((len(r),) + Fh.shape[1:], dtype=complex)
        for start, parity in ((0, 1), (1, -1)):
            # fold the mirror columns back onto the stored rows
            Mp = M[:, pos] + parity * M[:, n - pos]
            out[:, start::2] = np.tensordot(Mp, Fh[:, start::2], axes=(1, 0))
        return np.fft.irfft(out, n=self.ntheta, axis=1)


def build_grid(rho: float, N_s: int = 65, N_theta: int = 256) -> CylinderGrid:
    """Cylinder grid for the annulus A_rho.

    Raises
    ------
    InvalidModulus
        If rho is not in (0, 1).
    """
    return CylinderGrid(rho, N_s, N_theta)


def build_disc_grid(N_r: int = 33, N_theta: int = 256) -> DiscGrid:
    return DiscGrid(N_r, N_theta)


def integrate(field_density, grid) -> float:
    return grid.integrate(np.asarray(field_density, dtype=float))


# fields ------------------------------------------------------------------------


@dataclass
class SurfaceField:
    """A grid-sampled map into R^k (on the manifold for manifold fields)."""

    values: np.ndarray
    grid: object
    manifold: Optional[object] = None
    info: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.values.shape[-1]

    def inner(self, u, v):
        if self.manifold is None:
            return np.sum(u * v, axis=-1)
        return self.manifold.inner(u, v)

    def derivatives(self):
        """(radial derivative, theta derivative) at every node."""
        return self.grid.d_radial(self.values), d_theta(self.values)

    def outer_trace(self):
        return self.values[-1]

    def inner_trace(self):
        return self.values[0]


def radial_slice_energy(F: SurfaceField, tau: float) -> float:
    """Integral over theta of |dF/dtheta|^2 on the circle |z| = tau.

    Raises
    ------
    SliceOutOfRange
        If tau is not strictly inside the annulus (or the disc).
    """
    g = F.grid
    lo = g.rho
    if not lo < tau < 1.0:
        raise SliceOutOfRange(f"tau = {tau} outside ({lo}, 1)")
    if g.kind == "cylinder":
        row = g.interpolate_rows(F.values, np.log(tau))[0]
    else:
        row = g.interpolate_rows(F.values, tau)[0]
    ft = d_theta(row[None])[0]
    return float(np.sum(F.inner(ft, ft)) * g.dtheta)


def courant_lebesgue_check(F: SurfaceField, delta: float, energy: float) -> dict:
    """Find a grid radius tau in (delta, sqrt(delta)) whose slice energy obeys
    ``slice <= 4 E / ln(1/delta)``.

    Returns a dict with ``ok``, the best ``tau``, its ``slice`` energy and
    the ``bound``; ``ok`` is False when no grid radius lies in the window.
    """
    g = F.grid
    radii = g.radii
    hi = np.sqrt(delta)
    cand = np.where((radii > delta) & (radii < hi) & (radii > g.rho) & (radii < 1.0))[0]
    bound = 4.0 * energy / np.log(1.0 / delta)
    if len(cand) == 0:
        return {"ok": False, "tau": float("nan"), "slice": float("nan"), "bound": bound, "nodes": 0}
    ft = d_theta(F.values[cand])
    energies = np.sum(F.inner(ft, ft), axis=1) * g.dtheta
    j = int(np.argmin(energies))
    return {"ok": bool(energies[j] <= bound), "tau": float(radii[cand[j]]),
            "slice": float(energies[j]), "bound": float(bound), "nodes": int(len(cand))}
