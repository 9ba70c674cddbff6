"""Harmonic extensions into R^k and into embedded manifolds, Jacobi fields.

A map F into N is harmonic when its tension ``P_T(Delta F) = Delta F -
II(dF, dF)`` vanishes.  The manifold solver alternates preconditioned
relaxation steps ``F <- project(F + omega (-Delta)^{-1} tau(F))`` with
Newton steps on the linearized tension (the Jacobi operator), solved
matrix-free by GMRES with the flat Laplacian as preconditioner.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import NoConvergence
from .grid import CylinderGrid, DiscGrid, SurfaceField, d_theta
from .manifold import AmbientManifold, euclidean


def _trace(x):
    if hasattr(x, "points"):
        return np.asarray(x.points(), dtype=float)
    return np.asarray(x, dtype=float)


class _Problem:
    """Dirichlet problem on a grid: boundary rows, weights and solves."""

    def __init__(self, grid, outer, inner=None):
        self.grid = grid
        self.outer = outer
        self.inner = inner
        self.disc = isinstance(grid, DiscGrid)
        rows = grid.rows
        self.mask = np.zeros(rows, dtype=bool)
        self.mask[grid.interior] = True
        self.w = np.where(self.mask, grid.wq, 0.0)

    def poisson(self, S, zero_bc=False):
        g = self.grid
        k = S.shape[-1]
        outer = np.zeros((g.ntheta, k)) if zero_bc else self.outer
        if self.disc:
            return g.solve_poisson(S, outer)
        inner = np.zeros((g.ntheta, k)) if zero_bc else self.inner
        return g.solve_poisson(S, inner, outer)

    def set_boundary(self, F):
        F[-1] = self.outer
        if not self.disc:
            F[0] = self.inner
        return F

    def norm(self, V, M=None):
        """Discrete L^2 norm over interior rows; the metric of M if given."""
        sq = np.sum(V * V, axis=-1) if M is None else np.abs(M.inner(V, V))
        return float(np.sqrt(np.einsum("j,ji->", self.w, sq) * self.grid.dtheta))


def _dirichlet_problem(grid, x1, x2=None):
    x1 = _trace(x1)
    if isinstance(grid, DiscGrid):
        return _Problem(grid, x1)
    if x2 is None:
        raise ValueError("annulus problems need both traces")
    return _Problem(grid, x1, _trace(x2))


def harmonic_euclidean(x1, x2, grid: CylinderGrid) -> SurfaceField:
    """Componentwise harmonic extension on the annulus.

    ``x1`` is imposed on the outer circle r = 1 and ``x2`` on r = rho.
    """
    prob = _dirichlet_problem(grid, x1, x2)
    F = prob.poisson(np.zeros((grid.rows, grid.ntheta, prob.outer.shape[-1])))
    return SurfaceField(F, grid, None, {"solver": "spectral", "iterations": 0})


def harmonic_disc_euclidean(x, grid: DiscGrid) -> SurfaceField:
    """Componentwise harmonic extension into the unit disc."""
    prob = _dirichlet_problem(grid, x)
    F = prob.poisson(np.zeros((grid.rows, grid.ntheta, prob.outer.shape[-1])))
    return SurfaceField(F, grid, None, {"solver": "spectral", "iterations": 0})


# tension -------------------------------------------------------------------


def _derivs(F, grid):
    return grid.d_radial(F), d_theta(F)


def _tension_extrinsic(F, grid, M):
    """Delta F - II(dF, dF) in the coordinates of the grid."""
    lap = grid.laplacian(F)
    if M is None or M.is_flat:
        return lap
    Fr, Ft = _derivs(F, grid)
    II = M.second_fundamental_form(F, Fr, Fr)
    if isinstance(grid, DiscGrid):
        II = II + M.second_fundamental_form(F, Ft, Ft) / grid.r[:, None, None] ** 2
    else:
        II = II + M.second_fundamental_form(F, Ft, Ft)
    return lap - II


def tension_residual(F: SurfaceField, M: AmbientManifold = None) -> float:
    """Discrete L^2 norm of Delta F - II(dF, dF) over interior nodes.

    On the annulus the Laplacian is the cylinder one (``d_ss + d_tt``),
    i.e. the tension with respect to the flat cylinder metric, which is
    conformal to the annulus.
    """
    M = M if M is not None else F.manifold
    prob = _Problem(F.grid, F.values[-1], F.values[0])
    T = _tension_extrinsic(F.values, F.grid, M)
    return prob.norm(T, None if M is None or M.is_flat else M)


# manifold solver -------------------------------------------------------------


def _tangent_tension(F, prob, M):
    T = M.tangent_project(F, prob.grid.laplacian(F))
    T[~prob.mask] = 0.0
    return T


class _JacobiOperator:
    """Linearized tension ``J -> P_T Delta J + (DP_T[J]) Delta F`` on tangent fields.

    Unknowns are ambient vectors on interior rows; the tangential part is
    the Jacobi field and the normal part is pinned by an identity block.
    """

    def __init__(self, F, prob, M):
        self.F = F
        self.prob = prob
        self.M = M
        self.lapF = prob.grid.laplacian(F)
        mask = prob.mask
        self.shape = F[mask].shape
        self.n = int(np.prod(self.shape))

    def _full(self, v):
        J = np.zeros_like(self.F)
        J[self.prob.mask] = v.reshape(self.shape)
        return J

    def apply_field(self, J):
        """Linearized tension of a tangent field J (boundary rows included)."""
        M = self.M
        out = M.tangent_project(self.F, self.prob.grid.laplacian(J))
        out += M.dtangent_project(self.F, J, self.lapF)
        return out

    def matvec(self, v):
        V = self._full(v)
        J = self.M.tangent_project(self.F, V)
        out = self.apply_field(J) + (V - J)
        return out[self.prob.mask].ravel()

    def precondition(self, y):
        Y = self._full(y)
        T = self.M.tangent_project(self.F, Y)
        Z = self.prob.poisson(T, zero_bc=True)
        Z = self.M.tangent_project(self.F, Z) + (Y - T)
        return Z[self.prob.mask].ravel()

    def solve(self, rhs_field, rtol=1e-10, maxiter=400):
        """Solve for a tangent J with zero boundary values and A J = rhs."""
        A = LinearOperator((self.n, self.n), matvec=self.matvec, dtype=float)
        P = LinearOperator((self.n, self.n), matvec=self.precondition, dtype=float)
        b = rhs_field[self.prob.mask].ravel()
        if not np.any(b):
            return np.zeros_like(self.F), 0
        x, info = gmres(A, b, M=P, rtol=rtol, atol=0.0, restart=80, maxiter=maxiter)
        J = self.M.tangent_project(self.F, self._full(x))
        return J, info


def _solve_harmonic_map(prob: _Problem, M: AmbientManifold, init, tol, max_iter, damping0):
    g = prob.grid
    k = prob.outer.shape[-1]
    if init is None:
        F = prob.poisson(np.zeros((g.rows, g.ntheta, k)))
        provenance = "euclidean-projected"
    else:
        F = np.array(init.values if isinstance(init, SurfaceField) else init, dtype=float)
        provenance = "user"
    F = prob.set_boundary(M.project(F))
    metric = M

    def residual(F):
        return prob.norm(_tension_extrinsic(F, g, M), metric)

    res = residual(F)
    omega = damping0
    history = [res]
    newton_ok = True
    it = 0
    for it in range(1, max_iter + 1):
        if res < tol:
            it -= 1
            break
        T = _tangent_tension(F, prob, M)
        step = None
        if newton_ok:
            op = _JacobiOperator(F, prob, M)
            J, info = op.solve(-T, rtol=1e-10)
            t = 1.0
            while t > 1e-3:
                trial = prob.set_boundary(M.project(F + t * J))
                r_new = residual(trial)
                if r_new < res:
                    step = (trial, r_new)
                    break
                t *= 0.5
            if step is None:
                newton_ok = False
        if step is None:
            V = prob.poisson(T, zero_bc=True)
            V = -M.tangent_project(F, V)
            while omega > 1e-6:
                trial = prob.set_boundary(M.project(F + omega * V))
                r_new = residual(trial)
                if r_new < res:
                    step = (trial, r_new)
                    omega = min(damping0, 2 * omega)
                    break
                omega *= 0.5
            if step is None:
                break
        F, res = step
        history.append(res)
    if not res < tol:
        raise NoConvergence(f"harmonic map solver stopped at residual {res:.3e}",
                            residual=res, iterations=it)
    return F, {"solver": "relaxation+newton", "iterations": it, "residual": res,
               "init": provenance, "history": history}


def harmonic_manifold(x1, x2, grid: CylinderGrid, M: AmbientManifold, init=None,
                      tol: float = 1e-8, max_iter: int = 200, damping0: float = 1.0) -> SurfaceField:
    """Harmonic map of the annulus into N with the given boundary traces.

    Parameters
    ----------
    x1, x2 : BoundaryParametrization or array (ntheta, k)
        Traces on r = 1 and r = rho.
    init : SurfaceField, optional
        Initial guess selecting the homotopy class; by default the
        Euclidean extension projected onto N.

    Raises
    ------
    NoConvergence
        If the tension residual does not drop below ``tol``.
    OutOfTube
        If an iterate leaves the projection tube.
    """
    if M is None or M.is_flat:
        F = harmonic_euclidean(x1, x2, grid)
        F.manifold = M
        return F
    prob = _dirichlet_problem(grid, x1, x2)
    F, info = _solve_harmonic_map(prob, M, init, tol, max_iter, damping0)
    return SurfaceField(F, grid, M, info)


def harmonic_disc_manifold(x, grid: DiscGrid, M: AmbientManifold, init=None,
                           tol: float = 1e-8, max_iter: int = 200, damping0: float = 1.0) -> SurfaceField:
    """Harmonic map of the disc into N with the given boundary trace."""
    if M is None or M.is_flat:
        F = harmonic_disc_euclidean(x, grid)
        F.manifold = M
        return F
    prob = _dirichlet_problem(grid, x)
    F, info = _solve_harmonic_map(prob, M, init, tol, max_iter, damping0)
    return SurfaceField(F, grid, M, info)


def harmonic_extension(grid, x1, x2=None, M=None, init=None, **solver):
    """Dispatch on grid type and manifold."""
    if isinstance(grid, DiscGrid):
        return harmonic_disc_manifold(x1, grid, M, init, **solver)
    return harmonic_manifold(x1, x2, grid, M, init, **solver)


# Jacobi fields -----------------------------------------------------------------


def _boundary_vectors(xi, x, ntheta, k):
    if xi is None:
        return np.zeros((ntheta, k))
    if hasattr(xi, "phi"):
        if x is None:
            raise ValueError("scalar variations need the boundary parametrization")
        return xi.vector(x)
    return np.asarray(xi, dtype=float)


def jacobi_field(F: SurfaceField, xi1=None, xi2=None, M: AmbientManifold = None,
                 x1=None, x2=None, rtol: float = 1e-11) -> SurfaceField:
    """Jacobi field along a harmonic map with prescribed boundary values.

    ``xi1`` and ``xi2`` are ambient tangent vectors on the outer and inner
    circle (arrays ``(ntheta, k)``), or :class:`TangentVariation` objects
    together with the parametrizations ``x1``, ``x2``.  ``None`` means zero.

    Raises
    ------
    NoConvergence
        If GMRES fails.
    """
    M = M if M is not None else F.manifold
    g = F.grid
    k = F.k
    b1 = _boundary_vectors(xi1, x1, g.ntheta, k)
    b2 = _boundary_vectors(xi2, x2, g.ntheta, k) if not isinstance(g, DiscGrid) else None
    prob = _Problem(g, b1, b2)
    Jext = prob.poisson(np.zeros_like(F.values))
    if M is None or M.is_flat:
        return SurfaceField(Jext, g, M, {"solver": "spectral"})
    Jext = prob.set_boundary(M.tangent_project(F.values, Jext))
    op = _JacobiOperator(F.values, prob, M)
    rhs = -op.apply_field(Jext)
    rhs[~prob.mask] = 0.0
    J0, info = op.solve(rhs, rtol=rtol, maxiter=600)
    if info != 0:
        raise NoConvergence("Jacobi field GMRES did not converge", iterations=info)
    J = Jext + J0
    J = prob.set_boundary(J)
    return SurfaceField(J, g, M, {"solver": "gmres"})
