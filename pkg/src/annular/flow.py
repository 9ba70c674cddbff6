"""Descent field, Euler flow, minimizer and collapse diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import boundary as bd
from .energy import (Configuration, CriticalityReport, criticality, energy,
                     feasibility, hopf_differential)
from .errors import Collapsed, NoConvergence
from .grid import DiscGrid, d_theta

RHO_STEP_CAP = 0.05
EPS_BOUNDARY = 1e-3


@dataclass
class DescentField:
    """A pseudo-gradient (phi1, phi2, drho) with its predicted first variation."""

    phi1: np.ndarray
    phi2: np.ndarray
    drho: float
    slope: float                      # <dE, e> predicted from the gradients
    report: Optional[CriticalityReport] = None

    def __iter__(self):
        return iter((self.phi1, self.phi2, self.drho))


def _smoothed(G):
    # H^{1/2} Riesz map: divide Fourier coefficients by 1 + |n|
    n = len(G)
    Gh = np.fft.rfft(G)
    Gh /= 1.0 + np.arange(len(Gh))
    return np.fft.irfft(Gh, n=n)


def _channel(G, w, g, lp_phi, l, dtheta):
    """Boundary channel scaled so that its first variation is -g."""
    if g <= 0.0 or not np.any(G):
        return np.zeros_like(G), 0.0
    d = -_smoothed(G)
    rate = -dtheta * np.dot(G, d)
    if rate > 0:
        phi = d * (g / rate)
        if np.max(np.abs(phi)) <= l and bd._check_monotone(w + phi, 0.0):
            return phi, -g
    # fall back to the cone maximizer, which has the exact rate g and |phi| <= l
    return lp_phi.copy(), -dtheta * float(np.dot(G, lp_phi))


def descent_field(c: Configuration, delta: float, eps_boundary: float = EPS_BOUNDARY,
                  report: Optional[CriticalityReport] = None) -> DescentField:
    """Pseudo-gradient field with ``<dE, e> <= delta - g``.

    Each channel is scaled to decrease the energy at rate ``s_i g_i`` with
    ``s_i = min(1, 3 g_i / delta)``, so channels that are already nearly
    critical are switched off smoothly.  The rho channel moves ln(rho)
    at unit speed against the sign of dE/drho and vanishes below
    ``eps_boundary`` (the field is parallel to the two-disc stratum there).
    """
    rep = report or criticality(c)
    dth = 2 * np.pi / c.ntheta
    scale = lambda g: 1.0 if delta <= 0 else min(1.0, 3.0 * g / delta)
    phi1, r1 = _channel(rep.G1, c.x1.w, rep.g1, rep.phi1, c.l[0], dth)
    phi2, r2 = _channel(rep.G2, c.x2.w, rep.g2, rep.phi2, c.l[1], dth)
    s1, s2, s3 = scale(rep.g1), scale(rep.g2), scale(rep.g3)
    drho = 0.0
    if c.rho >= eps_boundary and rep.g3 > 0:
        drho = -s3 * np.sign(rep.drho) * c.rho
    slope = s1 * r1 + s2 * r2 + rep.drho * drho
    return DescentField(s1 * phi1, s2 * phi2, drho, slope, rep)


def gradient_direction(c: Configuration, rep: CriticalityReport,
                       eps_boundary: float = EPS_BOUNDARY) -> DescentField:
    """Preconditioned gradient used by the minimizer.

    The boundary channels are the H^{1/2} Riesz representatives of -G_i
    and the modulus moves by the gradient in ln(rho).  Unlike the
    normalized descent field its size is proportional to the gradient, so
    a common step length keeps roundoff-level channels small.
    """
    dth = 2 * np.pi / c.ntheta
    phi1 = -_smoothed(rep.G1)
    phi2 = -_smoothed(rep.G2)
    slope = dth * (np.dot(rep.G1, phi1) + np.dot(rep.G2, phi2))
    drho = 0.0
    if c.rho >= eps_boundary:
        drho = -c.rho ** 2 * rep.drho
        slope += rep.drho * drho
    return DescentField(phi1, phi2, float(drho), float(slope), rep)


# configuration updates --------------------------------------------------------


def anchors_for(c: Configuration):
    """Normalization targets read off the current boundary maps."""
    if c.rho > 0:
        return (float(c.x1.w[0]),)
    out = []
    for x in (c.x1, c.x2):
        lift = x.lift()
        out.append(tuple(float(v) for v in np.asarray(lift(bd.ANCHORS))))
    return tuple(out)


def normalize(c: Configuration, drift_tol: float = 1e-12) -> Configuration:
    """Restore the one-point (rho > 0) or three-point (rho = 0) condition."""
    if c.anchors is None:
        return c
    if c.rho > 0:
        target = c.anchors[0]
        if abs(c.x1.w[0] - target) <= drift_tol:
            return c
        x1, alpha = bd.normalize_one_point(c.x1, target, return_angle=True)
        x2 = bd.rotate(c.x2, alpha)
        return c.derive(x1=x1, x2=x2)
    xs = []
    for x, P in zip((c.x1, c.x2), c.anchors):
        lift = x.lift()
        cur = np.asarray(lift(bd.ANCHORS))
        if np.max(np.abs(cur - np.asarray(P))) <= drift_tol:
            xs.append(x)
        else:
            xs.append(bd.normalize_three_point(x, P))
    return c.derive(x1=xs[0], x2=xs[1])


def step(c: Configuration, e, t: float, renormalize: bool = True,
         rho_cap: float = RHO_STEP_CAP) -> Configuration:
    """Apply ``t * e`` through the monotone update and a clamped rho update."""
    phi1, phi2, drho = e
    x1 = bd.monotone_project(c.x1.w + t * np.asarray(phi1), c.x1.curve) if np.any(phi1) else c.x1
    x2 = bd.monotone_project(c.x2.w + t * np.asarray(phi2), c.x2.curve) if np.any(phi2) else c.x2
    rho = c.rho
    if drho != 0.0 and c.rho > 0:
        dr = float(np.clip(t * drho, -rho_cap, rho_cap))
        rho = min(max(c.rho + dr, 0.0), 1.0 - 1e-9)
    out = c.derive(x1=x1, x2=x2, rho=rho)
    return normalize(out) if renormalize else out


# flow ----------------------------------------------------------------------------


@dataclass
class FlowState:
    """Trajectory of a flow or minimization run."""

    config: Configuration
    t: float = 0.0
    m: int = 0
    energies: List[float] = field(default_factory=list)
    gs: List[float] = field(default_factory=list)
    rhos: List[float] = field(default_factory=list)
    records: List[dict] = field(default_factory=list)
    lifts: List[tuple] = field(default_factory=list)

    def record(self, c: Configuration, E: float, rep: Optional[CriticalityReport], hopf: float = float("nan")):
        self.config = c
        self.energies.append(E)
        self.rhos.append(c.rho)
        g = rep.g if rep is not None else float("nan")
        self.gs.append(g)
        self.lifts.append((c.x1.w, c.x2.w, c.rho))
        self.records.append({
            "step": self.m, "t": self.t, "rho": c.rho, "E": E,
            "g1": rep.g1 if rep else float("nan"), "g2": rep.g2 if rep else float("nan"),
            "g3": rep.g3 if rep else float("nan"), "hopf_defect": hopf,
        })


def _hopf(c: Configuration) -> float:
    f = c.fields()
    if c.rho > 0:
        return hopf_differential(f)["defect"]
    return max(hopf_differential(F)["defect"] for F in f)


def euler_flow(c0: Configuration, delta: float, T: float, m: int,
               field_fn: Optional[Callable] = None, eps_boundary: float = EPS_BOUNDARY,
               renormalize: bool = True, with_reports: bool = True) -> FlowState:
    """Explicit Euler scheme for the flow of a field, time step 1/m up to time T.

    ``field_fn(c)`` returns ``(phi1, phi2, drho)``; by default the descent
    field with parameter ``delta``.  The trajectory is stored at every step.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if T < 0:
        raise ValueError("T must be non-negative")
    if field_fn is None:
        field_fn = lambda c: descent_field(c, delta, eps_boundary)
    h = 1.0 / m
    nsteps = int(round(T * m))
    c = c0
    if renormalize and c.anchors is None:
        c = Configuration(c.x1, c.x2, c.rho, c.manifold, c.settings, c.l, anchors_for(c))
    state = FlowState(c)
    rep = criticality(c) if with_reports else None
    state.record(c, energy(c), rep)
    for k in range(nsteps):
        e = field_fn(c)
        try:
            c = step(c, e, h, renormalize)
            rep = criticality(c) if with_reports else None
            E = energy(c)
        except Exception as exc:
            exc.state = state
            raise
        state.m = k + 1
        state.t = (k + 1) * h
        state.record(c, E, rep)
    return state


@dataclass
class MinimizeResult:
    config: Configuration
    report: CriticalityReport
    state: FlowState
    iterations: int
    verification: dict


def verify(c: Configuration, rep: Optional[CriticalityReport] = None) -> dict:
    """Solution checks: tension residual, Hopf defect, g components, feasibility."""
    from .harmonic import tension_residual

    rep = rep or criticality(c)
    f = c.fields()
    if c.rho > 0:
        tens = tension_residual(f, c.manifold)
        h = hopf_differential(f)
        hopf, dev = h["defect"], h["real_const_dev"]
    else:
        tens = max(tension_residual(F, c.manifold) for F in f)
        hs = [hopf_differential(F) for F in f]
        hopf = max(x["defect"] for x in hs)
        dev = max(x["real_const_dev"] for x in hs)
    out = {"energy": energy(c), "rho": c.rho, "g1": rep.g1, "g2": rep.g2, "g3": rep.g3, "g": rep.g,
           "tension_residual": tens, "hopf_defect": hopf, "hopf_real_const_dev": dev,
           "monotone": bool(c.x1.is_monotone() and c.x2.is_monotone())}
    if c.rho > 0:
        fz = feasibility(c)
        out["feasibility_lhs"] = fz["lhs"]
        out["feasibility_rhs"] = fz["rhs"]
    return out


def minimize(c0: Configuration, tol: float = 1e-5, max_iter: int = 500,
             eps_boundary: float = EPS_BOUNDARY, free_rho: bool = True,
             free_boundary: bool = True, armijo: float = 1e-4,
             callback: Optional[Callable] = None) -> MinimizeResult:
    """Drive the descent flow until ``g < tol`` with a backtracking line search.

    Each iteration moves along the descent field with an Armijo step
    (quadratic interpolation on backtracking), so the energy is
    non-increasing.  ``free_rho=False`` freezes the modulus and
    ``free_boundary=False`` the boundary maps.

    Raises
    ------
    Collapsed
        If rho drops below ``eps_boundary`` (degeneration to two discs).
    NoConvergence
        If ``max_iter`` iterations do not reach ``g < tol``.
    """
    c = c0
    if c.anchors is None:
        c = Configuration(c.x1, c.x2, c.rho, c.manifold, c.settings, c.l, anchors_for(c))
    state = FlowState(c)

    def masked(rep):
        if not free_boundary:
            rep = CriticalityReport(0.0, 0.0, rep.g3, rep.G1 * 0, rep.G2 * 0, rep.phi1 * 0, rep.phi2 * 0, rep.drho)
        if not free_rho:
            rep = CriticalityReport(rep.g1, rep.g2, 0.0, rep.G1, rep.G2, rep.phi1, rep.phi2, 0.0)
        return rep

    rep_full = criticality(c)
    rep = masked(rep_full)
    E = energy(c)
    state.record(c, E, rep_full, _hopf(c))
    t_prev = 1.0
    it = 0
    while rep.g >= tol:
        if it >= max_iter:
            raise NoConvergence(f"minimize stopped at g = {rep.g:.3e} after {it} iterations",
                                residual=rep.g, iterations=it, state=state)
        it += 1
        e = gradient_direction(c, rep, eps_boundary)
        slope = e.slope
        if not slope < 0:
            raise NoConvergence(f"no descent direction at g = {rep.g:.3e}", residual=rep.g,
                                iterations=it, state=state)
        t = min(4.0, 2.0 * t_prev)
        accepted = None
        for _ in range(40):
            trial = step(c, e, t)
            E_t = energy(trial)
            if E_t <= E + armijo * t * slope:
                accepted = (trial, E_t)
                break
            # minimizer of the quadratic through E, slope and E_t, safeguarded
            denom = 2.0 * (E_t - E - slope * t)
            t_q = -slope * t * t / denom if denom > 0 else 0.5 * t
            t = float(np.clip(t_q, 0.1 * t, 0.5 * t))
        if accepted is None:
            raise NoConvergence(f"line search failed at g = {rep.g:.3e}", residual=rep.g,
                                iterations=it, state=state)
        c, E = accepted
        t_prev = t
        state.m = it
        state.t += t
        if c.rho > 0 and c.rho < eps_boundary and free_rho:
            state.record(c, E, None)
            raise Collapsed(f"rho = {c.rho:.3e} fell below {eps_boundary}", state=state,
                            diagnostics=collapse_monitor(state))
        rep_full = criticality(c)
        rep = masked(rep_full)
        state.record(c, E, rep_full, _hopf(c))
        if callback is not None:
            callback(state)
    return MinimizeResult(c, rep_full, state, it, verify(c, rep_full))


# diagnostics -------------------------------------------------------------------------


def _concentration_width(w, fraction=0.9):
    """Shortest theta-window carrying ``fraction`` of the 2pi increase of w."""
    n = len(w)
    th = bd.theta_grid(n)
    ext_w = np.concatenate([w, w + 2 * np.pi])
    ext_t = np.concatenate([th, th + 2 * np.pi])
    need = fraction * 2 * np.pi
    j = np.searchsorted(ext_w, ext_w[:n] + need - 1e-12, side="left")
    j = np.minimum(j, 2 * n - 1)
    widths = ext_t[j] - ext_t[:n]
    k = int(np.argmin(widths))
    return float(widths[k]), k, int(j[k])


def collapse_monitor(state: FlowState, rho_threshold: float = 0.02,
                     width_threshold: float = 0.1) -> dict:
    """Runtime diagnostics mirroring the ways a minimizing sequence can degenerate.

    * ``rho_to_zero``: the modulus decreased monotonically over the tail of
      the trajectory to below ``rho_threshold`` and a tenth of its start.
    * ``boundary_collapse``: side whose lift concentrates 90% of its
      increase in a window narrower than ``width_threshold`` (the boundary
      map tends to a constant outside a shrinking arc); ``osc`` is the
      diameter of the image of the complementary arc.
    * ``cl_osc``: Courant-Lebesgue oscillation, the smallest diameter of an
      image circle r = tau with tau in (delta, sqrt(delta)), delta = sqrt(rho).
    """
    if not state.lifts:
        raise ValueError("empty trajectory")
    rhos = np.asarray(state.rhos, dtype=float)
    tail = rhos[-3:]
    rho_to_zero = bool(len(rhos) >= 2 and np.all(np.diff(tail) <= 0) and rhos[-1] < rho_threshold
                       and rhos[-1] < 0.1 * rhos[0])
    c = state.config
    side_flag = None
    osc = 0.0
    for side, x in ((1, c.x1), (2, c.x2)):
        width, a, b = _concentration_width(x.w)
        if width < width_threshold:
            side_flag = side
            n = x.n
            idx = np.arange(b, a + n) % n
            pts = x.curve.eval(x.w[idx])
            osc = float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1))) if len(pts) > 1 else 0.0
            break
    cl = float("nan")
    if c.rho > 0 and c._fields is not None:
        F = c._fields
        d = np.sqrt(c.rho)
        r = F.grid.radii
        rows = np.where((r > d) & (r < np.sqrt(d)))[0]
        if len(rows):
            vals = F.values[rows]
            diam = [np.max(np.linalg.norm(v[:, None] - v[None], axis=-1)) for v in vals[:, ::4]]
            cl = float(np.min(diam))
    return {"rho_to_zero": rho_to_zero, "boundary_collapse": side_flag, "osc": osc, "cl_osc": cl}
