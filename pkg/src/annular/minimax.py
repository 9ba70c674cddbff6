"""Douglas condition, mountain-pass saddle search and critical point classification."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from . import boundary as bd
from .energy import Configuration, Settings, criticality, denergy_rho, energy
from .errors import Collapsed, NoConvergence, PathCollapse
from .flow import (EPS_BOUNDARY, FlowState, _smoothed, anchors_for, minimize,
                   normalize, verify)

L_MAX = 30.0


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("ANNULAR_THREADS", "1")))
    except ValueError:
        return 1


# douglas condition -------------------------------------------------------------


def disc_minimizer(gamma1, gamma2, manifold=None, n: int = 256, settings: Optional[Settings] = None,
                   tol: float = 1e-6, max_iter: int = 500):
    """Minimize the two disc energies on the rho = 0 stratum (three-point normalized)."""
    x1, x2 = bd.identity(gamma1, n), bd.identity(gamma2, n)
    c = Configuration(x1, x2, 0.0, manifold, settings)
    return minimize(c, tol=tol, max_iter=max_iter, free_rho=False)


def douglas_gap(gamma1, gamma2, M=None, cfg: Optional[dict] = None) -> dict:
    """Compare the annulus infimum d with the two-disc sum d*.

    ``cfg`` keys: ``n`` (256), ``rho0`` (0.5), ``tol`` (1e-6),
    ``margin`` (1e-6 relative), ``max_iter`` (500), ``settings``.

    When the annulus minimization collapses towards two discs, ``d`` is
    the last energy of the trajectory (the infimum trend) and the verdict
    is negative.
    """
    cfg = dict(cfg or {})
    n = int(cfg.get("n", 256))
    rho0 = float(cfg.get("rho0", 0.5))
    tol = float(cfg.get("tol", 1e-6))
    max_iter = int(cfg.get("max_iter", 500))
    settings = cfg.get("settings")
    if gamma1.min_distance(gamma2) <= 1e-12:
        raise ValueError("the boundary curves must be disjoint")
    discs = disc_minimizer(gamma1, gamma2, M, n, settings, tol, max_iter)
    d_star = energy(discs.config)
    margin = float(cfg.get("margin", 1e-6)) * max(1.0, abs(d_star))
    c0 = Configuration(bd.identity(gamma1, n), bd.identity(gamma2, n), rho0, M, settings)
    out = {"d_star": d_star, "disc": discs.config, "disc_iterations": discs.iterations}
    try:
        res = minimize(c0, tol=tol, max_iter=max_iter)
    except Collapsed as exc:
        st = exc.state
        out.update(d=float(st.energies[-1]), annulus_exists_predicted=False, collapsed=True,
                   annulus=st.config, trace=st, diagnostics=exc.diagnostics)
        return out
    d = energy(res.config)
    out.update(d=d, annulus_exists_predicted=bool(d < d_star - margin), collapsed=False,
               annulus=res.config, trace=res.state, iterations=res.iterations)
    return out


# paths -----------------------------------------------------------------------


def sigma_of(rho: float) -> float:
    """Modulus coordinate 1/|ln rho|, zero on the two-disc stratum."""
    return 0.0 if rho <= 0 else 1.0 / -np.log(rho)


def rho_of(sigma: float) -> float:
    if sigma <= 0:
        return 0.0
    return float(np.exp(-min(1.0 / sigma, L_MAX)))


@dataclass
class PathOfConfigurations:
    """Polygonal path of K configurations with fixed endpoints.

    Nodes are parametrized by their lifts and the modulus coordinate
    ``sigma = 1/|ln rho|``; node 0 lies on the two-disc stratum.
    """

    nodes: List[Configuration]
    sigmas: np.ndarray
    energies: np.ndarray = field(default=None)

    @property
    def K(self) -> int:
        return len(self.nodes)

    def distances(self) -> np.ndarray:
        a, b = self.nodes[:-1], self.nodes[1:]
        return np.array([max(np.max(np.abs(p.x1.w - q.x1.w)), np.max(np.abs(p.x2.w - q.x2.w)))
                         + abs(s - t) for p, q, s, t in zip(a, b, self.sigmas[:-1], self.sigmas[1:])])

    def argmax(self) -> int:
        return int(np.argmax(self.energies))


def _node(template: Configuration, w1, w2, sigma, init=None) -> Configuration:
    rho = rho_of(sigma)
    x1 = bd.BoundaryParametrization(np.asarray(w1, dtype=float), template.x1.curve)
    x2 = bd.BoundaryParametrization(np.asarray(w2, dtype=float), template.x2.curve)
    c = Configuration(x1, x2, rho, template.manifold, template.settings, template.l, None,
                      init if init is not None and rho > 0 else None)
    c.anchors = anchors_for(c)
    return c


def _align(wa, wb):
    # put the lift of the start on the branch of the end
    return wa + np.round((wb[0] - wa[0]) / (2 * np.pi)) * 2 * np.pi


def initial_path(x_a: Configuration, x_b: Configuration, K: int) -> PathOfConfigurations:
    """Linear interpolation of the lifts and of sigma between the endpoints.

    The modulus rises from the two-disc stratum along a smooth ramp in
    sigma (rho = exp(-1/sigma) is flat to all orders at sigma = 0).
    """
    s_b = sigma_of(x_b.rho)
    w1a, w2a = _align(x_a.x1.w, x_b.x1.w), _align(x_a.x2.w, x_b.x2.w)
    nodes = [x_a]
    sig = np.linspace(0.0, s_b, K)
    for k in range(1, K - 1):
        tau = k / (K - 1)
        nodes.append(_node(x_b, (1 - tau) * w1a + tau * x_b.x1.w, (1 - tau) * w2a + tau * x_b.x2.w, sig[k]))
    nodes.append(x_b)
    return PathOfConfigurations(nodes, sig)


def equidistribute(path: PathOfConfigurations) -> PathOfConfigurations:
    """Redistribute interior nodes uniformly in arclength; endpoints untouched."""
    d = path.distances()
    s = np.concatenate([[0.0], np.cumsum(d)])
    if s[-1] <= 0:
        return path
    targets = np.linspace(0.0, s[-1], path.K)
    ref = path.nodes[-1]
    w1 = [n.x1.w for n in path.nodes]
    w1[0] = _align(w1[0], ref.x1.w)
    w2 = [n.x2.w for n in path.nodes]
    w2[0] = _align(w2[0], ref.x2.w)
    nodes = [path.nodes[0]]
    sig = [path.sigmas[0]]
    for t in targets[1:-1]:
        j = int(np.clip(np.searchsorted(s, t, side="right") - 1, 0, path.K - 2))
        lam = 0.0 if d[j] == 0 else (t - s[j]) / d[j]
        sg = (1 - lam) * path.sigmas[j] + lam * path.sigmas[j + 1]
        near = path.nodes[j] if lam < 0.5 else path.nodes[j + 1]
        init = near._fields if near.rho > 0 else None
        nodes.append(_node(ref, (1 - lam) * w1[j] + lam * w1[j + 1], (1 - lam) * w2[j] + lam * w2[j + 1], sg, init))
        sig.append(sg)
    nodes.append(path.nodes[-1])
    sig.append(path.sigmas[-1])
    return PathOfConfigurations(nodes, np.asarray(sig))


def _relax_node(c: Configuration, sigma: float, spacing: float, armijo: float = 1e-4):
    """One Armijo gradient step of an interior node in (maps, sigma).

    The step is capped at half the local node spacing so that nodes do
    not overtake each other before re-equidistribution.
    """
    rep = criticality(c)
    E = energy(c)
    dth = 2 * np.pi / c.ntheta
    phi1, phi2 = -_smoothed(rep.G1), -_smoothed(rep.G2)
    L = -np.log(c.rho)
    # dE/dsigma = rho dE/drho * L^2
    Es = rep.drho * c.rho * L * L
    dsig = -Es if (1.0 / max(sigma, 1e-300)) < L_MAX or Es < 0 else 0.0
    slope = dth * (np.dot(rep.G1, phi1) + np.dot(rep.G2, phi2)) + Es * dsig
    size = max(np.max(np.abs(phi1)), np.max(np.abs(phi2))) + abs(dsig)
    if size == 0 or slope >= 0:
        return c, sigma, E, rep
    t = min(1.0, 0.5 * spacing / size)
    for _ in range(30):
        s_new = max(sigma + t * dsig, 1.0 / L_MAX)
        x1 = bd.monotone_project(c.x1.w + t * phi1, c.x1.curve)
        x2 = bd.monotone_project(c.x2.w + t * phi2, c.x2.curve)
        trial = Configuration(x1, x2, rho_of(s_new), c.manifold, c.settings, c.l, c.anchors, c._fields)
        trial = normalize(trial)
        E_t = energy(trial)
        if E_t <= E + armijo * t * slope:
            return trial, s_new, E_t, rep
        t *= 0.5
    return c, sigma, E, rep


def _relaxed_at(c: Configuration, rho: float, tol: float):
    # boundary maps minimized at fixed modulus
    t = c.derive(rho=rho)
    t.anchors = anchors_for(t)
    try:
        return minimize(t, tol=tol, free_rho=False, max_iter=200).config
    except NoConvergence as exc:
        return exc.state.config


def polish_saddle(path: PathOfConfigurations, k: int, tol: float, rounds: int = 6):
    """Locate the saddle near node k.

    Alternates a fixed-modulus minimization of the boundary maps with a
    Brent solve of rho dE/drho = 0 in ln(rho), bracketed by the
    neighbouring nodes.  This assumes the unstable direction is carried by
    the modulus, which is the situation of the catenoid family.
    """
    lo = max(path.sigmas[k - 1], 1.0 / L_MAX)
    hi = path.sigmas[k + 1]
    a, b = np.log(rho_of(lo)), np.log(rho_of(hi))
    c = path.nodes[k]
    history = []
    for _ in range(rounds):
        c = _relaxed_at(c, c.rho, tol / 10)
        base = c

        def f(lr):
            return np.exp(lr) * denergy_rho(base.derive(rho=float(np.exp(lr))))

        fa, fb = f(a), f(b)
        if fa * fb > 0:
            # widen the bracket once towards the side with the larger slope
            span = b - a
            a2, b2 = a - span, min(b + span, np.log(0.999))
            fa2, fb2 = f(a2), f(b2)
            if fa2 * fb > 0 and fa * fb2 > 0:
                raise NoConvergence("no sign change of dE/drho near the path maximum",
                                    residual=min(abs(fa), abs(fb)), iterations=len(history))
            if fa2 * fb <= 0:
                a, fa = a2, fa2
            else:
                b, fb = b2, fb2
        lr = brentq(f, a, b, xtol=1e-13, rtol=1e-13)
        c = base.derive(rho=float(np.exp(lr)))
        c.anchors = anchors_for(c)
        rep = criticality(c)
        history.append({"rho": c.rho, "E": energy(c), "g": rep.g})
        if rep.g < tol:
            return c, rep, history
        a, b = lr - 0.2, lr + 0.2
    raise NoConvergence(f"saddle polish stopped at g = {rep.g:.3e}", residual=rep.g,
                        iterations=len(history), state=c)


def mountain_pass(x_a: Configuration, x_b: Configuration, K: int = 33, tol: float = 1e-4,
                  max_sweeps: int = 40, margin: float = 1e-6, barrier_rho: float = 1e-3,
                  pre_tol: Optional[float] = None) -> dict:
    """Mountain-pass search between a two-disc critical point and an annulus minimizer.

    Interior nodes take one descent step per sweep and are then
    re-equidistributed in the path metric (sup-norm of the lifts plus
    the change of sigma = 1/|ln rho|).  Sweeps stop when the path maximum
    stalls; the maximum node is then polished to a critical point.

    Returns a dict with ``beta``, ``saddle``, ``report`` (verification
    of the saddle), ``records`` (one per sweep) and ``path``.

    Raises
    ------
    ValueError
        If the endpoints coincide or violate the preconditions.
    PathCollapse
        If the path maximum sits at an endpoint.
    """
    if K < 3:
        raise ValueError("K must be at least 3")
    if x_a.rho != 0.0 or x_b.rho <= 0.0:
        raise ValueError("x_a must lie on the two-disc stratum and x_b in the interior")
    if x_a.ntheta != x_b.ntheta:
        raise ValueError("endpoints use different angular grids")
    if (np.array_equal(x_a.x1.w, x_b.x1.w) and np.array_equal(x_a.x2.w, x_b.x2.w)
            and x_a.rho == x_b.rho):
        raise ValueError("degenerate request: x_a = x_b")
    pre_tol = tol if pre_tol is None else pre_tol
    ga, gb = criticality(x_a).g, criticality(x_b).g
    if ga >= pre_tol or gb >= pre_tol:
        raise ValueError(f"endpoints must be critical (g = {ga:.2e}, {gb:.2e})")
    Ea, Eb = energy(x_a), energy(x_b)
    end_w = [(x_a.x1.w.copy(), x_a.x2.w.copy()), (x_b.x1.w.copy(), x_b.x2.w.copy())]

    path = initial_path(x_a, x_b, K)
    pool = ThreadPoolExecutor(max_workers=_workers())

    def energies(p):
        return np.array([Ea] + list(pool.map(energy, p.nodes[1:-1])) + [Eb])

    path.energies = energies(path)
    initial_max = float(np.max(path.energies))
    records = []
    prev = np.inf
    try:
        for sweep in range(max_sweeps):
            spacing = float(np.min(path.distances()))
            jobs = [(path.nodes[k], path.sigmas[k]) for k in range(1, K - 1)]
            out = list(pool.map(lambda a: _relax_node(a[0], a[1], spacing), jobs))
            nodes = [path.nodes[0]] + [o[0] for o in out] + [path.nodes[-1]]
            sig = np.concatenate([[path.sigmas[0]], [o[1] for o in out], [path.sigmas[-1]]])
            path = equidistribute(PathOfConfigurations(nodes, sig))
            path.energies = energies(path)
            k = path.argmax()
            g_max = criticality(path.nodes[k]).g if 0 < k < K - 1 else float("nan")
            beta_est = float(path.energies[k])
            records.append({"iter": sweep, "beta_est": beta_est, "argmax_node": k, "g_at_max": g_max})
            if k in (0, K - 1):
                raise PathCollapse(f"path maximum at endpoint node {k}", barrier=_barrier(path, Ea, barrier_rho))
            if g_max < tol or abs(prev - beta_est) < 0.1 * tol * max(1.0, abs(beta_est)):
                break
            prev = beta_est
    finally:
        pool.shutdown()

    k = path.argmax()
    saddle, rep, polish = polish_saddle(path, k, tol)
    beta = energy(saddle)
    assert np.array_equal(path.nodes[0].x1.w, end_w[0][0]) and np.array_equal(path.nodes[-1].x2.w, end_w[1][1])
    report = verify(saddle, rep)
    report.update(beta=beta, E_a=Ea, E_b=Eb, initial_path_max=initial_max,
                  beta_above_endpoints=bool(beta > max(Ea, Eb) + margin),
                  sweeps=len(records), argmax_node=k, barrier=_barrier(path, Ea, barrier_rho))
    return {"beta": beta, "saddle": saddle, "report": report, "records": records,
            "path": path, "polish": polish}


def _barrier(path: PathOfConfigurations, Ea: float, rho0: float) -> dict:
    """Fit C in E(rho) - E(0) >= C d^2 / |ln rho| over nodes with 0 < rho < rho0."""
    c0 = path.nodes[0]
    d = c0.x1.curve.min_distance(c0.x2.curve)
    vals = []
    for node, E in zip(path.nodes[1:-1], path.energies[1:-1]):
        if 0 < node.rho < rho0:
            vals.append((E - Ea) * -np.log(node.rho) / (d * d))
    C = float(min(vals)) if vals else float("nan")
    return {"C": C, "nodes": len(vals), "ok": bool(vals) and C > 0}


# classification ----------------------------------------------------------------


def _random_variation(rng, n, amplitude, modes=4):
    th = bd.theta_grid(n)
    phi = np.zeros(n)
    for k in range(1, modes + 1):
        a, b = rng.normal(size=2) / k
        phi += a * np.cos(k * th) + b * np.sin(k * th)
    return amplitude * phi / np.max(np.abs(phi))


def classify_critical(c: Configuration, probes: int = 12, eps: float = 1e-2, seed: int = 0,
                      noise: Optional[float] = None) -> dict:
    """Probe the energy along +-random admissible variations and +-d(ln rho).

    Returns ``kind`` in {"minimizer", "saddle", "undetermined"} with the
    probe values.  A decrease below ``-noise`` marks a saddle; all probes
    above ``noise`` mark a minimizer.
    """
    rng = np.random.default_rng(seed)
    E0 = energy(c)
    noise = 1e-9 * max(1.0, abs(E0)) if noise is None else noise
    deltas = []
    for _ in range(probes):
        side = rng.integers(2)
        x = (c.x1, c.x2)[side]
        phi = _random_variation(rng, c.ntheta, eps * c.l[side])
        for sgn in (1, -1):
            y = bd.monotone_project(x.w + sgn * phi, x.curve)
            t = c.derive(x1=y) if side == 0 else c.derive(x2=y)
            deltas.append(("boundary", side + 1, sgn, energy(t) - E0))
    if c.rho > 0:
        for sgn in (1, -1):
            r = c.rho * np.exp(sgn * eps)
            if r < 1:
                deltas.append(("rho", 0, sgn, energy(c.derive(rho=r)) - E0))
    vals = np.array([d[-1] for d in deltas])
    if np.any(vals < -noise):
        kind = "saddle"
    elif np.all(vals > noise):
        kind = "minimizer"
    else:
        kind = "undetermined"
    return {"kind": kind, "probes": deltas, "min_delta": float(vals.min()), "noise": noise}
