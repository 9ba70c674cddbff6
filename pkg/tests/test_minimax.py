import numpy as np
import pytest

from annular import boundary as bd
from annular import minimax as mm
from annular.energy import Configuration, Settings, criticality, energy
from annular.errors import PathCollapse
from annular.flow import minimize
from oracles import STABLE_AREA, STABLE_RHO, TWO_DISCS, UNSTABLE_AREA, UNSTABLE_RHO, catenoid_necks

SMALL = Settings(ns=33, nr=17)
N = 64


def circles(h):
    return bd.circle_3d((0, 0, h)), bd.circle_3d((0, 0, -h))


@pytest.fixture(scope="module")
def douglas_near():
    return mm.douglas_gap(*circles(0.4), None, {"n": N, "settings": SMALL})


@pytest.fixture(scope="module")
def pass_result(douglas_near):
    g1, g2 = circles(0.4)
    ann = minimize(Configuration(bd.identity(g1, N), bd.identity(g2, N), 0.5, None, SMALL), tol=1e-6)
    a, b = douglas_near["disc"], ann.config
    snapshot = [x.copy() for x in (a.x1.w, a.x2.w, b.x1.w, b.x2.w)]
    res = mm.mountain_pass(a, b, K=17, tol=1e-4)
    return res, ann, snapshot, (a, b)


def initial_path_sup(a, b):
    """Maximum of the energy along the (continuous) initial interpolation path."""
    from scipy.optimize import minimize_scalar

    s_b = mm.sigma_of(b.rho)
    w1a, w2a = mm._align(a.x1.w, b.x1.w), mm._align(a.x2.w, b.x2.w)

    def neg(tau):
        c = mm._node(b, (1 - tau) * w1a + tau * b.x1.w, (1 - tau) * w2a + tau * b.x2.w, tau * s_b)
        return -energy(c)

    taus = np.linspace(0, 1, 33)[1:-1]
    k = int(np.argmin([neg(t) for t in taus]))
    r = minimize_scalar(neg, bounds=(taus[max(k - 1, 0)], taus[min(k + 1, len(taus) - 1)]),
                        method="bounded", options={"xatol": 1e-10})
    return -r.fun


def test_oracle_roots():
    c = catenoid_necks(0.4)
    assert len(c) == 2 and all(abs(x * np.cosh(0.4 / x) - 1) < 1e-12 for x in c)
    assert catenoid_necks(1.0) is None
    assert STABLE_AREA < TWO_DISCS < UNSTABLE_AREA


def test_douglas_near_circles(douglas_near):
    r = douglas_near
    assert r["annulus_exists_predicted"] and not r["collapsed"]
    assert np.isclose(r["d_star"], TWO_DISCS, rtol=1e-10)
    assert np.isclose(r["d"], STABLE_AREA, rtol=1e-6)
    assert np.isclose(r["annulus"].rho, STABLE_RHO, rtol=1e-5)


def test_douglas_far_circles():
    r = mm.douglas_gap(*circles(1.0), None, {"n": N, "settings": SMALL})
    assert r["collapsed"] and not r["annulus_exists_predicted"]
    assert r["diagnostics"]["rho_to_zero"]
    assert r["d"] > r["d_star"]


def test_douglas_rejects_touching_curves():
    g = bd.circle_3d()
    with pytest.raises(ValueError):
        mm.douglas_gap(g, g)


def test_sigma_roundtrip():
    for rho in (1e-6, 0.01, 0.5):
        assert np.isclose(mm.rho_of(mm.sigma_of(rho)), rho)
    assert mm.sigma_of(0.0) == 0.0 and mm.rho_of(0.0) == 0.0


def test_mountain_pass_catenoid(pass_result):
    res, ann, _, _ = pass_result
    rep = res["report"]
    assert abs(res["beta"] - UNSTABLE_AREA) < 1e-2 * UNSTABLE_AREA
    assert np.isclose(res["saddle"].rho, UNSTABLE_RHO, rtol=1e-4)
    assert rep["g"] < 1e-4 and rep["tension_residual"] < 1e-8 and rep["hopf_defect"] < 1e-3
    assert rep["beta_above_endpoints"]
    assert energy(ann.config) < res["beta"] and TWO_DISCS < res["beta"]
    # the node maximum only samples the initial path; compare with its continuous maximum
    assert res["beta"] <= initial_path_sup(*pass_result[3]) + 1e-9


def test_mountain_pass_records_and_barrier(pass_result):
    res, *_ = pass_result
    for r in res["records"]:
        assert set(r) == {"iter", "beta_est", "argmax_node", "g_at_max"}
        assert r["beta_est"] >= STABLE_AREA
    b = res["report"]["barrier"]
    assert b["ok"] and b["C"] > 0


def test_mountain_pass_endpoints_untouched(pass_result):
    res, _, snap, (a, b) = pass_result
    now = (a.x1.w, a.x2.w, b.x1.w, b.x2.w)
    assert all(np.array_equal(s, x) for s, x in zip(snap, now))
    p = res["path"]
    assert p.nodes[0] is a and p.nodes[-1] is b and p.sigmas[0] == 0.0


def test_mountain_pass_preconditions(pass_result):
    _, ann, _, (a, b) = pass_result
    with pytest.raises(ValueError):
        mm.mountain_pass(b, b)
    with pytest.raises(ValueError):
        mm.mountain_pass(a, a)
    noncrit = b.derive(rho=0.3)
    with pytest.raises(ValueError):
        mm.mountain_pass(a, noncrit)


def test_path_collapse_when_annulus_endpoint_is_low():
    # a flat annulus endpoint far below a pair of discs: the maximum sits at the disc end
    g1, g2 = bd.circle_3d(radius=1.0), bd.circle_3d(radius=0.5)
    n = 32
    a = mm.disc_minimizer(g1, g2, None, n, SMALL).config
    b = Configuration(bd.identity(g1, n), bd.identity(g2, n), 0.5, None, SMALL)
    assert energy(a) > energy(b)
    with pytest.raises(PathCollapse) as info:
        mm.mountain_pass(a, b, K=9, tol=1e-4, max_sweeps=3)
    assert "C" in info.value.barrier


def test_classify(pass_result):
    res, ann, _, _ = pass_result
    assert mm.classify_critical(ann.config)["kind"] == "minimizer"
    s = mm.classify_critical(res["saddle"])
    assert s["kind"] == "saddle"
    assert any(p[0] == "rho" and p[-1] < 0 for p in s["probes"])
    flat = Configuration(bd.identity(bd.circle_3d(), N), bd.identity(bd.circle_3d(radius=0.5), N), 0.5, None, SMALL)
    assert criticality(flat).g < 1e-10
    assert mm.classify_critical(flat)["kind"] == "minimizer"
