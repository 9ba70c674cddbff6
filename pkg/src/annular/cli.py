"""Command line front end: ``annular <mode> --config run.toml``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import boundary as bd
from . import io
from .energy import Configuration, criticality, energy
from .errors import AnnularError, Collapsed, ConfigError, NoConvergence, PathCollapse
from .flow import minimize, verify
from .minimax import classify_critical, disc_minimizer, douglas_gap, mountain_pass

EXIT_OK, EXIT_NOCONV, EXIT_INVALID, EXIT_COLLAPSED = 0, 2, 3, 4


def _header(cfg: io.RunConfig) -> dict:
    return {"config_sha256": cfg.sha256, "version": io.source_version(), "mode": cfg.mode,
            "seed": cfg.seed, "manifold": cfg.manifold.kind, "grid_ns": cfg.settings.ns,
            "grid_nr": cfg.settings.nr, "grid_ntheta": cfg.ntheta}


def _bounds(c: Configuration) -> dict:
    return {"l1": c.l[0], "l2": c.l[1]}


def _start(cfg: io.RunConfig, rho: float) -> Configuration:
    return Configuration(bd.identity(cfg.gamma1, cfg.ntheta), bd.identity(cfg.gamma2, cfg.ntheta),
                         rho, cfg.manifold, cfg.settings)


def _prefixed(prefix, d):
    return {f"{prefix}{k}": v for k, v in d.items() if np.isscalar(v) or isinstance(v, (bool, np.bool_))}


def _write_surface(out: Path, c: Configuration, cfg: io.RunConfig, plot=True):
    from .plotting import plot_surface

    F = c.fields()
    info = io.export_mesh(F, out / "surface.obj")
    if cfg.manifold.kind in ("sphere3", "hyperbolic3"):
        io.export_mesh(F, out / "surface_chart.obj", chart_kind=cfg.manifold.kind)
    io.save_state(out / "state.npz", c, cfg.text)
    if plot:
        plot_surface(F, out / "surface.png", use_chart=cfg.manifold.kind in ("sphere3", "hyperbolic3"))
    return info


def _traces(out: Path, records):
    from .plotting import plot_traces

    io.write_csv(out / "traces.csv", records, io.TRACE_COLUMNS)
    if records:
        plot_traces(records, out / "traces.png")


def _single_record(c: Configuration, rep, hopf):
    return [{"step": 0, "t": 0.0, "rho": c.rho, "E": energy(c), "g1": rep.g1, "g2": rep.g2,
             "g3": rep.g3, "hopf_defect": hopf}]


def _do_solve(cfg, out, rep_out):
    c = _start(cfg, cfg.solver["rho0"])
    v = verify(c)
    rep_out.update(_prefixed("", v))
    _traces(out, _single_record(c, criticality(c), v["hopf_defect"]))
    mesh = _write_surface(out, c, cfg)
    rep_out.update(_prefixed("mesh_", mesh))


def _do_minimize(cfg, out, rep_out):
    c = _start(cfg, cfg.solver["rho0"])
    res = minimize(c, tol=cfg.solver["g_tol"], max_iter=cfg.solver["flow_max_iter"])
    rep_out.update(_prefixed("", res.verification))
    rep_out["iterations"] = res.iterations
    rep_out["classification"] = classify_critical(res.config, cfg.solver["probes"], seed=cfg.seed)["kind"]
    _traces(out, res.state.records)
    rep_out.update(_prefixed("mesh_", _write_surface(out, res.config, cfg)))


def _do_douglas(cfg, out, rep_out):
    r = douglas_gap(cfg.gamma1, cfg.gamma2, cfg.manifold,
                    {"n": cfg.ntheta, "rho0": cfg.solver["rho0"], "tol": cfg.solver["g_tol"],
                     "margin": cfg.solver["margin"], "max_iter": cfg.solver["flow_max_iter"],
                     "settings": cfg.settings})
    rep_out.update(d=r["d"], d_star=r["d_star"], gap=r["d_star"] - r["d"],
                   annulus_exists_predicted=r["annulus_exists_predicted"],
                   predicted=r["annulus_exists_predicted"], collapsed=r["collapsed"],
                   rho=r["annulus"].rho)
    if r["collapsed"]:
        rep_out.update(_prefixed("collapse_", r["diagnostics"]))
    _traces(out, r["trace"].records)
    rep_out.update(_prefixed("mesh_", _write_surface(out, r["annulus"], cfg)))


def _do_mountain_pass(cfg, out, rep_out):
    from .plotting import plot_path_profile
    from .minimax import sigma_of

    tol = cfg.solver["g_tol"]
    discs = disc_minimizer(cfg.gamma1, cfg.gamma2, cfg.manifold, cfg.ntheta, cfg.settings, tol,
                           cfg.solver["flow_max_iter"])
    ann = minimize(_start(cfg, cfg.solver["rho0"]), tol=tol, max_iter=cfg.solver["flow_max_iter"])
    r = mountain_pass(discs.config, ann.config, K=cfg.solver["K"], tol=cfg.solver["mp_tol"],
                      margin=cfg.solver["margin"])
    rep = r["report"]
    rep_out.update(_prefixed("", {k: v for k, v in rep.items() if k != "barrier"}))
    rep_out.update(_prefixed("barrier_", rep["barrier"]))
    rep_out["classification"] = classify_critical(r["saddle"], cfg.solver["probes"], seed=cfg.seed)["kind"]
    _traces(out, ann.state.records)
    io.write_csv(out / "path.csv", r["records"], io.PATH_COLUMNS)
    p = r["path"]
    plot_path_profile(p.sigmas, p.energies, out / "path_profile.png", r["beta"], sigma_of(r["saddle"].rho))
    rep_out.update(_prefixed("mesh_", _write_surface(out, r["saddle"], cfg)))


def _do_verify(cfg, out, rep_out):
    st = io.load_state(cfg.state)
    x1 = bd.BoundaryParametrization(st["w1"], cfg.gamma1)
    x2 = bd.BoundaryParametrization(st["w2"], cfg.gamma2)
    c = Configuration(x1, x2, st["rho"], cfg.manifold, cfg.settings)
    v = verify(c)
    rep_out.update(_prefixed("", v))
    rep_out["critical"] = bool(v["g"] < cfg.solver["g_tol"])
    _traces(out, _single_record(c, criticality(c), v["hopf_defect"]))


_MODES = {"solve": _do_solve, "minimize": _do_minimize, "douglas": _do_douglas,
          "mountain-pass": _do_mountain_pass, "verify": _do_verify}


def run(config_path, mode: Optional[str] = None, stderr=None) -> int:
    """Execute a run description; returns the process exit code."""
    stderr = stderr or sys.stderr
    try:
        cfg = io.load_config(config_path, mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_INVALID
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    report = _header(cfg)
    report.update(_bounds(_start(cfg, cfg.solver["rho0"])))
    code = EXIT_OK
    try:
        _MODES[cfg.mode](cfg, out, report)
        report["status"] = "ok"
    except NoConvergence as exc:
        report.update(status="no_convergence", message=str(exc), residual=exc.residual,
                      iterations=exc.iterations)
        code = EXIT_NOCONV
    except Collapsed as exc:
        report.update(status="collapsed", message=str(exc))
        report.update(_prefixed("collapse_", exc.diagnostics or {}))
        if exc.state is not None:
            _traces(out, exc.state.records)
        code = EXIT_COLLAPSED
    except PathCollapse as exc:
        report.update(status="collapsed", message=str(exc))
        report.update(_prefixed("barrier_", exc.barrier or {}))
        code = EXIT_COLLAPSED
    except (AnnularError, ValueError) as exc:
        report.update(status="invalid", message=str(exc))
        print(f"validation error: {exc}", file=stderr)
        code = EXIT_INVALID
    io.write_report(out / "report.txt", report)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="annular", description="Annulus-type minimal surfaces by "
                                 "minimizing and mountain-passing the Dirichlet energy.")
    ap.add_argument("mode", choices=io.MODES)
    ap.add_argument("--config", required=True, type=Path, help="TOML run description")
    args = ap.parse_args(argv)
    return run(args.config, args.mode)


if __name__ == "__main__":
    sys.exit(main())
