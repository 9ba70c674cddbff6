"""Run configuration, report files, traces and mesh export."""

from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import boundary as bd
from . import manifold as mf
from .energy import Settings
from .errors import ConfigError

MODES = ("solve", "minimize", "mountain-pass", "douglas", "verify")
TRACE_COLUMNS = ("step", "t", "rho", "E", "g1", "g2", "g3", "hopf_defect")
PATH_COLUMNS = ("iter", "beta_est", "argmax_node", "g_at_max")

_SECTIONS = {
    "": {"mode", "output", "seed"},
    "manifold": {"kind", "dim", "ambient_dim", "tube_radius"},
    "gamma1": {"type", "center", "radius", "normal", "e1", "e2", "axes", "points"},
    "gamma2": {"type", "center", "radius", "normal", "e1", "e2", "axes", "points"},
    "grid": {"ns", "nr", "ntheta"},
    "solver": {"tol", "max_iter", "damping0", "g_tol", "flow_max_iter", "rho0", "K", "mp_tol",
               "margin", "probes"},
    "verify": {"state"},
}


def source_version() -> str:
    """Package version plus a hash of the package sources."""
    from . import __version__

    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return f"{__version__}+g{h.hexdigest()[:10]}"


# configuration ------------------------------------------------------------------


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    lines = text.splitlines()
    current = ""
    hdr = re.compile(r"^\s*\[\s*([^\]]+?)\s*\]")
    for i, line in enumerate(lines, 1):
        m = hdr.match(line)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return i
    return None


@dataclass
class RunConfig:
    mode: str
    manifold: mf.AmbientManifold
    gamma1: bd.JordanCurve
    gamma2: bd.JordanCurve
    settings: Settings
    ntheta: int = 256
    output: Path = Path("out")
    seed: int = 0
    solver: dict = field(default_factory=dict)
    state: Optional[Path] = None
    text: str = ""
    source: Optional[Path] = None

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def _vec(raw, n, where, line):
    try:
        v = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a list of numbers", line)
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise ConfigError(f"{where} must be a list of {n} finite numbers", line)
    return v


def _curve(spec: dict, name: str, k: int, text: str):
    line = _line_of(text, name)
    kind = spec.get("type", "circle")
    at = lambda key: _line_of(text, name, key) or line
    if kind in ("circle", "ellipse"):
        center = _vec(spec.get("center", [0.0] * k), k, f"{name}.center", at("center"))
        if kind == "circle":
            r = spec.get("radius", 1.0)
            if not isinstance(r, (int, float)) or not r > 0:
                raise ConfigError(f"{name}.radius must be positive", at("radius"))
            a = b = float(r)
        else:
            ax = _vec(spec.get("axes"), 2, f"{name}.axes", at("axes"))
            if np.any(ax <= 0):
                raise ConfigError(f"{name}.axes must be positive", at("axes"))
            a, b = ax
        if "e1" in spec or "e2" in spec:
            e1 = _vec(spec.get("e1"), k, f"{name}.e1", at("e1"))
            e2 = _vec(spec.get("e2"), k, f"{name}.e2", at("e2"))
        else:
            if k != 3:
                raise ConfigError(f"{name}: give e1 and e2 in dimension {k}", line)
            normal = _vec(spec.get("normal", [0, 0, 1]), 3, f"{name}.normal", at("normal"))
            if np.linalg.norm(normal) == 0:
                raise ConfigError(f"{name}.normal must be nonzero", at("normal"))
            e1, e2 = bd.circle_3d(normal=normal).d1(np.array([0.0, np.pi / 2]))
        if abs(np.dot(e1, e2)) > 1e-12 or abs(np.linalg.norm(e1) - 1) > 1e-12 or abs(np.linalg.norm(e2) - 1) > 1e-12:
            raise ConfigError(f"{name}: e1 and e2 must be orthonormal", at("e1"))
        if kind == "circle":
            return bd.circle(center, a, e1, e2, name=name)
        return bd.ellipse(center, a, b, e1, e2, name=name)
    if kind in ("spline", "samples"):
        pts = np.asarray(spec.get("points", []), dtype=float)
        if pts.ndim != 2 or pts.shape[1] != k or len(pts) < 16:
            raise ConfigError(f"{name}.points must hold at least 16 points of dimension {k}", at("points"))
        return bd.spline_curve(pts, name=name)
    raise ConfigError(f"{name}.type must be circle, ellipse, samples or spline", at("type"))


def parse_config(text: str, source: Optional[Path] = None, mode: Optional[str] = None) -> RunConfig:
    """Validate a TOML run description.

    Every problem is reported as ``ConfigError`` with the offending line.
    ``mode`` overrides the file's ``mode`` key.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(exc), int(m.group(1)) if m else None)
    for key, val in raw.items():
        if isinstance(val, dict):
            if key not in _SECTIONS:
                raise ConfigError(f"unknown section [{key}]", _line_of(text, key))
            for sub in val:
                if sub not in _SECTIONS[key]:
                    raise ConfigError(f"unknown key {key}.{sub}", _line_of(text, key, sub))
        elif key not in _SECTIONS[""]:
            raise ConfigError(f"unknown key {key}", _line_of(text, "", key))
    mode = mode or raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}", _line_of(text, "", "mode") or 1)
    ms = raw.get("manifold", {})
    kind = ms.get("kind", "euclidean")
    try:
        M = mf.from_spec(kind, ms.get("ambient_dim", ms.get("dim")), ms.get("tube_radius"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), _line_of(text, "manifold", "kind") or _line_of(text, "manifold"))
    k = M.ambient_dim
    curves = []
    for name in ("gamma1", "gamma2"):
        if name not in raw:
            raise ConfigError(f"missing section [{name}]", None)
        try:
            c = _curve(raw[name], name, k, text)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}", _line_of(text, name))
        off = float(np.max(M.distance_to_manifold(c.eval(bd.theta_grid(64)))))
        if off > 1e-9:
            raise ConfigError(f"{name} does not lie on the {kind} target (offset {off:.2e})", _line_of(text, name))
        curves.append(c)
    if curves[0].min_distance(curves[1]) <= 1e-9:
        raise ConfigError("gamma1 and gamma2 must be disjoint", _line_of(text, "gamma2"))
    gs = raw.get("grid", {})
    sv = raw.get("solver", {})

    def num(sec, key, default, cast, lo=None):
        src = gs if sec == "grid" else sv
        v = src.get(key, default)
        try:
            v = cast(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{sec}.{key} must be a number", _line_of(text, sec, key))
        if isinstance(src.get(key), bool) or (lo is not None and not v >= lo):
            raise ConfigError(f"{sec}.{key} out of range", _line_of(text, sec, key))
        return v

    ns = num("grid", "ns", 65, int, 5)
    nr = num("grid", "nr", 33, int, 4)
    nt = num("grid", "ntheta", 256, int, 8)
    if nt & (nt - 1):
        raise ConfigError("grid.ntheta must be a power of two", _line_of(text, "grid", "ntheta"))
    settings = Settings(ns=ns, nr=nr, tol=num("solver", "tol", 1e-10, float, 0.0),
                        max_iter=num("solver", "max_iter", 200, int, 1),
                        damping0=num("solver", "damping0", 1.0, float, 0.0))
    solver = {
        "g_tol": num("solver", "g_tol", 1e-5, float, 0.0),
        "flow_max_iter": num("solver", "flow_max_iter", 500, int, 1),
        "rho0": num("solver", "rho0", 0.5, float, 0.0),
        "K": num("solver", "K", 33, int, 3),
        "mp_tol": num("solver", "mp_tol", 1e-4, float, 0.0),
        "margin": num("solver", "margin", 1e-6, float, 0.0),
        "probes": num("solver", "probes", 12, int, 1),
    }
    if not 0 < solver["rho0"] < 1:
        raise ConfigError("solver.rho0 must lie in (0, 1)", _line_of(text, "solver", "rho0"))
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer", _line_of(text, "", "seed"))
    base = source.parent if source is not None else Path(".")
    out = Path(raw.get("output", "out"))
    state = raw.get("verify", {}).get("state")
    if mode == "verify" and state is None:
        raise ConfigError("mode verify needs [verify] state", _line_of(text, "verify") or _line_of(text, "", "mode"))
    return RunConfig(mode, M, curves[0], curves[1], settings, nt,
                     out if out.is_absolute() else base / out, seed, solver,
                     None if state is None else (Path(state) if Path(state).is_absolute() else base / state),
                     text, source)


def load_config(path, mode: Optional[str] = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", None)
    return parse_config(text, path, mode)


# reports -------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_report(path, values: dict):
    """Flat ``key=value`` text, keys sorted, values in round-trip repr."""
    lines = [f"{k}={_fmt(values[k])}" for k in sorted(values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def save_state(path, c, config_text: str = ""):
    np.savez(path, w1=c.x1.w, w2=c.x2.w, rho=np.array(c.rho), config=np.array(config_text))


def load_state(path) -> dict:
    with np.load(path) as z:
        return {"w1": z["w1"], "w2": z["w2"], "rho": float(z["rho"]), "config": str(z["config"])}


# meshes ----------------------------------------------------------------------------


def chart(values: np.ndarray, manifold=None) -> Optional[np.ndarray]:
    """3-D chart for curved targets: stereographic (sphere3) or Klein (hyperbolic3)."""
    if manifold is None:
        return None
    if manifold.kind == "sphere3":
        return values[..., 1:] / (1.0 + values[..., :1])
    if manifold.kind == "hyperbolic3":
        return values[..., 1:] / values[..., :1]
    return None


def _obj_lines(F, verts_fn, offset):
    g = F.grid
    P = verts_fn(F.values)
    nrow, nt = P.shape[:2]
    v = [f"v {x:.12g} {y:.12g} {z:.12g}" for x, y, z in P.reshape(-1, 3)]
    idx = lambda i, j: offset + i * nt + (j % nt) + 1
    f = [f"f {idx(i, j)} {idx(i, j + 1)} {idx(i + 1, j + 1)} {idx(i + 1, j)}"
         for i in range(nrow - 1) for j in range(nt)]
    if g.kind == "disc":
        c = verts_fn(g.center_value(F.values)[None, None])[0, 0]
        v.append(f"v {c[0]:.12g} {c[1]:.12g} {c[2]:.12g}")
        ci = offset + nrow * nt + 1
        f += [f"f {ci} {idx(0, j + 1)} {idx(0, j)}" for j in range(nt)]
    return v, f


def export_mesh(F, path, chart_kind: Optional[str] = None) -> dict:
    """Write an OBJ surface from one field or a pair of disc fields.

    Vertices are the grid nodes (rows by theta), faces are quads with
    periodic stitching in theta; discs get a triangle fan at the center.
    Only the first three ambient coordinates are written unless
    ``chart_kind`` selects the sphere/hyperbolic chart.
    """
    fields = F if isinstance(F, (tuple, list)) else (F,)
    if fields[0].k < 3:
        raise ValueError("need at least three ambient coordinates")
    M = fields[0].manifold
    fn = (lambda X: X[..., :3]) if chart_kind is None else (lambda X: chart(X, M))
    verts, faces = [], []
    for i, G in enumerate(fields):
        if len(fields) > 1:
            faces.append(f"g disc{i + 1}")
        v, f = _obj_lines(G, fn, len(verts))
        verts += v
        faces += f
    Path(path).write_text("# annular surface\n" + "\n".join(verts + faces) + "\n")
    return {"vertices": len(verts), "faces": sum(1 for s in faces if s.startswith("f "))}
