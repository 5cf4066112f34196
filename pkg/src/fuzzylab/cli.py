"""Config-driven command line: scans, metrics, connections, geodesics, flows,
distance tables and perturbations, written as CSV, a JSON manifest and SVG plots.

Usage::

    fuzzylab run config.json [--threads N] [--out DIR]
    fuzzylab validate config.json
    fuzzylab models
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np
from scipy.special import gammainc

from . import __version__, kernels
from .opcore import MODEL_CATALOG, PLANE_FAMILY, ModelTag, annihilation, build_model, number_op

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_FS = 0, 2, 3, 4
TAIL_WARN = 1e-10
TASKS = ("Scan", "Metric", "Connections", "Geodesic", "Flow", "Distance", "Perturb")
FAMILIES = ("GMLM", "GMAL", "SAAG", "WAAG", "AUTOPARALLEL")

_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_triple = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "task", "task_params", "output"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["tag"],
            "properties": {
                "tag": {"type": "string"},
                "params": {"type": "object", "additionalProperties": {"type": "number"}},
                "fock_dim": {"type": "integer", "minimum": 2},
            },
        },
        "task": {"enum": list(TASKS)},
        "task_params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["s1", "s2", "n1", "n2"],
                    "properties": {
                        "s1": _pair,
                        "s2": _pair,
                        "n1": {"type": "integer", "minimum": 3},
                        "n2": {"type": "integer", "minimum": 3},
                    },
                },
                "seed": _triple,
                "families": {"type": "array", "items": {"enum": list(FAMILIES)}, "minItems": 1},
                "s0": _pair,
                "sdot0": _pair,
                "q": {"type": "number"},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "h_t": {"type": "number", "exclusiveMinimum": 0},
                "rank_tol": {"type": "number", "exclusiveMinimum": 0},
                "step_delta": {"type": "number", "exclusiveMinimum": 0},
                "n_steps": {"type": "integer", "minimum": 1},
                "points": {"type": "array", "items": _triple, "minItems": 1},
                "epsilon": {"type": "number"},
                "perturbation": {"enum": ["number", "squeeze"]},
                "x0": _triple,
                "driver": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["heisenberg_number", "rotation", "expansion"]},
                        "omega": {"type": "number"},
                        "axis": _triple,
                        "v": {"type": "number"},
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dir"],
            "properties": {
                "dir": {"type": "string", "minLength": 1},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["csv", "json", "svg"]},
                    "uniqueItems": True,
                },
            },
        },
    },
}


class ConfigError(ValueError):
    pass


# -- config ---------------------------------------------------------------------


def load_config(path) -> dict:
    """Parse and schema-check a config file; raises ``ConfigError`` with the field path."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"field {where}: {err.message}")
    tag = cfg["model"]["tag"]
    if tag not in {t.value for t in ModelTag}:
        raise ConfigError(f"field model/tag: unknown model {tag!r}")
    need = _task_needs(cfg["task"])
    missing = [k for k in need if k not in cfg["task_params"]]
    if missing:
        raise ConfigError(f"field task_params: task {cfg['task']} needs {', '.join(missing)}")
    return cfg


def _task_needs(task: str) -> tuple[str, ...]:
    return {
        "Scan": ("grid",),
        "Metric": ("grid",),
        "Connections": ("grid",),
        "Geodesic": ("grid", "s0", "sdot0", "t_max", "h_t"),
        "Flow": ("x0", "t_max", "h_t", "driver"),
        "Distance": ("points",),
        "Perturb": ("points", "epsilon", "perturbation"),
    }[task]


def model_params(cfg: dict) -> dict:
    params = dict(cfg["model"].get("params", {}))
    if "fock_dim" in cfg["model"]:
        params["fock_dim"] = cfg["model"]["fock_dim"]
    return params


def truncation_tail(fock_dim: int, alpha_max: float) -> float:
    """Poisson weight of a coherent state at ``|alpha_max|`` on levels ``>= fock_dim``."""
    return float(gammainc(fock_dim, alpha_max**2)) if alpha_max > 0 else 0.0


def _alpha_extent(cfg: dict) -> float:
    tp = cfg["task_params"]
    ext = 0.0
    if "grid" in tp:
        g = tp["grid"]
        ext = max(ext, float(np.hypot(max(map(abs, g["s1"])), max(map(abs, g["s2"])))))
    for key in ("s0", "x0", "seed"):
        if key in tp:
            ext = max(ext, float(np.hypot(tp[key][0], tp[key][1])))
    for p in tp.get("points", []):
        ext = max(ext, float(np.hypot(p[0], p[1])))
    return ext


def feasibility(cfg: dict) -> list[str]:
    """Warnings from a dry check of the model against the requested extent."""
    out = []
    tag = ModelTag(cfg["model"]["tag"])
    fs = build_model(tag, model_params(cfg))
    if tag in PLANE_FAMILY:
        ext = _alpha_extent(cfg)
        tail = truncation_tail(fs.hilbert_dim, ext)
        if tail > TAIL_WARN:
            out.append(
                f"truncation: coherent-state tail weight {tail:.3e} above level {fs.hilbert_dim} at |alpha| = {ext:.3g}"
            )
    return out


# -- output ---------------------------------------------------------------------


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_svg(path: Path, curves: dict, xlabel: str = "x", ylabel: str = "y", title: str = "") -> None:
    """800 x 600 line plot, one polyline per named curve."""
    width, height, pad = 800, 600, 60
    pts = [np.asarray(c, dtype=float) for c in curves.values() if len(c)]
    allp = np.concatenate(pts) if pts else np.zeros((1, 2))
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)

    def to_px(p):
        u = pad + (p[:, 0] - lo[0]) / span[0] * (width - 2 * pad)
        v = height - pad - (p[:, 1] - lo[1]) / span[1] * (height - 2 * pad)
        return u, v

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle" font-size="14">{xlabel}</text>',
        f'<text x="18" y="{height / 2}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {height / 2})">{ylabel}</text>',
        f'<text x="{width / 2}" y="30" text-anchor="middle" font-size="16">{title}</text>',
        f'<text x="{pad}" y="{height - pad + 18}" font-size="11">{lo[0]:.3g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 18}" text-anchor="end" font-size="11">{hi[0]:.3g}</text>',
        f'<text x="{pad - 6}" y="{height - pad}" text-anchor="end" font-size="11">{lo[1]:.3g}</text>',
        f'<text x="{pad - 6}" y="{pad + 4}" text-anchor="end" font-size="11">{hi[1]:.3g}</text>',
    ]
    for k, (name, c) in enumerate(curves.items()):
        c = np.asarray(c, dtype=float)
        if not len(c):
            continue
        colour = _COLOURS[k % len(_COLOURS)]
        u, v = to_px(c)
        poly = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(u, v))
        parts.append(f'<polyline points="{poly}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        y = pad + 20 + 18 * k
        parts.append(f'<line x1="{width - pad - 120}" y1="{y}" x2="{width - pad - 95}" y2="{y}" stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad - 90}" y="{y + 4}" font-size="12">{name}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


# -- tasks ----------------------------------------------------------------------


def _chart(fs, tp):
    from .manifold import ChartTag, GridSpec, line_root, trace_eigenmanifold

    g = tp["grid"]
    if fs.is_plane_family:
        grid = GridSpec.regular(ChartTag.PLANE_COMPLEX, g["s1"], g["s2"], g["n1"], g["n2"])
        if "seed" in tp:
            seed = np.asarray(tp["seed"], dtype=float)
        else:
            mid = [0.5 * (g["s1"][0] + g["s1"][1]), 0.5 * (g["s2"][0] + g["s2"][1])]
            seed = line_root(fs, [mid[0], mid[1], 0.0], [0.0, 0.0, 1.0]).x
    elif fs.model_tag is ModelTag.FUZZY_SPHERE:
        grid = GridSpec.regular(ChartTag.SPHERE_ANGLES, g["s1"], g["s2"], g["n1"], g["n2"])
        rj = float(fs.params["r"]) * float(fs.params["j"])
        th, ph = 0.5 * (g["s1"][0] + g["s1"][1]), g["s2"][0]
        seed = np.asarray(tp.get("seed", rj * np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])))
    else:
        return trace_eigenmanifold(fs, tp.get("seed", [1.0, 0.0, 0.0]))
    return trace_eigenmanifold(fs, seed, grid)


def _chart_rows(chart):
    emb = chart.embedding
    n1, n2 = emb.shape[:2]
    for i in range(n1):
        for j in range(n2):
            x = emb[i, j]
            yield (chart.s1[i], chart.s2[j], x[0], x[1], x[2], float(np.linalg.norm(x)), chart.lambda0[i, j], chart.gap[i, j])


def task_scan(fs, tp, out, ctx):
    chart = _chart(fs, tp)
    ctx.csv("chart.csv", ("s1", "s2", "x1", "x2", "x3", "norm", "lambda0", "gap"), _chart_rows(chart))
    ctx.summary["nodes"] = int(chart.lambda0.size)
    ctx.summary["max_abs_lambda0"] = float(np.max(np.abs(chart.lambda0)))
    if chart.lambda0.shape[1] > 1:
        ctx.svg("chart.svg", {"x1-x2": chart.embedding[..., :2].reshape(-1, 2)}, "x1", "x2", "chart nodes")
    return chart


def task_metric(fs, tp, out, ctx):
    from .manifold import metric_field

    chart = task_scan(fs, tp, out, ctx)
    m = metric_field(fs, chart)
    rows = (
        (chart.s1[i], chart.s2[j], m.gamma[i, j, 0, 0], m.gamma[i, j, 0, 1], m.gamma[i, j, 1, 1], m.purity_form[i, j])
        for i in range(chart.shape[0])
        for j in range(chart.shape[1])
    )
    ctx.csv("metric.csv", ("s1", "s2", "g11", "g12", "g22", "purity"), rows)
    return chart, m


def task_connections(fs, tp, out, ctx):
    from .connect import connection_field, node_average

    chart, m = task_metric(fs, tp, out, ctx)
    conn = connection_field(fs, chart, m, rank_tol=tp.get("rank_tol", 1e-10))
    F = node_average(conn.F_plaq)
    rows = (
        (chart.s1[i], chart.s2[j], conn.A[i, j, 0], conn.A[i, j, 1], F[i, j],
         np.linalg.norm(conn.frakA[i, j]), np.linalg.norm(conn.torsion.kappa[i, j]))
        for i in range(chart.shape[0])
        for j in range(chart.shape[1])
    )
    ctx.csv("connection.csv", ("s1", "s2", "A1", "A2", "F", "frakA_norm", "kappa_norm"), rows)
    return chart, m, conn


PATH_HEADER = ("t", "s1", "s2", "sdot1", "sdot2", "x1", "x2", "x3", "speed", "p1", "p2", "p3")


def task_geodesic(fs, tp, out, ctx):
    from . import geodesic as gd
    from .connect import connection_field
    from .manifold import metric_field

    chart = _chart(fs, tp)
    m = metric_field(fs, chart)
    families = tuple(tp.get("families", FAMILIES))
    conn = None
    if set(families) - {"GMLM", "GMAL"}:
        conn = connection_field(fs, chart, m, rank_tol=tp.get("rank_tol", 1e-10))
    s0, v0, q = tp["s0"], tp["sdot0"], tp.get("q", 1.0)
    t_max, h_t = tp["t_max"], tp["h_t"]

    def one(fam):
        if fam == "GMLM":
            return gd.integrate_gmlm(chart, m, s0, v0, t_max, h_t)
        if fam == "SAAG":
            return gd.integrate_saag(chart, m, conn, s0, v0, q, t_max, h_t)
        if fam == "WAAG":
            return gd.integrate_waag(chart, m, conn, s0, v0, q, t_max, h_t)
        if fam == "AUTOPARALLEL":
            return gd.integrate_autoparallel(chart, m, conn, s0, v0, t_max, h_t)
        delta = tp.get("step_delta", 0.1)
        n = tp.get("n_steps", max(int(t_max * np.linalg.norm(v0) / delta), 1))
        return gd.integrate_gmal(fs, chart, s0, v0, delta, n)

    with ThreadPoolExecutor(max_workers=ctx.threads) as pool:
        paths = dict(zip(families, pool.map(one, families)))
    for fam in families:
        p = paths[fam]
        ctx.csv(f"path_{fam.lower()}.csv", PATH_HEADER, p.rows())
        ctx.summary[f"{fam}_exited"] = bool(p.exited)
        if p.exited:
            ctx.warn(f"{fam} path left the chart at t = {p.t[-1]:.6g}")
    ctx.svg("geodesics.svg", {f: paths[f].s for f in families}, "Re alpha" if fs.is_plane_family else "s1",
            "Im alpha" if fs.is_plane_family else "s2", "geodesics")
    return paths


def _driver(fs, d):
    from .dynamics import Expansion, RotationSO3, heisenberg_number

    if d["kind"] == "heisenberg_number":
        return heisenberg_number(fs, d.get("omega", 1.0))
    if d["kind"] == "rotation":
        return RotationSO3(np.asarray(d.get("axis", [0.0, 0.0, 1.0]), dtype=float), d.get("omega", 1.0))
    return Expansion(d.get("v", 0.0))


def task_flow(fs, tp, out, ctx):
    from .dynamics import TimeDependentModel, integrate_flow

    tdm = TimeDependentModel(fs, _driver(fs, tp["driver"]))
    path = integrate_flow(tdm, tp["x0"], 0.0, tp["t_max"], tp["h_t"])
    ctx.csv("flow.csv", ("t", "x1", "x2", "x3", "lambda0"), path.rows())
    for f in path.flags:
        ctx.warn(f"flow: {f}")
    ctx.svg("flow.svg", {"flow": path.x[:, :2]}, "x1", "x2", "flow")
    return path


def task_distance(fs, tp, out, ctx):
    from .displace import build_displacement, quantum_distance
    from .qcstate import solve_qc

    pts = [np.asarray(p, dtype=float) for p in tp["points"]]
    qcs = [solve_qc(fs, p) for p in pts]
    rows = []
    for i, qi in enumerate(qcs):
        for j, qj in enumerate(qcs):
            if i == j:
                rows.append((i, j, 0.0, np.linalg.norm(pts[i] - pts[j]), 1.0))
                continue
            d = build_displacement(fs, pts[i], pts[j], qc_x=qi, qc_y=qj, tol_link=1.0)
            rows.append((i, j, quantum_distance(fs, qi, d), np.linalg.norm(pts[i] - pts[j]), d.overlap))
    ctx.csv("distance.csv", ("i", "j", "dist_quantum", "dist_euclid", "link_overlap"), rows)
    return rows


def _perturbation_ops(fs, kind: str, eps: float):
    n = fs.z.shape[0]
    if kind == "number":
        return [None, None, eps * (number_op(n) + 0.5 * np.eye(n))]
    a = annihilation(n)
    return [None, None, 0.5 * eps * (a @ a + a.conj().T @ a.conj().T)]


def task_perturb(fs, tp, out, ctx):
    from .perturb import perturb_nondegenerate, perturb_weakly_degenerate
    from .qcstate import DegeneracyClass, solve_qc

    if fs.model_tag is ModelTag.FUZZY_CIRCLE:
        ops = [None, None, tp["epsilon"] * number_op(fs.z.shape[0])]
    else:
        ops = _perturbation_ops(fs, tp["perturbation"], tp["epsilon"])
    rows = []
    for p in tp["points"]:
        qc = solve_qc(fs, p)
        if qc.degeneracy is DegeneracyClass.STRONGLY_NONDEGENERATE or fs.is_plane_family:
            r = perturb_nondegenerate(fs, qc, ops)
        else:
            r = perturb_weakly_degenerate(fs, qc, ops)
        for f in r.flags:
            ctx.warn(f"perturb at {list(p)}: {f.value}")
        rows.append((*qc.x, *r.delta_x, r.validity))
    ctx.csv("perturb.csv", ("x1", "x2", "x3", "dx1", "dx2", "dx3", "validity"), rows)
    return rows


HANDLERS = {
    "Scan": task_scan,
    "Metric": task_metric,
    "Connections": task_connections,
    "Geodesic": task_geodesic,
    "Flow": task_flow,
    "Distance": task_distance,
    "Perturb": task_perturb,
}


class _Context:
    def __init__(self, out: Path, formats, threads: int):
        self.out = out
        self.formats = set(formats)
        self.threads = threads
        self.files: list[str] = []
        self.warnings: list[str] = []
        self.summary: dict = {}

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            write_csv(self.out / name, header, rows)
            self.files.append(name)

    def svg(self, name, curves, xl, yl, title):
        if "svg" in self.formats:
            write_svg(self.out / name, curves, xl, yl, title)
            self.files.append(name)

    def warn(self, msg: str):
        self.warnings.append(msg)


def run(cfg: dict, out_dir: str | None = None, threads: int | None = None) -> dict:
    """Execute a validated config; returns the manifest (also written as ``manifest.json``)."""
    out = Path(out_dir or cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    formats = cfg["output"].get("formats", ["csv", "json", "svg"])
    ctx = _Context(out, formats, threads or os.cpu_count() or 1)
    for w in feasibility(cfg):
        ctx.warn(w)
    fs = build_model(cfg["model"]["tag"], model_params(cfg))
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        HANDLERS[cfg["task"]](fs, cfg["task_params"], out, ctx)
    elapsed = time.perf_counter() - t0
    for w in caught:
        ctx.warn(f"{w.category.__name__}: {w.message}")
    manifest = {
        "inputs": cfg,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "timings": {"task_seconds": elapsed},
        "warnings": ctx.warnings,
        "outputs": ctx.files,
        "summary": ctx.summary,
    }
    # manifest always written: it is the record of the run
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def list_models() -> str:
    lines = []
    for tag, info in MODEL_CATALOG.items():
        req = ", ".join(info["required"])
        opt = ", ".join(f"{k}={v}" for k, v in info["defaults"].items())
        lines.append(f"{tag.value:24s} required: {req}" + (f"; optional: {opt}" if opt else "") + f"  ({info['about']})")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fuzzylab", description="Numerical geometry of fuzzy spaces")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a config file")
    p_run.add_argument("config")
    p_run.add_argument("--threads", type=int, default=None, help="worker pool size (default: available cores)")
    p_run.add_argument("--out", default=None, help="override output.dir")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    sub.add_parser("models", help="list catalog models and their parameters")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "models":
        print(list_models())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            notes = feasibility(cfg)
            for n in notes:
                print(f"warning: {n}")
            print("OK")
            return EXIT_OK
        manifest = run(cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"filesystem error: {exc}", file=sys.stderr)
        return EXIT_FS
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for w in manifest["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {len(manifest['outputs'])} files to {args.out or cfg['output']['dir']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
