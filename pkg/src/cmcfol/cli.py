"""Command line interface.

Every subcommand reads a manifold (``builtin:NAME`` or a JSON file), runs
one library operation, and writes JSON (default) or CSV to stdout or
``--output``. ``--plot PATH`` additionally renders a figure.

Exit codes: 0 success, 1 library error (domain, precondition, numerical),
2 usage error or missing input file. Errors are printed to stderr as a
single JSON line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .ahseries import NormalFormMetric, expand_cmc, expand_minimal, interior_mean_curvature_relation
from .conformal import Collar, cmc_factor, minimalizing_factor, prescribing_factor, transform_mean_curvature
from .corpus import DIMENSIONS, CorpusEntry, corpus_get, corpus_names
from .errors import CmcfolError, NotPositiveDefiniteError, PreconditionError
from .expr import Expression, parse
from .foliation import (
    Ray, SliceFunction, detect_cmc, generic_cmc_residual, leaf_point, linearize_mean_curvature,
    mean_curvature, mean_curvature_field, weighted_cmc_residual,
)
from .geometry import Chart, ConformalMetric, FieldMetric, FiniteDifferenceMetric, scalar_curvature
from .output import dumps, error_line, to_csv
from .series import Axis, BoundaryChart


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- input parsing -------------------------------------------------------------

def parse_points(text):
    if text is None:
        return None
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";") if row.strip()]
    except ValueError:
        raise UsageError(f"cannot parse points {text!r}; expected 'a,b;c,d'") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise UsageError("points must all have the same number of coordinates")
    return np.array(rows)


def parse_grid(text):
    """Tensor grid 'lo:hi:count,lo:hi:count,...' as an (m, n) point array."""
    try:
        axes = [np.linspace(float(lo), float(hi), int(count))
                for lo, hi, count in (part.split(":") for part in text.split(","))]
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}; expected 'lo:hi:count,lo:hi:count'") from None
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _t_function(text):
    """A function of the leaf value t given as an expression."""
    expr = parse(text, 1, names=("t",))
    return lambda v: expr(np.asarray(v, float).reshape(-1, 1))  # noqa: E731


def parse_floats(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text)
    if ":" in text:
        lo, hi, count = text.split(":")
        return list(np.linspace(float(lo), float(hi), int(count)))
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


def _read_json(path):
    if not os.path.exists(path):
        raise UsageError(f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid JSON in {path}: {exc}") from None


def _spot_check(metric, chart, rng):
    """Positive-definiteness at 10 random points of the (clipped) domain."""
    lo = np.maximum(np.array(chart.lower), -10.0)
    hi = np.minimum(np.array(chart.upper), 10.0)
    pts = lo + (hi - lo) * rng.uniform(0.02, 0.98, size=(10, chart.dim))
    with np.errstate(all="ignore"):
        g = metric.values(pts)
    for p, m in zip(pts, g):
        if np.all(np.isfinite(m)) and np.any(np.linalg.eigvalsh(m) <= 0):
            raise NotPositiveDefiniteError(f"metric is not positive-definite at {p.tolist()}")


def entry_from_spec(desc, dim=None) -> CorpusEntry:
    """Build a manifold from a JSON description (see docs/manifold-format.md)."""
    if "builtin" in desc:
        return corpus_get(desc["builtin"], int(desc.get("dimension", dim or 3)))
    try:
        n = int(desc["dimension"])
        metric_src = desc["metric"]
        slicing_src = desc["slicing"]
    except KeyError as exc:
        raise PreconditionError(f"manifold file is missing {exc.args[0]!r}") from None
    dom = desc.get("domain", {})
    fix = lambda vals, inf: None if vals is None else [inf if v is None else v for v in vals]  # noqa: E731
    chart = Chart(n, fix(dom.get("lower"), -np.inf), fix(dom.get("upper"), np.inf), desc.get("excluded", ""))
    metric = FieldMetric(metric_src, chart)
    _spot_check(metric, chart, np.random.default_rng(0))
    f = SliceFunction(parse(slicing_src, n), float(desc.get("eps_df", 1e-8)))
    rays = [Ray(tuple(r["origin"]), tuple(r["direction"]), float(r.get("length", 1.0))) for r in desc.get("rays", [])]
    entry = CorpusEntry(desc.get("name", "custom"), n, chart, metric, f, metric_src, slicing_src,
                        excluded=desc.get("excluded", ""), rays=rays)
    if "compact_metric" in desc:
        entry.extras["compact_metric"] = FieldMetric(desc["compact_metric"], chart)
    if "defining_function" in desc:
        entry.extras["defining_function"] = desc["defining_function"]
    return entry


def load_manifold(text, dim=None, backend="analytic", slicing=None) -> CorpusEntry:
    if text is None:
        raise UsageError("--manifold is required")
    if text.startswith("builtin:"):
        entry = corpus_get(text[len("builtin:"):], dim or 3)
    else:
        entry = entry_from_spec(_read_json(text), dim)
    if backend in ("fd", "finite-difference") or slicing:
        entry = CorpusEntry(**{**entry.__dict__})
    if backend in ("fd", "finite-difference"):
        entry.metric = FiniteDifferenceMetric(entry.metric)
    if slicing:
        # closed forms, rays and leaf values belong to the original slicing
        entry.slicing = SliceFunction(parse(slicing, entry.dim), entry.slicing.eps_df)
        entry.slicing_source = slicing
        entry.closed_form, entry.H_of_t, entry.rays, entry.leaf_values = None, None, [], ()
    return entry


def _manifold(args, dim=None):
    return load_manifold(args.manifold, dim if dim is not None else args.dim, args.backend,
                         getattr(args, "slicing", None))


def load_normal_form(text, dim=None) -> NormalFormMetric:
    if text.startswith("builtin:"):
        entry = corpus_get(text[len("builtin:"):], dim or 3)
        if "normal_form" not in entry.extras:
            raise PreconditionError(f"{entry.name} is not a normal-form entry")
        return entry.extras["normal_form"]
    desc = _read_json(text)
    b = desc.get("boundary", {})
    d = int(b.get("dim", desc.get("dimension", 3) - 1))
    axes = [None if a is None else Axis(a["lo"], a["hi"], a["count"], a.get("periodic", False))
            for a in b.get("axes", [None] * d)]
    return NormalFormMetric(BoundaryChart(d, axes), desc["h"], desc.get("g_rr"))


def _dim(args):
    if getattr(args, "dim", None):
        return args.dim
    pts = parse_points(getattr(args, "points", None))
    if pts is None and getattr(args, "grid", None):
        pts = parse_grid(args.grid)
    if pts is not None and pts.shape[1] in DIMENSIONS:
        return pts.shape[1]
    return None


def _points(args, entry):
    pts = parse_points(args.points)
    if pts is None and getattr(args, "grid", None):
        pts = parse_grid(args.grid)
    if pts is None:
        if entry.sampler is None:
            raise UsageError("give --points (custom manifolds have no sampler)")
        pts = entry.sample(args.sample, args.seed)
    if pts.shape[1] != entry.dim:
        raise UsageError(f"points have {pts.shape[1]} coordinates, manifold has {entry.dim}")
    return pts


# -- subcommands ---------------------------------------------------------------

def cmd_eval_h(args):
    entry = _manifold(args, _dim(args))
    pts = _points(args, entry)
    s = mean_curvature(entry.metric, entry.slicing, pts, debug=args.debug)
    t = entry.slicing(pts)
    rows = []
    for i, p in enumerate(pts):
        row = {"index": i, "point": p, "t": t[i], "H": s.H[i], "df_norm": s.df_norm[i], "nu": s.nu[i]}
        if entry.H_of_t is not None:
            row["H_closed_form"] = float(entry.H_of_t(t[i]))
        rows.append(row)
    data = {"manifold": entry.name, "backend": entry.metric.backend, "rows": rows}
    header = ["index"] + [f"x{k + 1}" for k in range(entry.dim)] + ["t", "H", "df_norm", "H_closed_form"]
    extra = []
    if args.omega:
        # H of the same leaves under exp(2 omega) g, by the transformation law and directly
        omega = parse(args.omega, entry.dim)
        law = transform_mean_curvature(s.H, omega, s.nu, entry.metric, pts)
        direct = mean_curvature(ConformalMetric(entry.metric, omega), entry.slicing, pts).H
        for row, a, b in zip(rows, law, direct):
            row["H_conformal_law"], row["H_conformal_direct"] = float(a), float(b)
        data["omega"] = args.omega
        data["max_abs_law_minus_direct"] = float(np.max(np.abs(law - direct)))
        header += ["H_conformal_law", "H_conformal_direct"]
        extra = [[float(a), float(b)] for a, b in zip(law, direct)]
    table = [[r["index"], *map(float, r["point"]), float(r["t"]), float(r["H"]), float(r["df_norm"]),
              r.get("H_closed_form", ""), *(extra[i] if extra else [])] for i, r in enumerate(rows)]
    return data, header, table, "eval-h"


def cmd_residual(args):
    entry = _manifold(args, _dim(args))
    pts = _points(args, entry)
    if args.lhs or args.weight:
        lhs = _t_function(args.lhs or f"{args.lam}*t")
        weight = _t_function(args.weight or "1")
        res = weighted_cmc_residual(entry.metric, entry.slicing, pts, lhs, weight)
        form = {"lhs": args.lhs or f"{args.lam}*t", "weight": args.weight or "1"}
    else:
        field = entry.slicing if args.form == "standard" else mean_curvature_field(entry.metric, entry.slicing)
        res = generic_cmc_residual(entry.metric, field, args.lam, pts, form=args.form)
        form = args.form
    res = np.atleast_1d(res)
    rows = [{"index": i, "point": p, "residual": float(r)} for i, (p, r) in enumerate(zip(pts, res))]
    data = {"manifold": entry.name, "lambda": args.lam, "form": form, "rows": rows,
            "max_abs_residual": float(np.max(np.abs(res)))}
    header = ["index"] + [f"x{k + 1}" for k in range(entry.dim)] + ["residual"]
    return data, header, [[i, *map(float, p), float(r)] for i, (p, r) in enumerate(zip(pts, res))], "residual"


def cmd_detect_cmc(args):
    entry = _manifold(args)
    if not entry.rays:
        raise UsageError("manifold has no probe rays; add a 'rays' list to the JSON file")
    leaves = parse_floats(args.leaves) or list(entry.leaf_values)
    rep = detect_cmc(entry.metric, entry.slicing, leaves, args.samples, entry.rays, args.tol)
    data = {"manifold": entry.name, "is_cmc": rep.is_cmc, "tol": rep.tol, "leaves": rep.leaves}
    header = ["t", "H_mean", "spread", "samples", "ok", "flags"]
    table = [[l["t"], l["H_mean"], l["spread"], l["samples"], int(l["ok"]), ";".join(l["flags"])] for l in rep.leaves]
    return data, header, table, "detect-cmc"


def cmd_linearize(args):
    entry = _manifold(args, _dim(args))
    pts = _points(args, entry)
    dH = linearize_mean_curvature(entry.metric, entry.slicing, parse(args.u, entry.dim), pts, debug=args.debug)
    dH = np.atleast_1d(dH)
    rows = [{"index": i, "point": p, "dH": float(v)} for i, (p, v) in enumerate(zip(pts, dH))]
    data = {"manifold": entry.name, "u": args.u, "rows": rows, "max_abs_dH": float(np.max(np.abs(dH)))}
    if args.fd_step:
        # forward difference (H_{f + t u} - H_f)/t as an independent check
        t = args.fd_step
        moved = SliceFunction(parse(f"({entry.slicing_source}) + ({t!r})*({args.u})", entry.dim))
        fd = (mean_curvature(entry.metric, moved, pts).H - mean_curvature(entry.metric, entry.slicing, pts).H) / t
        data["fd_step"] = t
        data["max_abs_fd_gap"] = float(np.max(np.abs(fd - dH)))
    header = ["index"] + [f"x{k + 1}" for k in range(entry.dim)] + ["dH"]
    return data, header, [[i, *map(float, p), float(v)] for i, (p, v) in enumerate(zip(pts, dH))], "linearize"


def _collar(args, entry):
    t_grid = parse_floats(args.t_grid)
    if not t_grid:
        raise UsageError("--t-grid is required (e.g. '-0.8:0.8:17')")
    seeds = parse_points(args.seeds)
    if seeds is None:
        if not entry.rays:
            raise UsageError("give --seeds on the reference leaf")
        hits = [leaf_point(entry.slicing, ray, args.t0) for ray in entry.rays]
        seeds = np.array([h for h in hits if h is not None])
        if not len(seeds):
            raise PreconditionError(f"reference leaf t0={args.t0:g} not found along the probe rays")
    return Collar.make(args.t0, t_grid, seeds)


def _factor_output(fac, verify, expect=None):
    data = {"kind": fac.kind, "t0": fac.collar.t0, "t": fac.t, "seeds": fac.points[:, list(fac.t).index(fac.collar.t0)],
            "omega": fac.table, "C": fac.C}
    if expect:
        data["expected_omega"] = expect
        data["max_abs_omega_minus_expected"] = float(np.max(np.abs(fac.table - _t_function(expect)(fac.t)[None, :])))
    if verify:
        H = fac.recompute_H()
        data["max_abs_H_minus_target"] = float(np.max(np.abs(H - fac.target())))
    rows = [[i, float(t), float(fac.table[i, j])] for i in range(fac.table.shape[0]) for j, t in enumerate(fac.t)]
    return data, ["seed_index", "t", "omega"], rows, "factor"


def cmd_minimalize(args):
    entry = _manifold(args)
    return _factor_output(minimalizing_factor(entry.metric, entry.slicing, _collar(args, entry)), args.verify,
                          args.expect)


def _C(text):
    return "auto" if text in (None, "auto") else float(text)


def cmd_prescribe(args):
    entry = _manifold(args)
    fac = prescribing_factor(entry.metric, entry.slicing, parse(args.target, entry.dim), _collar(args, entry), _C(args.C))
    return _factor_output(fac, args.verify, args.expect)


def cmd_cmc_factor(args):
    entry = _manifold(args)
    G = None
    if args.G is not None:
        G = _t_function(args.G)
    elif args.lam is None:
        raise UsageError("give --lam or --G")
    fac = cmc_factor(entry.metric, entry.slicing, _collar(args, entry), lam=args.lam, G=G, C=_C(args.C),
                     rescale_slice=args.rescale_slice)
    return _factor_output(fac, args.verify, args.expect)


def cmd_ah_expand(args):
    g = load_normal_form(args.metric, args.dim)
    solver = expand_cmc if args.mode == "cmc" else expand_minimal
    st = solver(g, args.order, args.N)
    ell = args.order
    defect = st.H_k - st.r_k.truncate(st.H_k.order) if args.mode == "cmc" else st.H_k
    data = {"mode": args.mode, "order": ell, "N": st.H_k.order, "n": g.n,
            "omega_total": st.omega_total.truncate(ell).coeffs,
            "r_bar": st.r_k.truncate(ell).coeffs,
            "defect": defect.coeffs,
            "steps": [{"k": s.k, "F_k": s.F_k} for s in st.history[:-1]]}
    if g.chart.shape:
        data["grid_nodes"] = g.chart.nodes().reshape(-1, g.chart.dim)
    nodes = int(np.prod(g.chart.shape)) if g.chart.shape else 1
    rows = []
    for j in range(ell + 1):
        for q in range(nodes):
            rows.append([j, q, float(np.ravel(st.omega_total[j])[q]), float(np.ravel(st.r_k[j])[q]),
                         float(np.ravel(defect[j])[q])])
    return data, ["power", "node", "omega_total", "r_bar", "defect"], rows, "ah-expand"


def cmd_relate(args):
    if args.manifold is None:
        if None in (args.H, args.drho, args.rho):
            raise UsageError("give --H, --drho and --rho, or --manifold")
        val = float(interior_mean_curvature_relation(args.H, args.drho, args.rho))
        return {"relation": val}, ["relation"], [[val]], None
    entry = load_manifold(args.manifold, args.dim)
    if "compact_metric" not in entry.extras or "defining_function" not in entry.extras:
        raise PreconditionError(f"{entry.name} has no compactification (compact_metric, defining_function)")
    g = entry.extras["compact_metric"]
    n = entry.dim
    rho_fn = parse(entry.extras["defining_function"], n)
    rhos = parse_floats(args.rho_values) or [1e-1, 1e-2, 1e-3, 1e-4]
    base = np.array(parse_floats(args.base) or [0.1, 0.2, 0.3][: n - 1])
    rows = []
    for rho in rhos:
        z = rho / np.sqrt(1 + rho * rho) if entry.name == "halfspace-hyperbolic" else _invert(rho_fn, base, rho)
        p = np.append(base, z)
        s = mean_curvature(g, rho_fn, p)
        rel = float(interior_mean_curvature_relation(s.H, s.df_norm, rho))
        rows.append({"rho": rho, "point": p, "H_g": float(s.H), "drho_norm": float(s.df_norm), "relation": rel})
    p_small = rows[-1]["point"]
    sc = float(scalar_curvature(entry.metric, p_small))
    data = {"manifold": entry.name, "rows": rows, "limit": rows[-1]["relation"], "scalar_curvature": sc,
            "scalar_curvature_bound": -float(np.sqrt(-sc / (n * (n - 1)))) if sc < 0 else None}
    return data, ["rho", "H_g", "drho_norm", "relation"], \
        [[r["rho"], r["H_g"], r["drho_norm"], r["relation"]] for r in rows], "relate"


def _invert(rho_fn: Expression, base, rho):
    from scipy.optimize import brentq
    return brentq(lambda z: float(rho_fn(np.append(base, z))) - rho, 1e-12, 1 - 1e-12)


def cmd_corpus(args):
    if args.name is None:
        names = corpus_names()
        return {"entries": names}, ["name"], [[nm] for nm in names], None
    e = corpus_get(args.name, args.dim or 3)
    data = {"name": e.name, "desc": e.to_spec(), "closed_form_H": e.closed_form, "note": e.note,
            "leaf_values": list(e.leaf_values)}
    return data, ["key", "value"], [["name", e.name], ["closed_form_H", e.closed_form or ""]], None


# -- parser --------------------------------------------------------------------

def _common(p, manifold=True, points=False):
    p.add_argument("--output", "-o", help="write the result here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--config", help="JSON file with default option values")
    p.add_argument("--plot", nargs="?", const=True,
                   help="render a figure to this path (.png, .pdf, .svg); without a path, next to --output")
    p.add_argument("--dim", type=int, help="dimension of a builtin manifold (default: from points, else 3)")
    if manifold:
        p.add_argument("--manifold", help="builtin:NAME or path to a JSON manifold file")
        p.add_argument("--backend", choices=("analytic", "fd"), default="analytic")
        p.add_argument("--slicing", help="replace the manifold's slice function by this expression")
    if points:
        p.add_argument("--points", help="points as 'a,b,c;d,e,f'")
        p.add_argument("--grid", help="tensor grid of points 'lo:hi:count,lo:hi:count'")
        p.add_argument("--sample", type=int, default=20, help="random admissible points when --points is absent")
        p.add_argument("--seed", type=int, default=0)


def _collar_args(p):
    p.add_argument("--t0", type=float, default=0.0, help="reference leaf value")
    p.add_argument("--t-grid", dest="t_grid", help="leaf values 'lo:hi:count' or 'a,b,c'")
    p.add_argument("--seeds", help="seed points on the reference leaf (default: probe rays)")
    p.add_argument("--no-verify", dest="verify", action="store_false",
                   help="skip recomputing H under the rescaled metric")
    p.add_argument("--expect", help="closed form of omega in t to compare the table against")


def build_parser():
    parser = _Parser(prog="cmcfol", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cmcfol {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("eval-h", help="mean curvature of the leaves through given points")
    _common(p, points=True)
    p.add_argument("--debug", action="store_true", help="cross-check against the divergence form")
    p.add_argument("--omega", help="also report H under exp(2 omega) g (law and direct)")
    p.set_defaults(func=cmd_eval_h)

    p = sub.add_parser("residual", help="generic CMC residual")
    _common(p, points=True)
    p.add_argument("--lam", type=int, choices=(1, -1), default=1)
    p.add_argument("--form", choices=("standard", "rational"), default="standard")
    p.add_argument("--lhs", help="weighted form: (n-1) lhs(f)|df|^3 - weight(f)(...), lhs in t")
    p.add_argument("--weight", help="weighted form: weight as an expression in t")
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("detect-cmc", help="sample leaves along probe rays and compare H")
    _common(p)
    p.add_argument("--leaves", help="leaf values 'a,b,c' (default: the entry's)")
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_detect_cmc)

    p = sub.add_parser("linearize", help="linearization of the mean curvature in a direction u")
    _common(p, points=True)
    p.add_argument("--u", required=True, help="variation expression")
    p.add_argument("--debug", action="store_true")
    p.add_argument("--fd-step", dest="fd_step", type=float, help="also report the forward-difference gap at this t")
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("minimalize", help="conformal factor making the slicing minimal")
    _common(p)
    _collar_args(p)
    p.set_defaults(func=cmd_minimalize)

    p = sub.add_parser("prescribe", help="conformal factor prescribing the mean curvature")
    _common(p)
    _collar_args(p)
    p.add_argument("--target", required=True, help="target mean curvature (expression)")
    p.add_argument("--C", default="auto")
    p.set_defaults(func=cmd_prescribe)

    p = sub.add_parser("cmc-factor", help="conformal factor making the slicing CMC")
    _common(p)
    _collar_args(p)
    p.add_argument("--lam", type=int, choices=(1, -1))
    p.add_argument("--G", help="target as a function of the leaf value t, e.g. '2*t'")
    p.add_argument("--C", default="auto")
    p.add_argument("--rescale-slice", dest="rescale_slice", action="store_true",
                   help="self-consistent target lam*exp(omega)*f (rescaled slice function)")
    p.set_defaults(func=cmd_cmc_factor)

    p = sub.add_parser("ah-expand", help="formal boundary expansion of a defining function")
    _common(p, manifold=False)
    p.add_argument("--metric", required=True, help="builtin:NAME or JSON normal-form metric")
    p.add_argument("--mode", choices=("minimal", "cmc"), default="cmc")
    p.add_argument("--order", type=int, required=True, help="target vanishing order ell")
    p.add_argument("--N", type=int, help="working series order (default ell + 2)")
    p.set_defaults(func=cmd_ah_expand)

    p = sub.add_parser("relate", help="boundary mean curvature relation rho H - |d rho|")
    _common(p, manifold=False)
    p.add_argument("--manifold")
    p.add_argument("--H", type=float)
    p.add_argument("--drho", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--rho-values", dest="rho_values")
    p.add_argument("--base", help="tangential coordinates of the sample points")
    p.set_defaults(func=cmd_relate)

    p = sub.add_parser("corpus", help="list built-in manifolds or export one as JSON")
    _common(p, manifold=False)
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_corpus)
    return parser, sub


def _apply_config(parser, sub, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    cfg = _read_json(args.config)
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    sub.choices[args.command].set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
    return parser.parse_args(argv)


def _plot_path(args):
    if args.plot is not True:
        return args.plot
    if not args.output:
        raise UsageError("--plot without a path needs --output")
    return os.path.splitext(args.output)[0] + ".png"


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser, sub = build_parser()
    try:
        args = _apply_config(parser, sub, argv)
        if args.command is None:
            raise UsageError("missing subcommand; see --help")
        data, header, rows, plot_kind = args.func(args)
        text = to_csv(header, rows) if args.format == "csv" else dumps(data)
        if args.output:
            os.makedirs(os.path.dirname(args.output) or ".", exist_ok=True)
            try:
                with open(args.output, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
            except OSError as exc:
                raise UsageError(f"cannot write {args.output}: {exc.strerror}") from None
        else:
            stdout.write(text)
        if args.plot:
            if plot_kind is None:
                raise UsageError(f"{args.command} has no figure")
            from .plotting import render
            path = _plot_path(args)
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            render(plot_kind, data, path)
        return 0
    except UsageError as exc:
        print(error_line(exc), file=stderr)
        return 2
    except CmcfolError as exc:
        print(error_line(exc), file=stderr)
        return 1


def main():
    sys.exit(run())
