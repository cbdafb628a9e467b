"""Built-in manifolds and slicings with closed-form mean curvature."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .foliation import Ray, SliceFunction
from .geometry import Chart, FieldMetric, FiniteDifferenceMetric, MetricField
from .expr import parse
from .series import BoundaryChart

__all__ = ["CorpusEntry", "corpus_get", "corpus_names", "NAMES"]


@dataclass
class CorpusEntry:
    name: str
    dim: int
    chart: Chart
    metric: MetricField
    slicing: SliceFunction
    metric_source: list
    slicing_source: str
    closed_form: str = None          # text of H as a function of the leaf value t
    H_of_t: object = field(default=None, repr=False)
    excluded: str = ""
    note: str = ""
    sampler: object = field(default=None, repr=False)   # (rng, m) -> points
    rays: list = field(default_factory=list, repr=False)
    leaf_values: tuple = ()
    extras: dict = field(default_factory=dict, repr=False)

    def sample(self, m, seed=0):
        return self.sampler(np.random.default_rng(seed), m)

    def to_spec(self):
        """The entry as a JSON manifold description."""
        inf = lambda v: None if not np.isfinite(v) else v  # noqa: E731
        return {
            "dimension": self.dim,
            "domain": {"lower": [inf(v) for v in self.chart.lower], "upper": [inf(v) for v in self.chart.upper]},
            "metric": self.metric_source,
            "slicing": self.slicing_source,
            "eps_df": self.slicing.eps_df,
            "excluded": self.excluded,
        }


def _vars(n):
    return [f"x{i + 1}" for i in range(n)]


def _sumsq(names):
    return "(" + " + ".join(f"{v}^2" for v in names) + ")"


def _diag(n, entry):
    return [[entry if a == b else "0" for b in range(n)] for a in range(n)]


def _directions(n, count):
    """Deterministic spread of unit vectors (golden-angle spiral in 3D)."""
    if n == 2:
        ang = np.linspace(0, 2 * np.pi, count, endpoint=False) + 0.1
        return np.c_[np.cos(ang), np.sin(ang)]
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    phi = np.pi * (1 + 5**0.5) * i
    rho = np.sqrt(1 - z * z)
    d = np.c_[rho * np.cos(phi), rho * np.sin(phi), z]
    return np.c_[d, np.zeros((count, n - 3))] if n > 3 else d


def _radial(rng, m, n, lo, hi):
    d = rng.normal(size=(m, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rng.uniform(lo, hi, size=(m, 1))


def _make(name, n, lower, upper, metric, slicing, **kw):
    chart = Chart(n, lower, upper, kw.get("excluded", ""))
    g = FieldMetric(metric, chart)
    f = SliceFunction(parse(slicing, n))
    return CorpusEntry(name, n, chart, g, f, metric, slicing, **kw)


def _euclidean_spheres(n):
    v = _vars(n)
    return _make(
        "euclidean-spheres", n, [-6] * n, [6] * n, _diag(n, "1"), _sumsq(v),
        closed_form="t^(-1/2)", H_of_t=lambda t: t**-0.5, excluded="origin (df = 0)",
        note="concentric spheres f = r^2 in flat space, H = 1/r",
        sampler=lambda rng, m: _radial(rng, m, n, 0.3, 2.5),
        rays=[Ray(tuple([0.0] * n), tuple(d), 2.9) for d in _directions(n, 6)],
        leaf_values=(0.25, 1.0, 4.0))


def _inverse_radius(n):
    v = _vars(n)
    return _make(
        "euclidean-inverse-radius", n, [-6] * n, [6] * n, _diag(n, "1"), f"1/sqrt{_sumsq(v)}",
        closed_form="-t", H_of_t=lambda t: -t, excluded="origin (f singular)",
        note="f = 1/r in flat space; H = -1/r = -f, generic CMC with lambda = -1",
        sampler=lambda rng, m: _radial(rng, m, n, 0.3, 2.5),
        rays=[Ray(tuple(0.05 * d), tuple(d), 2.8) for d in _directions(n, 6)],
        leaf_values=(0.5, 1.0, 2.0))


def _monge_metric(n):
    v = _vars(n)
    den = f"(1 - {_sumsq(v)})"
    return [[("1 + " if a == b else "") + f"{v[a]}*{v[b]}/{den}" for b in range(n)] for a in range(n)]


def _sphere_height(n, south=False):
    v = _vars(n)
    sign = "-" if south else ""
    name = "sphere-height-south" if south else "sphere-height"
    return _make(
        name, n, [-1] * n, [1] * n, _monge_metric(n), f"{sign}sqrt(1 - {_sumsq(v)})",
        closed_form="-t/sqrt(1-t^2)", H_of_t=lambda t: -t / np.sqrt(1 - t * t),
        excluded="poles (x = 0, dt = 0) and the equator |x| = 1 where the Monge patch degenerates",
        note=("round unit sphere, Monge patch over the " + ("southern" if south else "northern")
              + " hemisphere, sliced by the height t = x_{n+1}; leaves are totally umbilic"),
        sampler=lambda rng, m: _radial(rng, m, n, 0.2, 0.9),
        rays=[Ray(tuple([0.0] * n), tuple(d), 0.99) for d in _directions(n, 6)],
        leaf_values=(0.3, 0.6, 0.9) if not south else (-0.9, -0.6, -0.3))


def _sphere_stereographic(n):
    v = _vars(n)
    s = _sumsq(v)
    return _make(
        "sphere-height-stereographic", n, [-4] * n, [4] * n, _diag(n, f"4/(1 + {s})^2"),
        f"(1 - {s})/(1 + {s})",
        closed_form="-t/sqrt(1-t^2)", H_of_t=lambda t: -t / np.sqrt(1 - t * t),
        excluded="x = 0 (north pole, dt = 0); the south pole is at infinity",
        note="round unit sphere in stereographic coordinates; height slicing covering the equator",
        sampler=lambda rng, m: _radial(rng, m, n, 0.35, 2.9),
        rays=[Ray(tuple([0.0] * n), tuple(d), 3.9) for d in _directions(n, 6)],
        leaf_values=(-0.8, 0.0, 0.8))


def _vertical_rays(n, z0, length):
    bases = [(0.0, 0.0), (0.7, -0.4), (-1.1, 0.9), (0.3, 1.2)]
    return [Ray(tuple(list(b[: n - 1]) + [0.0] * (n - 1 - len(b[: n - 1])) + [z0]),
                tuple([0.0] * (n - 1) + [1.0]), length) for b in bases]


def _halfspace_planes(n):
    v = _vars(n)
    def sampler(rng, m):
        p = rng.uniform(-1.5, 1.5, size=(m, n))
        p[:, -1] = rng.uniform(0.05, 1.5, size=m)
        return p
    return _make(
        "halfspace-planes-euclidean", n, [-2] * n, [2] * n, _diag(n, "1"), v[-1],
        closed_form="0", H_of_t=lambda t: 0 * t, excluded="none",
        note="parallel planes in flat space, totally geodesic",
        sampler=sampler, rays=_vertical_rays(n, -1.9, 3.8), leaf_values=(0.1, 0.5, 1.0))


def _halfspace_hyperbolic(n):
    v = _vars(n)
    z = v[-1]
    def sampler(rng, m):
        p = rng.uniform(-1.5, 1.5, size=(m, n))
        p[:, -1] = rng.uniform(0.05, 2.0, size=m)
        return p
    entry = _make(
        "halfspace-hyperbolic", n, [-5] * (n - 1) + [0], [5] * (n - 1) + [5], _diag(n, f"1/{z}^2"), z,
        closed_form="-1", H_of_t=lambda t: -1 + 0 * t, excluded="z <= 0 (conformal infinity)",
        note="upper half-space model of hyperbolic space, horospheres z = const",
        sampler=sampler, rays=_vertical_rays(n, 1e-3, 4.9), leaf_values=(0.1, 0.5, 2.0))
    compact_chart = Chart(n, [-5] * (n - 1) + [0], [5] * (n - 1) + [1], "z <= 0 or z >= 1")
    entry.extras["compact_metric"] = FieldMetric(_diag(n, f"1/(1 - {z}^2)"), compact_chart)
    entry.extras["defining_function"] = f"{z}/sqrt(1 - {z}^2)"
    return entry


def _poincare_ball(n):
    v = _vars(n)
    s = _sumsq(v)
    return _make(
        "poincare-ball", n, [-1] * n, [1] * n, _diag(n, f"4/(1 - {s})^2"), f"1 - {s}",
        closed_form="-(2-t)/(2*sqrt(1-t))", H_of_t=lambda t: -(2 - t) / (2 * np.sqrt(1 - t)),
        excluded="origin (df = 0) and |x| >= 1; slicing oriented inward (f = 1 - r^2)",
        note="Poincare ball, concentric spheres with inward conormal, H = -(r^2+1)/(2r)",
        sampler=lambda rng, m: _radial(rng, m, n, 0.2, 0.9),
        rays=[Ray(tuple([0.0] * n), tuple(d), 0.999) for d in _directions(n, 6)],
        leaf_values=(0.2, 0.5, 0.9))


def _normal_form(n, warped):
    from .ahseries import NormalFormMetric
    v = _vars(n)
    r = v[-1]
    d = n - 1
    factor = f"(1 + {r})" if warped else "1"
    metric = [[(factor if a == b else "0") if a < d else ("1" if b == d else "0") for b in range(n)] for a in range(n)]
    metric = [[metric[a][b] if b >= a else metric[b][a] for b in range(n)] for a in range(n)]
    ident = [[1.0 if a == b else 0.0 for b in range(d)] for a in range(d)]
    h = [ident, ident] if warped else [ident]
    def sampler(rng, m):
        p = rng.uniform(-1.5, 1.5, size=(m, n))
        p[:, -1] = rng.uniform(0.05, 0.9, size=m)
        return p
    entry = _make(
        "warped-normal-form" if warped else "hyperbolic-normal-form", n,
        [-5] * d + [-0.5 if warped else -1], [5] * d + [2], metric, r,
        closed_form="1/(2*(1+t))" if warped else "0",
        H_of_t=(lambda t: 0.5 / (1 + t)) if warped else (lambda t: 0 * t),
        excluded="none in the collar; r is the boundary defining variable",
        note=("compactified metric (1+r) h_0 + dr^2 with flat h_0" if warped
              else "compactified hyperbolic metric h_0 + dr^2 with flat h_0 (g+ = g/r^2)"),
        sampler=sampler, rays=_vertical_rays(n, 0.0, 0.95 if not warped else 1.9),
        leaf_values=(0.1, 0.4, 0.8))
    entry.extras["normal_form"] = NormalFormMetric(BoundaryChart(d), h)
    return entry


def _ellipse(n):
    v = _vars(n)
    weights = [1, 4, 9, 16][:n]
    poly = " + ".join(f"{w}*{x}^2" if w != 1 else f"{x}^2" for w, x in zip(weights, v))
    return _make(
        "ellipse-noncmc", n, [-3] * n, [3] * n, _diag(n, "1"), poly,
        excluded="origin (df = 0)", note="anisotropic quadric level sets, not CMC",
        sampler=lambda rng, m: _radial(rng, m, n, 0.3, 1.2),
        rays=[Ray(tuple([0.0] * n), tuple(d), 2.9) for d in _directions(n, 6)],
        leaf_values=(0.5, 1.0, 2.0))


_BUILDERS = {
    "euclidean-spheres": _euclidean_spheres,
    "euclidean-inverse-radius": _inverse_radius,
    "sphere-height": _sphere_height,
    "sphere-height-south": lambda n: _sphere_height(n, south=True),
    "sphere-height-stereographic": _sphere_stereographic,
    "halfspace-planes-euclidean": _halfspace_planes,
    "halfspace-hyperbolic": _halfspace_hyperbolic,
    "poincare-ball": _poincare_ball,
    "hyperbolic-normal-form": lambda n: _normal_form(n, False),
    "warped-normal-form": lambda n: _normal_form(n, True),
    "ellipse-noncmc": _ellipse,
}

NAMES = tuple(_BUILDERS)
DIMENSIONS = (2, 3)
_CACHE = {}


def corpus_names():
    return list(NAMES)


def corpus_get(name, dim=3, backend="analytic") -> CorpusEntry:
    """Build (and cache) a corpus entry; ``backend`` is analytic or finite-difference."""
    if name not in _BUILDERS:
        raise PreconditionError(f"unknown corpus entry {name!r}; available: {', '.join(NAMES)}")
    if dim not in DIMENSIONS:
        raise PreconditionError(f"corpus entries exist for n in {DIMENSIONS}")
    if backend not in ("analytic", "finite-difference", "fd"):
        raise PreconditionError(f"unknown backend {backend!r}")
    key = (name, dim)
    if key not in _CACHE:
        _CACHE[key] = _BUILDERS[name](dim)
    entry = _CACHE[key]
    if backend == "analytic":
        return entry
    fd = CorpusEntry(**{**entry.__dict__})
    fd.metric = FiniteDifferenceMetric(entry.metric)
    return fd
