"""Chart-based Riemannian geometry.

Metrics are fields of symmetric positive-definite matrices on a coordinate
box. Every operation here is vectorized over a batch of points of shape
``(m, n)``; passing a single point of shape ``(n,)`` returns unbatched
results. Index conventions for arrays:

* ``dg[m, c, a, b]  = d_c g_ab``
* ``ddg[m, c, d, a, b] = d_c d_d g_ab``
* ``gamma[m, a, b, c] = Gamma^a_bc``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NotPositiveDefiniteError, PreconditionError
from .expr import Expression, Jet2, as_points, parse

__all__ = [
    "Chart", "MetricField", "FieldMetric", "FiniteDifferenceMetric", "ConformalMetric",
    "MetricJet", "ComposedField", "LinearCombination", "CallableField",
    "FiniteDifferenceField", "as_field", "field_jet", "metric_jet",
    "christoffel", "covariant_hessian", "laplacian", "covector_norm", "scalar_curvature",
    "euclidean",
]

DEFAULT_FD_STEP = 1e-4


@dataclass(frozen=True)
class Chart:
    """Open coordinate box in R^n, n >= 2."""

    dim: int
    lower: tuple = None
    upper: tuple = None
    excluded: str = ""

    def __post_init__(self):
        if self.dim < 2:
            raise PreconditionError("charts need dimension n >= 2")
        lo = (-np.inf,) * self.dim if self.lower is None else tuple(float(v) for v in self.lower)
        hi = (np.inf,) * self.dim if self.upper is None else tuple(float(v) for v in self.upper)
        if len(lo) != self.dim or len(hi) != self.dim:
            raise PreconditionError("bounds must have one entry per coordinate")
        if any(a >= b for a, b in zip(lo, hi)):
            raise PreconditionError("chart bounds must satisfy lower < upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, points):
        pts = np.atleast_2d(points)
        return np.all((pts > self.lower) & (pts < self.upper), axis=-1)

    def check(self, points):
        inside = self.contains(points)
        if not inside.all():
            bad = np.atleast_2d(points)[~inside][0]
            raise DomainError(f"point {bad.tolist()} lies outside the chart domain")


# -- scalar fields -------------------------------------------------------------

def as_field(f, dim):
    """Accept an Expression, expression text, or any object with ``jet``."""
    if isinstance(f, str):
        return parse(f, dim)
    if hasattr(f, "jet"):
        if getattr(f, "dim", dim) != dim:
            raise PreconditionError(f"field has {f.dim} variables, chart has {dim}")
        return f
    raise PreconditionError(f"cannot use {f!r} as a scalar field")


def field_jet(f, pts, order=2):
    """Batched ``(value, gradient, hessian)`` arrays of a scalar field."""
    if isinstance(f, Expression):
        v, g, h, _ = f._evaluate(pts, order)
        return v, g, h
    j = f.jet(pts)
    return np.asarray(j.value), np.asarray(j.gradient), np.asarray(j.hessian)


class ComposedField:
    """``F o f`` for a one-variable function given with its first two derivatives.

    ``F`` maps an array of values to the tuple ``(F, F', F'')``.
    """

    def __init__(self, F, inner):
        self.F = F
        self.inner = inner
        self.dim = inner.dim

    def jet(self, points):
        pts, single = as_points(points, self.dim)
        v, g, h = field_jet(self.inner, pts)
        f0, f1, f2 = (np.broadcast_to(np.asarray(a, float), v.shape) for a in self.F(v))
        hess = f1[:, None, None] * h + f2[:, None, None] * (g[:, :, None] * g[:, None, :])
        jet = Jet2(f0, f1[:, None] * g, hess)
        return jet[0] if single else jet


class LinearCombination:
    """``sum(c_i * f_i)`` over scalar fields."""

    def __init__(self, terms):
        self.terms = [(float(c), f) for c, f in terms]
        self.dim = self.terms[0][1].dim

    def jet(self, points):
        pts, single = as_points(points, self.dim)
        acc = None
        for c, f in self.terms:
            v, g, h = field_jet(f, pts)
            part = [c * v, c * g, c * h]
            acc = part if acc is None else [a + b for a, b in zip(acc, part)]
        jet = Jet2(*acc)
        return jet[0] if single else jet


class CallableField:
    """Field backed by a Python function ``func(points[m, n]) -> (v, g, h)``."""

    def __init__(self, func, dim, backend="analytic"):
        self.func = func
        self.dim = dim
        self.backend = backend

    def jet(self, points):
        pts, single = as_points(points, self.dim)
        jet = Jet2(*self.func(pts))
        return jet[0] if single else jet


class FiniteDifferenceField:
    """Field known only by values; derivatives by central differences.

    ``second=False`` skips the Hessian (filled with NaN) for fields where only
    first derivatives are ever consumed.
    """

    backend = "finite-difference"

    def __init__(self, values, dim, h=DEFAULT_FD_STEP, second=True):
        self.values = values
        self.dim = dim
        self.h = h
        self.second = second

    def jet(self, points):
        pts, single = as_points(points, self.dim)
        m, n = pts.shape
        steps = self.h * np.maximum(1.0, np.abs(pts))
        offsets = [np.zeros((m, n))]
        for c in range(n):
            e = np.zeros((m, n))
            e[:, c] = steps[:, c]
            offsets += [e, -e]
        if self.second:
            for c in range(n):
                for d in range(c + 1, n):
                    e = np.zeros((m, n))
                    e[:, c], e[:, d] = steps[:, c], steps[:, d]
                    f = e.copy()
                    f[:, d] *= -1
                    offsets += [e, -e, f, -f]
        stacked = np.concatenate([pts + o for o in offsets])
        vals = np.asarray(self.values(stacked), float).reshape(len(offsets), m)
        v = vals[0]
        grad = np.empty((m, n))
        hess = np.full((m, n, n), np.nan)
        for c in range(n):
            plus, minus = vals[1 + 2 * c], vals[2 + 2 * c]
            grad[:, c] = (plus - minus) / (2 * steps[:, c])
            if self.second:
                hess[:, c, c] = (plus - 2 * v + minus) / steps[:, c] ** 2
        if self.second:
            k = 1 + 2 * n
            for c in range(n):
                for d in range(c + 1, n):
                    pp, mm, pm, mp = vals[k], vals[k + 1], vals[k + 2], vals[k + 3]
                    k += 4
                    hess[:, c, d] = hess[:, d, c] = (pp + mm - pm - mp) / (4 * steps[:, c] * steps[:, d])
        jet = Jet2(v, grad, hess)
        return jet[0] if single else jet


# -- metrics -------------------------------------------------------------------

@dataclass
class MetricJet:
    g: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray = None
    ginv: np.ndarray = field(default=None, repr=False)


class MetricField:
    """Base class: subclasses implement ``_jet(pts, order)`` returning a MetricJet."""

    backend = "analytic"

    def __init__(self, chart: Chart):
        self.chart = chart
        self.dim = chart.dim

    def values(self, points):
        pts, single = as_points(points, self.dim)
        g = self._jet(pts, 0).g
        return g[0] if single else g

    def _jet(self, pts, order):
        raise NotImplementedError


class FieldMetric(MetricField):
    """Metric whose components are scalar fields (expressions by default).

    Only the upper triangle of ``entries`` is read; the lower triangle is
    mirrored, so symmetry is exact.
    """

    def __init__(self, entries, chart: Chart):
        super().__init__(chart)
        n = chart.dim
        if len(entries) != n or any(len(row) != n for row in entries):
            raise PreconditionError(f"metric needs {n}x{n} entries")
        self.entries = [[as_field(entries[a][b], n) if b >= a else None for b in range(n)]
                        for a in range(n)]
        self.backend = "analytic" if all(
            getattr(e, "backend", "analytic") == "analytic"
            for row in self.entries for e in row if e is not None) else "finite-difference"

    def _jet(self, pts, order):
        m, n = pts.shape
        g = np.empty((m, n, n))
        dg = np.empty((m, n, n, n)) if order >= 1 else None
        ddg = np.empty((m, n, n, n, n)) if order >= 2 else None
        for a in range(n):
            for b in range(a, n):
                e = self.entries[a][b]
                if order == 0:
                    v = e(pts) if isinstance(e, Expression) else field_jet(e, pts)[0]
                    g[:, a, b] = g[:, b, a] = v
                    continue
                v, gr, h = field_jet(e, pts, order=max(order, 1))
                g[:, a, b] = g[:, b, a] = v
                dg[:, :, a, b] = dg[:, :, b, a] = gr
                if order >= 2:
                    ddg[:, :, :, a, b] = ddg[:, :, :, b, a] = h
        return MetricJet(g, dg, ddg)


class FiniteDifferenceMetric(MetricField):
    """Central-difference derivatives of a value-only metric.

    ``source`` is a MetricField (only its values are used) or a function
    ``points[m, n] -> g[m, n, n]``. The step for coordinate ``c`` is
    ``h * max(1, |p_c|)``.
    """

    backend = "finite-difference"

    def __init__(self, source, chart: Chart = None, h=DEFAULT_FD_STEP):
        chart = chart or source.chart
        super().__init__(chart)
        self.source = source.values if isinstance(source, MetricField) else source
        self.h = h

    def _jet(self, pts, order):
        m, n = pts.shape
        g = np.asarray(self.source(pts), float)
        if order == 0:
            return MetricJet(g, None)
        steps = self.h * np.maximum(1.0, np.abs(pts))
        dg = np.empty((m, n, n, n))
        ddg = np.empty((m, n, n, n, n)) if order >= 2 else None
        shifted = {}
        for c in range(n):
            e = np.zeros((m, n))
            e[:, c] = steps[:, c]
            plus, minus = self.source(pts + e), self.source(pts - e)
            shifted[c] = (plus, minus, e)
            dg[:, c] = (plus - minus) / (2 * steps[:, c])[:, None, None]
            if order >= 2:
                ddg[:, c, c] = (plus - 2 * g + minus) / (steps[:, c] ** 2)[:, None, None]
        if order >= 2:
            for c in range(n):
                for d in range(c + 1, n):
                    ec, ed = shifted[c][2], shifted[d][2]
                    val = (self.source(pts + ec + ed) + self.source(pts - ec - ed)
                           - self.source(pts + ec - ed) - self.source(pts - ec + ed))
                    ddg[:, c, d] = ddg[:, d, c] = val / (4 * steps[:, c] * steps[:, d])[:, None, None]
        return MetricJet(g, dg, ddg)


class ConformalMetric(MetricField):
    """``exp(2 omega) * base`` for a scalar field ``omega``."""

    def __init__(self, base: MetricField, omega):
        super().__init__(base.chart)
        self.base = base
        self.omega = as_field(omega, base.dim)
        analytic = base.backend == "analytic" and getattr(self.omega, "backend", "analytic") == "analytic"
        self.backend = "analytic" if analytic else "finite-difference"

    def _jet(self, pts, order):
        bj = self.base._jet(pts, order)
        if order == 0:
            w = self.omega(pts) if isinstance(self.omega, Expression) else field_jet(self.omega, pts)[0]
            return MetricJet(np.exp(2 * w)[:, None, None] * bj.g, None)
        w, dw, hw = field_jet(self.omega, pts, order=max(order, 1))
        s = np.exp(2 * w)
        g = s[:, None, None] * bj.g
        # d_c(s g_ab) = s (2 w_c g_ab + d_c g_ab)
        dg = s[:, None, None, None] * (2 * dw[:, :, None, None] * bj.g[:, None] + bj.dg)
        ddg = None
        if order >= 2:
            ww = 4 * dw[:, :, None] * dw[:, None, :] + 2 * hw
            ddg = s[:, None, None, None, None] * (
                ww[:, :, :, None, None] * bj.g[:, None, None]
                + 2 * dw[:, :, None, None, None] * bj.dg[:, None]
                + 2 * dw[:, None, :, None, None] * bj.dg[:, :, None]
                + bj.ddg)
        return MetricJet(g, dg, ddg)


def euclidean(n, chart: Chart = None) -> FieldMetric:
    chart = chart or Chart(n)
    return FieldMetric([["1" if a == b else "0" for b in range(n)] for a in range(n)], chart)


def metric_jet(g: MetricField, pts, order=1) -> MetricJet:
    """Metric jet with the inverse attached, after domain and Cholesky checks."""
    g.chart.check(pts)
    jet = g._jet(pts, order)
    if not np.all(np.isfinite(jet.g)):
        raise DomainError("metric is not finite at a queried point")
    try:
        np.linalg.cholesky(jet.g)
    except np.linalg.LinAlgError:
        bad = [i for i in range(len(pts)) if np.any(np.linalg.eigvalsh(jet.g[i]) <= 0)]
        where = pts[bad[0]].tolist() if bad else "a queried point"
        raise NotPositiveDefiniteError(f"metric is not positive-definite at {where}") from None
    jet.ginv = np.linalg.inv(jet.g)
    return jet


def _christoffel(jet: MetricJet):
    # Gamma^a_bc = 1/2 g^ad (d_b g_dc + d_c g_db - d_d g_bc)
    dg = jet.dg
    lowered = dg.transpose(0, 2, 1, 3) + dg.transpose(0, 2, 3, 1) - dg
    return 0.5 * np.einsum("mad,mdbc->mabc", jet.ginv, lowered)


def _unbatch(single, *arrays):
    if single:
        out = tuple(a[0] for a in arrays)
    else:
        out = arrays
    return out[0] if len(out) == 1 else out


def christoffel(g: MetricField, p):
    pts, single = as_points(p, g.dim)
    return _unbatch(single, _christoffel(metric_jet(g, pts)))


def _covariant_hessian(jet, gamma, grad, hess):
    return hess - np.einsum("mcab,mc->mab", gamma, grad)


def covariant_hessian(g: MetricField, f, p):
    pts, single = as_points(p, g.dim)
    f = as_field(f, g.dim)
    jet = metric_jet(g, pts)
    _, grad, hess = field_jet(f, pts)
    return _unbatch(single, _covariant_hessian(jet, _christoffel(jet), grad, hess))


def laplacian(g: MetricField, f, p):
    pts, single = as_points(p, g.dim)
    f = as_field(f, g.dim)
    jet = metric_jet(g, pts)
    _, grad, hess = field_jet(f, pts)
    cov = _covariant_hessian(jet, _christoffel(jet), grad, hess)
    return _unbatch(single, np.einsum("mab,mab->m", jet.ginv, cov))


def covector_norm(g: MetricField, u, p):
    """``sqrt(g^-1(u, u))`` for covector components ``u`` at ``p``."""
    pts, single = as_points(p, g.dim)
    u = np.broadcast_to(np.asarray(u, float), pts.shape)
    jet = metric_jet(g, pts, order=0)
    return _unbatch(single, np.sqrt(np.einsum("ma,mab,mb->m", u, jet.ginv, u)))


def _christoffel_derivative(jet: MetricJet):
    """``dgamma[m, e, a, b, c] = d_e Gamma^a_bc`` from analytic metric partials."""
    dginv = -np.einsum("map,mepq,mqd->mead", jet.ginv, jet.dg, jet.ginv)
    dg = jet.dg
    lowered = dg.transpose(0, 2, 1, 3) + dg.transpose(0, 2, 3, 1) - dg  # [m, d, b, c]
    ddg = jet.ddg  # [m, e, c, a, b]
    dlowered = (ddg.transpose(0, 1, 3, 2, 4)   # d_e d_b g_dc -> [m, e, d, b, c]
                + ddg.transpose(0, 1, 3, 4, 2)  # d_e d_c g_db
                - ddg)                           # d_e d_d g_bc
    return 0.5 * (np.einsum("mead,mdbc->meabc", dginv, lowered)
                  + np.einsum("mad,medbc->meabc", jet.ginv, dlowered))


def _scalar_curvature(gamma, dgamma, ginv):
    ricci = (np.einsum("maadb->mbd", dgamma) - np.einsum("mdaab->mbd", dgamma)
             + np.einsum("maae,medb->mbd", gamma, gamma) - np.einsum("made,meab->mbd", gamma, gamma))
    return np.einsum("mbd,mbd->m", ginv, ricci)


def scalar_curvature(g: MetricField, p):
    """Ricci scalar. The finite-difference backend differentiates Gamma numerically."""
    pts, single = as_points(p, g.dim)
    if g.backend == "analytic":
        jet = metric_jet(g, pts, order=2)
        gamma = _christoffel(jet)
        dgamma = _christoffel_derivative(jet)
    else:
        jet = metric_jet(g, pts, order=1)
        gamma = _christoffel(jet)
        m, n = pts.shape
        h = getattr(g, "h", DEFAULT_FD_STEP)
        steps = h * np.maximum(1.0, np.abs(pts))
        dgamma = np.empty((m, n) + gamma.shape[1:])
        for e in range(n):
            shift = np.zeros((m, n))
            shift[:, e] = steps[:, e]
            plus = _christoffel(metric_jet(g, pts + shift))
            minus = _christoffel(metric_jet(g, pts - shift))
            dgamma[:, e] = (plus - minus) / (2 * steps[:, e])[:, None, None, None]
    return _unbatch(single, _scalar_curvature(gamma, dgamma, jet.ginv))
