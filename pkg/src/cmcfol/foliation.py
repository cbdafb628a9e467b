"""Level-set foliation operators.

A slicing is given by a slice function ``f`` whose differential never
vanishes. The leaf through ``p`` is ``{f = f(p)}``, oriented by the unit
conormal ``nu = df / |df|_g``, and its mean curvature is

    (n-1) H = Lap f / |df| - Hess f(grad f, grad f) / |df|^3.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateSliceError, DomainError, PreconditionError
from .expr import Expression, as_points
from .geometry import (
    FiniteDifferenceField, MetricField, _christoffel, _covariant_hessian, _unbatch,
    as_field, field_jet, metric_jet,
)

log = logging.getLogger(__name__)

DEFAULT_EPS_DF = 1e-8


@dataclass(frozen=True)
class SliceFunction:
    """Scalar field used as a slice function; ``eps_df`` is the gradient floor."""

    field: object
    eps_df: float = DEFAULT_EPS_DF

    @property
    def dim(self):
        return self.field.dim

    def jet(self, points):
        return self.field.jet(points)

    def __call__(self, points):
        pts, single = as_points(points, self.dim)
        v = self.field(pts) if isinstance(self.field, Expression) else field_jet(self.field, pts, 1)[0]
        return v[0] if single else v


def as_slice(f, dim, eps_df=None) -> SliceFunction:
    if isinstance(f, SliceFunction):
        return f if eps_df is None else SliceFunction(f.field, eps_df)
    return SliceFunction(as_field(f, dim), DEFAULT_EPS_DF if eps_df is None else eps_df)


@dataclass
class _Local:
    """Everything the pointwise formulas need at a batch of points."""

    pts: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    metric: object
    value: np.ndarray
    grad: np.ndarray      # df_a
    grad_up: np.ndarray   # df^a
    hess: np.ndarray      # coordinate second partials
    cov: np.ndarray       # covariant Hessian
    norm: np.ndarray

    @property
    def n(self):
        return self.pts.shape[1]

    @property
    def lap(self):
        return np.einsum("mab,mab->m", self.ginv, self.cov)

    @property
    def ffhess(self):
        return np.einsum("ma,mb,mab->m", self.grad_up, self.grad_up, self.cov)


def _local(g: MetricField, f, pts, eps_df=None):
    jet = metric_jet(g, pts, order=1)
    gamma = _christoffel(jet)
    v, grad, hess = field_jet(f.field if isinstance(f, SliceFunction) else f, pts)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(grad))):
        raise DomainError("slice function is not finite at a queried point")
    grad_up = np.einsum("mab,mb->ma", jet.ginv, grad)
    norm = np.sqrt(np.einsum("ma,ma->m", grad, grad_up))
    if eps_df is not None and np.any(norm < eps_df):
        i = int(np.argmin(norm))
        raise DegenerateSliceError(
            f"gradient below threshold: |df| = {norm[i]:.3g} < {eps_df:g} at {pts[i].tolist()}")
    cov = _covariant_hessian(jet, gamma, grad, hess)
    return _Local(pts, jet.ginv, gamma, jet, v, grad, grad_up, hess, cov, norm)


def _prepare(g, f, p):
    pts, single = as_points(p, g.dim)
    f = as_slice(f, g.dim)
    return pts, single, f


def unit_normal(g: MetricField, f, p):
    """Unit conormal ``df/|df|_g`` (covector components)."""
    pts, single, f = _prepare(g, f, p)
    loc = _local(g, f, pts, f.eps_df)
    return _unbatch(single, loc.grad / loc.norm[:, None])


def second_fundamental_form(g: MetricField, f, p):
    """``h_ab = P_a^c (grad_c grad_d f) P_b^d / |df|`` with ``P = 1 - nu (x) nu^#``."""
    pts, single, f = _prepare(g, f, p)
    loc = _local(g, f, pts, f.eps_df)
    return _unbatch(single, _second_ff(loc))


def _second_ff(loc):
    nu = loc.grad / loc.norm[:, None]
    nu_up = loc.grad_up / loc.norm[:, None]
    proj = np.eye(loc.n)[None] - nu[:, :, None] * nu_up[:, None, :]
    h = np.einsum("mac,mcd,mbd->mab", proj, loc.cov, proj) / loc.norm[:, None, None]
    return 0.5 * (h + h.transpose(0, 2, 1))


@dataclass
class CurvatureSample:
    point: np.ndarray
    H: np.ndarray
    nu: np.ndarray
    df_norm: np.ndarray

    def __getitem__(self, i):
        return CurvatureSample(self.point[i], self.H[i], self.nu[i], self.df_norm[i])


def _mean_curvature(loc):
    n = loc.n
    N = loc.norm
    return (loc.lap / N - loc.ffhess / N**3) / (n - 1)


def _divergence_form(loc):
    """``(1/(n-1)) div(df^#/|df|)`` from raw coordinate partials, for cross-checks."""
    ginv, dg, f1, f2, N = loc.ginv, loc.metric.dg, loc.grad, loc.hess, loc.norm
    dginv = -np.einsum("map,mepq,mqd->mead", ginv, dg, ginv)
    # d_e (g^ab f_b)
    dV = np.einsum("meab,mb->mea", dginv, f1) + np.einsum("mab,mbe->mea", ginv, f2)
    dN = (np.einsum("mecd,mc,md->me", dginv, f1, f1) + 2 * np.einsum("md,mde->me", loc.grad_up, f2)) / (2 * N[:, None])
    div = np.einsum("maa->m", dV) / N - np.einsum("ma,ma->m", loc.grad_up, dN) / N**2
    div += np.einsum("mbba,ma->m", loc.gamma, loc.grad_up) / N
    return div / (loc.n - 1)


def mean_curvature(g: MetricField, f, p, debug=False) -> CurvatureSample:
    """Mean curvature of the leaf of ``f`` through ``p``.

    With ``debug=True`` the result is cross-checked against the divergence
    form and an ``AssertionError`` is raised on a mismatch above 1e-8
    (relative to ``1 + |H|``).
    """
    pts, single, f = _prepare(g, f, p)
    loc = _local(g, f, pts, f.eps_df)
    H = _mean_curvature(loc)
    if debug:
        other = _divergence_form(loc)
        err = np.abs(H - other) / (1 + np.abs(H))
        if np.any(err > 1e-8):
            raise AssertionError(f"divergence-form mismatch {err.max():.3g}")
    sample = CurvatureSample(pts, H, loc.grad / loc.norm[:, None], loc.norm)
    return sample[0] if single else sample


def mean_curvature_field(g: MetricField, f, h=1e-4) -> FiniteDifferenceField:
    """``H_f`` as a scalar field with finite-difference derivatives."""
    f = as_slice(f, g.dim)
    return FiniteDifferenceField(lambda pts: _mean_curvature(_local(g, f, pts, f.eps_df)), g.dim, h=h)


def _cmc_bracket(loc):
    return loc.norm**2 * loc.lap - loc.ffhess


def generic_cmc_residual(g: MetricField, f, lam, p, form="standard"):
    """Residual of ``(n-1) lam f |df|^3 = |df|^2 Lap f - Hess f(grad f, grad f)``.

    ``form="rational"`` expects the mean-curvature field itself in place of
    ``f`` (see :func:`mean_curvature_field`) and skips the gradient floor,
    because the rational equation is meant to be evaluated where ``dH`` may
    vanish.
    """
    if lam not in (1, -1):
        raise PreconditionError("lambda must be +1 or -1")
    if form not in ("standard", "rational"):
        raise PreconditionError(f"unknown residual form {form!r}")
    pts, single = as_points(p, g.dim)
    if form == "standard":
        f = as_slice(f, g.dim)
        loc = _local(g, f, pts, f.eps_df)
    else:
        loc = _local(g, f.field if isinstance(f, SliceFunction) else as_field(f, g.dim), pts)
    res = (loc.n - 1) * lam * loc.value * loc.norm**3 - _cmc_bracket(loc)
    return _unbatch(single, res)


def weighted_cmc_residual(g: MetricField, f, p, lhs, weight):
    """``(n-1) lhs(f) |df|^3 - weight(f) (|df|^2 Lap f - Hess f(grad f, grad f))``.

    Covers equations of the form ``H_f = lhs(f)/weight(f)`` after clearing
    the denominator, e.g. the height slicing of the round sphere with
    ``lhs(t) = -t`` and ``weight(t) = sqrt(1 - t^2)``.
    """
    pts, single, f = _prepare(g, f, p)
    loc = _local(g, f, pts, f.eps_df)
    res = (loc.n - 1) * lhs(loc.value) * loc.norm**3 - weight(loc.value) * _cmc_bracket(loc)
    return _unbatch(single, res)


# -- CMC detection -------------------------------------------------------------

@dataclass(frozen=True)
class Ray:
    origin: tuple
    direction: tuple
    length: float = 1.0

    def at(self, s):
        return np.asarray(self.origin, float) + np.multiply.outer(s, np.asarray(self.direction, float))


@dataclass
class CmcReport:
    is_cmc: bool
    tol: float
    leaves: list = field(default_factory=list)  # dicts: t, H_mean, spread, samples, flags

    @property
    def spreads(self):
        return [leaf["spread"] for leaf in self.leaves]

    @property
    def table(self):
        return [(leaf["t"], leaf["H_mean"]) for leaf in self.leaves]


def _threads():
    try:
        return max(1, int(os.environ.get("CMCFOL_THREADS", "0")) or min(8, os.cpu_count() or 1))
    except ValueError:
        return 1


def leaf_point(f: SliceFunction, ray: Ray, t, scan=64):
    """First point along ``ray`` with ``f = t``, or None if the ray misses the leaf."""
    s = np.linspace(0.0, ray.length, scan + 1)
    with np.errstate(all="ignore"):
        vals = f.field(ray.at(s), strict=False) if isinstance(f.field, Expression) \
            else field_jet(f.field, ray.at(s), 1)[0]
    diff = vals - t
    exact = np.flatnonzero(diff == 0)
    hits = np.flatnonzero(np.isfinite(diff[:-1]) & np.isfinite(diff[1:]) & (np.sign(diff[:-1]) * np.sign(diff[1:]) < 0))
    if exact.size and (not hits.size or exact[0] <= hits[0]):
        return ray.at(s[exact[0]])
    if not hits.size:
        return None
    i = hits[0]
    phi = lambda x: float(f(ray.at(x))) - t  # noqa: E731
    root = brentq(phi, s[i], s[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    d = np.asarray(ray.direction, float)
    for _ in range(2):  # Newton polish
        jet = f.jet(ray.at(root))
        slope = float(np.dot(jet.gradient, d))
        if slope == 0:
            break
        step = (float(jet.value) - t) / slope
        if not np.isfinite(step) or abs(step) > (s[i + 1] - s[i]):
            break
        root -= step
    return ray.at(root)


def detect_cmc(g: MetricField, f, leaf_values, samples_per_leaf, rays, tol=None) -> CmcReport:
    """Sample each leaf along probe rays and compare mean curvatures.

    ``tol`` defaults to the relative rule ``spread <= 1e-6 (1 + |H|)``.
    """
    f = as_slice(f, g.dim)
    rays = [r if isinstance(r, Ray) else Ray(*r) for r in rays]
    if samples_per_leaf < 1:
        raise PreconditionError("need at least one sample per leaf")

    def one_leaf(t):
        pts = []
        for ray in rays:
            p = leaf_point(f, ray, t)
            if p is not None:
                pts.append(p)
            if len(pts) == samples_per_leaf:
                break
        if not pts:
            raise PreconditionError(f"leaf value {t:g} not attained along any probe ray")
        H = mean_curvature(g, f, np.array(pts)).H
        mean = float(H.mean())
        spread = float(H.max() - H.min())
        bound = 1e-6 * (1 + abs(mean)) if tol is None else tol
        flags = ["insufficient samples"] if len(pts) < 2 else []
        return {"t": float(t), "H_mean": mean, "spread": spread, "samples": len(pts),
                "ok": spread <= bound, "flags": flags}

    with ThreadPoolExecutor(_threads()) as pool:
        leaves = list(pool.map(one_leaf, leaf_values))
    report_tol = 1e-6 if tol is None else tol
    return CmcReport(all(leaf["ok"] for leaf in leaves), report_tol, leaves)


# -- arc-length normalization -------------------------------------------------

@dataclass
class Normalization:
    """Table of ``F`` with ``|d(F o f o gamma)/ds| = 1`` and ``F(f(gamma(0))) = 0``."""

    s: np.ndarray
    f_values: np.ndarray
    F_values: np.ndarray

    def __call__(self, v):
        order = np.argsort(self.f_values)
        return np.interp(v, self.f_values[order], self.F_values[order])


def normalize_constant_H(g: MetricField, f, curve, s=None, threshold=1e-8, cmc_rays=None):
    """Reparametrize ``f`` to unit speed along the transverse curve ``curve``.

    ``s`` is the arc-length parameter of the sampled points; when omitted it
    is accumulated from chords measured with ``g`` at chord midpoints.
    Passing ``cmc_rays`` first checks that ``H`` is constant on the leaves
    crossed by the curve.
    """
    f = as_slice(f, g.dim)
    pts = np.atleast_2d(np.asarray(curve, float))
    if len(pts) < 2:
        raise PreconditionError("curve needs at least two points")
    if s is None:
        chords = np.diff(pts, axis=0)
        mids = 0.5 * (pts[1:] + pts[:-1])
        gm = g.values(mids)
        s = np.concatenate([[0.0], np.cumsum(np.sqrt(np.einsum("ma,mab,mb->m", chords, gm, chords)))])
    s = np.asarray(s, float)
    v = np.asarray(f(pts), float)
    tangent = np.gradient(pts, s, axis=0)
    speed = np.einsum("ma,ma->m", field_jet(f.field, pts, 1)[1], tangent)
    if np.any(np.abs(speed) < threshold):
        raise PreconditionError("curve tangent to leaf")
    if not (np.all(speed > 0) or np.all(speed < 0)):
        raise PreconditionError("curve crosses leaves non-monotonically")
    if cmc_rays is not None:
        report = detect_cmc(g, f, v, len(cmc_rays), cmc_rays)
        if not report.is_cmc:
            raise PreconditionError("mean curvature is not constant on the leaves crossed by the curve")
    sign = 1.0 if speed[0] > 0 else -1.0
    return Normalization(s, v, sign * (s - s[0]))


# -- linearization -------------------------------------------------------------

def linearize_mean_curvature(g: MetricField, f, u, p, debug=False):
    """Directional derivative of ``f -> H_f`` in the direction ``u``.

    Expanded divergence form:
    ``(n-1) dH = Lap u/N - <du,df> Lap f/N^3 - 2 Hf(du#, df#)/N^3
    - Hu(df#, df#)/N^3 + 3 <du,df> Hf(df#, df#)/N^5``.
    """
    pts, single, f = _prepare(g, f, p)
    loc = _local(g, f, pts, f.eps_df)
    u = as_field(u, g.dim)
    _, ug, uh = field_jet(u, pts)
    ucov = _covariant_hessian(loc.metric, loc.gamma, ug, uh)
    u_up = np.einsum("mab,mb->ma", loc.ginv, ug)
    N = loc.norm
    dot = np.einsum("ma,ma->m", ug, loc.grad_up)
    lap_u = np.einsum("mab,mab->m", loc.ginv, ucov)
    mixed = np.einsum("ma,mb,mab->m", u_up, loc.grad_up, loc.cov)
    ffu = np.einsum("ma,mb,mab->m", loc.grad_up, loc.grad_up, ucov)
    dH = (lap_u / N - dot * loc.lap / N**3 - 2 * mixed / N**3 - ffu / N**3
          + 3 * dot * loc.ffhess / N**5) / (loc.n - 1)
    if debug:
        # The reduced form is valid where <du, df> vanishes to first order.
        ddot = np.einsum("mab,mb->ma", ucov, loc.grad_up) + np.einsum("mab,mb->ma", loc.cov, u_up)
        orth = (np.abs(dot) < 1e-10) & (np.linalg.norm(ddot, axis=1) < 1e-10)
        reduced = (lap_u / N + ffu / N**3) / (loc.n - 1)
        if np.any(np.abs(dH - reduced)[orth] > 1e-8):
            raise AssertionError("orthogonal-variation reduction mismatch")
    return _unbatch(single, dH)
