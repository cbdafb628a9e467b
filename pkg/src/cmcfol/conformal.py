"""Conformal rescaling of slicings.

Under ``g_hat = exp(2 w) g`` the mean curvature of a leaf becomes

    H_hat = exp(-w) (H + nu^a d_a w).

Conformal factors are built leafwise by integrating along flow lines of
``X = grad f / |grad f|^2``. ``df(X) = 1``, so the flow parameter is the slice
value ``t`` itself, and ``X`` is the same for every metric in the conformal
class.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSliceError, DomainError, FlowLineError, NotPositiveDefiniteError, PreconditionError,
)
from .expr import Expression, as_points
from .foliation import _local, _mean_curvature, as_slice
from .geometry import ConformalMetric, FiniteDifferenceField, MetricField, _unbatch, as_field, field_jet, metric_jet

RTOL = 1e-8
H_MIN = 1e-12
TRACE_STEPS = 128


def transform_mean_curvature(H, omega, nu, g: MetricField, p, tol=1e-8):
    """Mean curvature of the same leaf for ``exp(2 omega) g``; ``nu`` must be g-unit."""
    pts, single = as_points(p, g.dim)
    nu = np.broadcast_to(np.asarray(nu, float), pts.shape)
    jet = metric_jet(g, pts, order=0)
    nu_up = np.einsum("mab,mb->ma", jet.ginv, nu)
    length = np.sqrt(np.einsum("ma,ma->m", nu, nu_up))
    if np.any(np.abs(length - 1) > tol):
        raise PreconditionError(f"conormal is not unit: |nu|_g = {length[np.argmax(np.abs(length - 1))]:.12g}")
    w, dw, _ = field_jet(as_field(omega, g.dim), pts, order=1)
    return _unbatch(single, np.exp(-w) * (np.broadcast_to(H, w.shape) + np.einsum("ma,ma->m", nu_up, dw)))


# -- flow lines ----------------------------------------------------------------

@dataclass
class FlowLine:
    seed: np.ndarray
    t: np.ndarray
    points: np.ndarray
    df_norm: np.ndarray
    integral: np.ndarray  # (K, k) running integrals of the user integrand


def _project(f, x, t, iterations=3):
    """Newton-project points onto the leaves ``f = t`` along the coordinate gradient."""
    for _ in range(iterations):
        v, grad, _ = field_jet(f.field, x, order=1)
        x = x - ((v - t) / np.einsum("ma,ma->m", grad, grad))[:, None] * grad
    return x


class _Flow:
    def __init__(self, g, f, aux_rhs=None, n_aux=0):
        self.g, self.f, self.aux_rhs, self.n_aux = g, f, aux_rhs, n_aux

    def rhs(self, t, x, y):
        try:
            loc = _local(self.g, self.f, x, self.f.eps_df)
        except DegenerateSliceError as exc:
            raise FlowLineError(f"gradient collapse along flow line: {exc}") from None
        X = loc.grad_up / (loc.norm**2)[:, None]
        dy = self.aux_rhs(loc, t, y) if self.aux_rhs else np.zeros_like(y)
        return X, dy

    def rk4(self, t, x, y, h):
        k1 = self.rhs(t, x, y)
        k2 = self.rhs(t + h / 2, x + h / 2 * k1[0], y + h / 2 * k1[1])
        k3 = self.rhs(t + h / 2, x + h / 2 * k2[0], y + h / 2 * k2[1])
        k4 = self.rhs(t + h, x + h * k3[0], y + h * k3[1])
        return (x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))

    def adaptive(self, t0, x, y, targets, rtol=RTOL, h_min=H_MIN):
        """Integrate from ``t0`` through monotone ``targets``; returns states at each target."""
        out_x, out_y = [], []
        t = t0
        h = max(abs(targets[-1] - t0) / 16, 1e-3) if len(targets) else 0
        for target in targets:
            while t != target:
                step = np.sign(target - t) * min(h, abs(target - t))
                last = abs(step) >= abs(target - t)
                try:
                    full = self.rk4(t, x, y, step)
                    mid = self.rk4(t, x, y, step / 2)
                    half = self.rk4(t + step / 2, *mid, step / 2)
                except (DomainError, NotPositiveDefiniteError) as exc:
                    h = abs(step) / 2
                    if h < h_min:
                        raise FlowLineError(f"flow line leaves the chart domain near t={t:.6g}: {exc}") from None
                    continue
                err = max(
                    np.max(np.abs(half[0] - full[0]) / (1 + np.abs(half[0])), initial=0),
                    np.max(np.abs(half[1] - full[1]) / (1 + np.abs(half[1])), initial=0),
                ) / rtol
                if not np.isfinite(err):
                    err = np.inf
                if err <= 1:
                    x = half[0] + (half[0] - full[0]) / 15
                    y = half[1] + (half[1] - full[1]) / 15
                    t = target if last else t + step
                    x = _project(self.f, x, t)
                    h = abs(step) * (4.0 if err == 0 else min(4.0, max(0.2, 0.9 * err ** -0.2)))
                else:
                    h = abs(step) * max(0.1, 0.9 * err ** -0.25)
                    if h < h_min:
                        raise FlowLineError(f"step-size underflow near t={t:.6g}")
            out_x.append(x)
            out_y.append(y)
        return out_x, out_y

    def fixed(self, t0, t1, x, y, steps=TRACE_STEPS):
        """Fixed-step RK4 with per-point end values ``t1``; smooth in the inputs."""
        h = (t1 - t0) / steps
        t = t0.copy()
        for _ in range(steps):
            x, y = self._rk4_vec(t, x, y, h)
            t = t + h
        return x, y

    def _rk4_vec(self, t, x, y, h):
        hx, hy = h[:, None], h[:, None]
        k1 = self.rhs(t, x, y)
        k2 = self.rhs(t + h / 2, x + hx / 2 * k1[0], y + hy / 2 * k1[1])
        k3 = self.rhs(t + h / 2, x + hx / 2 * k2[0], y + hy / 2 * k2[1])
        k4 = self.rhs(t + h, x + hx * k3[0], y + hy * k3[1])
        return (x + hx / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                y + hy / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


def _sweep(flow: _Flow, t0, t_grid, seeds, y0, rtol=RTOL, h_min=H_MIN):
    """Integrate every seed through ``t_grid``; returns (t, points[S,K,n], aux[S,K,k])."""
    t_grid = np.unique(np.append(np.asarray(t_grid, float), t0))
    i0 = int(np.searchsorted(t_grid, t0))
    xs = [None] * len(t_grid)
    ys = [None] * len(t_grid)
    xs[i0], ys[i0] = seeds, y0
    fx, fy = flow.adaptive(t0, seeds, y0, list(t_grid[i0 + 1:]), rtol, h_min)
    bx, by = flow.adaptive(t0, seeds, y0, list(t_grid[:i0][::-1]), rtol, h_min)
    xs[i0 + 1:], ys[i0 + 1:] = fx, fy
    xs[:i0], ys[:i0] = bx[::-1], by[::-1]
    return t_grid, np.stack(xs, axis=1), np.stack(ys, axis=1)


def _seeds_on_leaf(f, seeds, t0, dim):
    seeds = np.atleast_2d(np.asarray(seeds, float))
    if seeds.shape[1] != dim:
        raise PreconditionError(f"seeds must have {dim} coordinates")
    with np.errstate(all="ignore"):
        seeds = _project(f, seeds, t0, iterations=6)
    off = np.abs(f(seeds) - t0)
    if not np.all(off <= 1e-10 * (1 + abs(t0))):
        raise PreconditionError("seed could not be placed on the reference leaf")
    return seeds


def integrate_flow_line(g: MetricField, f, seed, t_range, integrand=None, rtol=RTOL, h_min=H_MIN) -> FlowLine:
    """Integral curve of ``grad f/|grad f|^2`` from ``seed`` through the values ``t_range``.

    ``integrand(points, t, H, df_norm)`` is integrated in ``t`` alongside the
    curve; its running integral is stored on the returned line.
    """
    f = as_slice(f, g.dim)
    seed = np.asarray(seed, float).reshape(1, -1)
    t0 = float(f(seed)[0])
    rhs = None
    if integrand is not None:
        rhs = lambda loc, t, y: np.asarray(integrand(loc.pts, t, _mean_curvature(loc), loc.norm), float).reshape(-1, 1)  # noqa: E731
    flow = _Flow(g, f, rhs)
    _local(g, f, seed, f.eps_df)  # fail fast on a degenerate seed
    t, pts, aux = _sweep(flow, t0, t_range, seed, np.zeros((1, 1)), rtol, h_min)
    norms = _local(g, f, pts[0], f.eps_df).norm
    return FlowLine(seed[0], t, pts[0], norms, aux[0])


# -- conformal factors -----------------------------------------------------------

@dataclass(frozen=True)
class Collar:
    """Reference leaf value, output leaf values and seed points on the reference leaf."""

    t0: float
    t_grid: tuple
    seeds: tuple

    @classmethod
    def make(cls, t0, t_grid, seeds):
        return cls(float(t0), tuple(float(v) for v in t_grid), tuple(map(tuple, np.atleast_2d(seeds))))


def _target_fn(target, dim):
    """Target mean curvature as ``fn(points, f_values)``."""
    if target is None:
        return lambda pts, fv: np.zeros(len(pts))
    if isinstance(target, (int, float)):
        return lambda pts, fv: np.full(len(pts), float(target))
    if isinstance(target, (str, Expression)) or hasattr(target, "jet"):
        fld = as_field(target, dim)
        return lambda pts, fv: field_jet(fld, pts, order=1)[0]
    return target


@dataclass
class ConformalFactor:
    """Tabulated conformal exponent ``omega`` relative to the input metric.

    ``table`` has shape (seeds, leaves); ``points`` holds the flow-line nodes.
    """

    kind: str
    g: MetricField
    f: object
    collar: Collar
    t: np.ndarray
    points: np.ndarray
    table: np.ndarray
    C: float = None
    params: dict = field(default_factory=dict)

    # the per-kind ODE data lives in params: "rhs", "y0", "finish"

    def omega_at(self, p, steps=TRACE_STEPS):
        """Evaluate omega off the grid by retracing the flow line through ``p``.

        Fixed-step RK4 is used both ways so the result is a smooth function of ``p``.
        """
        pts, single = as_points(p, self.g.dim)
        t_p = np.asarray(self.f(pts), float)
        t0 = np.full(len(pts), self.collar.t0)
        back = _Flow(self.g, self.f)
        k = self.params["y0"].shape[1]
        seeds, _ = back.fixed(t_p, t0, pts, np.zeros((len(pts), k)), steps)
        fwd = _Flow(self.g, self.f, self.params["rhs"])
        y0 = np.repeat(self.params["y0"][:1], len(pts), axis=0)
        _, y = fwd.fixed(t0, t_p, seeds, y0, steps)
        return _unbatch(single, self.params["finish"](y, t_p))

    def field(self, h=1e-4, second=False) -> FiniteDifferenceField:
        return FiniteDifferenceField(self.omega_at, self.g.dim, h=h, second=second)

    def metric(self, **kw) -> ConformalMetric:
        return ConformalMetric(self.g, self.field(**kw))

    def target(self):
        """Prescribed mean curvature at the table nodes, shape (seeds, leaves)."""
        S, K, n = self.points.shape
        flat = self.points.reshape(-1, n)
        fv = np.broadcast_to(self.t, (S, K)).reshape(-1)
        return self.params["target"](flat, fv, self.table.reshape(-1)).reshape(S, K)

    def recompute_H(self):
        """Mean curvature of the leaves under ``exp(2 omega) g`` at the table nodes."""
        from .foliation import mean_curvature
        S, K, n = self.points.shape
        return mean_curvature(self.metric(), self.f, self.points.reshape(-1, n)).H.reshape(S, K)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed_index", "t", "omega"])
        for i in range(self.table.shape[0]):
            for j, t in enumerate(self.t):
                w.writerow([i, f"{t:.17g}", f"{self.table[i, j]:.17g}"])
        return buf.getvalue()


def _build(kind, g, f, collar: Collar, rhs, y0, finish, target, C=None, rtol=RTOL):
    f = as_slice(f, g.dim)
    seeds = _seeds_on_leaf(f, collar.seeds, collar.t0, g.dim)
    _local(g, f, seeds, f.eps_df)
    Y0 = np.repeat(np.atleast_2d(y0), len(seeds), axis=0)
    flow = _Flow(g, f, rhs)
    t, pts, states = _sweep(flow, collar.t0, collar.t_grid, seeds, Y0, rtol)
    if not np.all(np.isfinite(states)):
        raise FlowLineError("integral diverged along a flow line (unbounded integrand on the collar)")
    C, finish_C = finish(states)
    table = finish_C(states, np.broadcast_to(t, states.shape[:2]))
    params = {"rhs": rhs, "y0": np.atleast_2d(np.asarray(y0, float)), "finish": finish_C, "target": target}
    return ConformalFactor(kind, g, f, collar, t, pts, table, C, params)


def minimalizing_factor(g: MetricField, f, collar: Collar, rtol=RTOL) -> ConformalFactor:
    """``omega = -int H/|df| dt`` along flow lines, zero on the reference leaf."""
    rhs = lambda loc, t, y: (-_mean_curvature(loc) / loc.norm)[:, None]  # noqa: E731
    finish = lambda states: (None, lambda y, t: y[..., 0])  # noqa: E731
    return _build("minimalizing", g, f, collar, rhs, [0.0], finish,
                  lambda pts, fv, w: np.zeros(len(pts)), rtol=rtol)


def _positive_log_arg(arg):
    if np.any(arg <= 0):
        raise PreconditionError("log argument nonpositive: constant C too small for positivity")
    return arg


def prescribing_factor(g: MetricField, f, h, collar: Collar, C="auto", rtol=RTOL) -> ConformalFactor:
    """Minimalize, then ``omega += -log(C - J)`` with ``J' = h exp(omega_min)/|df|``.

    The returned exponent is the total one relative to ``g``, so it equals
    ``-log C`` on the reference leaf rather than 0.
    """
    dim = g.dim
    h_fn = _target_fn(h, dim)

    def rhs(loc, t, y):
        return np.stack([-_mean_curvature(loc) / loc.norm,
                         h_fn(loc.pts, loc.value) * np.exp(y[:, 0]) / loc.norm], axis=1)

    def finish(states):
        c = float(np.max(states[..., 1]) + 1.0) if C == "auto" else float(C)
        return c, lambda y, t: y[..., 0] - np.log(_positive_log_arg(c - y[..., 1]))

    target = lambda pts, fv, w: h_fn(pts, fv)  # noqa: E731
    return _build("prescribing", g, f, collar, rhs, [0.0, 0.0], finish, target, C, rtol)


def cmc_factor(g: MetricField, f, collar: Collar, lam=None, G=None, C="auto",
               rescale_slice=False, rtol=RTOL) -> ConformalFactor:
    """Conformal factor making the slicing CMC.

    Default mode prescribes ``H_hat = G(f)`` (``G = lam * identity`` when only
    ``lam`` is given). With ``rescale_slice=True`` the target is
    self-consistent, ``H_hat = lam * exp(omega) f``, i.e. the rescaled slice
    function ``rho = exp(omega) f`` solves the generic CMC equation. Writing
    ``u = exp(-2 omega)`` this is the linear equation
    ``u' = (2H/|df|) u - 2 lam f/|df|``, solved as ``u = C a + b``.
    """
    if G is None and lam is None:
        raise PreconditionError("give lam or G")
    if G is None:
        G = lambda v: lam * v  # noqa: E731
    if not rescale_slice:
        return _target_cmc(g, f, collar, G, C, rtol)
    if lam not in (1, -1):
        raise PreconditionError("rescale_slice needs lam = +1 or -1")

    def rhs(loc, t, y):
        k = 2 * _mean_curvature(loc) / loc.norm
        return np.stack([k * y[:, 0], k * y[:, 1] - 2 * lam * loc.value / loc.norm], axis=1)

    def finish(states):
        a, b = states[..., 0], states[..., 1]
        c = float(max(0.0, np.max(-b / a)) + 1.0) if C == "auto" else float(C)
        return c, lambda y, t: -0.5 * np.log(_positive_log_arg(c * y[..., 0] + y[..., 1]))

    target = lambda pts, fv, w: lam * np.exp(w) * fv  # noqa: E731
    return _build("cmc-rescaled", g, f, collar, rhs, [1.0, 0.0], finish, target, C, rtol)


def _target_cmc(g, f, collar, G, C, rtol):
    fac = prescribing_factor(g, f, lambda pts, fv: np.asarray(G(fv), float) * np.ones(len(pts)), collar, C, rtol)
    fac.kind = "cmc"
    return fac
