"""Formal boundary expansions for asymptotically hyperbolic metrics.

The compactified metric is in normal form ``g = h_r + dr^2`` in coordinates
``(x_1..x_{n-1}, r)``, with ``h_r`` a polynomial in r of boundary metrics.
For ``omega`` a series, ``r_bar = exp(omega) r`` and ``g_bar = exp(2 omega) g``
the mean curvature of the r_bar slicing is

    (n-1) H = exp(-omega) |V|^-3 (P0 + r P1 + r^2 P2 + r^3 P3),

with ``V = dr + r d omega`` and ``|V|^2 = A + 2 r B + r^2 C``, where
``A = |dr|^2``, ``B = <dr, d omega>``, ``C = |d omega|^2`` and

    P0 = A Lap r + (n-1) A B - Hess r(R, R)
    P1 = A Lap w + (n-2) A C + 2 B Lap r + (2n-1) B^2 - 2 Hess r(R, W) - Hess w(R, R)
    P2 = 2 B Lap w + C Lap r + 3(n-1) B C - Hess r(W, W) - 2 Hess w(R, W)
    P3 = C Lap w + (n-1) C^2 - Hess w(W, W)

(``R = grad r``, ``W = grad omega``, all with respect to g).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotAsymptoticallyHyperbolicError, SeriesError
from .expr import Expression, parse
from .series import BoundaryChart, Series, cauchy, matrix_inverse

AH_TOL = 1e-10


def _evaluate_on_chart(value, chart: BoundaryChart):
    """A number, grid array or boundary expression as a grid array."""
    if isinstance(value, str):
        value = parse(value, chart.dim)
    if isinstance(value, Expression):
        nodes = chart.nodes()
        return np.asarray(value(nodes.reshape(-1, chart.dim)), float).reshape(chart.shape)
    return np.broadcast_to(np.asarray(value, float), chart.shape).copy()


class NormalFormMetric:
    """``g = h_r + g_rr dr^2`` with ``h_r = sum_j h[j] r^j``.

    ``h`` is a list (one entry per power of r) of ``(n-1) x (n-1)`` matrices
    of numbers or boundary expressions. ``g_rr`` (a list of powers, default
    ``[1]``) exists so that inputs that are not in normal form can be
    represented and rejected.
    """

    def __init__(self, chart: BoundaryChart, h, g_rr=None):
        self.chart = chart
        d = chart.dim
        self.n = d + 1
        self.h = []
        for j, mat in enumerate(h):
            if len(mat) != d or any(len(row) != d for row in mat):
                raise SeriesError(f"h[{j}] must be {d}x{d}")
            arr = np.empty(chart.shape + (d, d))
            for a in range(d):
                for b in range(a, d):
                    arr[..., a, b] = arr[..., b, a] = _evaluate_on_chart(mat[a][b], chart)
            self.h.append(arr)
        self.g_rr = [_evaluate_on_chart(v, chart) for v in (g_rr if g_rr is not None else [1.0])]
        try:
            np.linalg.cholesky(self.h[0])
        except np.linalg.LinAlgError:
            raise SeriesError("boundary metric h_0 is not positive-definite") from None

    def metric_series(self, order):
        """Full n x n metric coefficients, shape ``(order+1, *grid, n, n)``."""
        n, d = self.n, self.chart.dim
        G = np.zeros((order + 1,) + self.chart.shape + (n, n))
        for j, hj in enumerate(self.h[: order + 1]):
            G[j, ..., :d, :d] = hj
        for j, v in enumerate(self.g_rr[: order + 1]):
            G[j, ..., d, d] = v
        return G


@dataclass
class _Geometry:
    """Metric data as series, truncated to order N."""

    Ginv: np.ndarray      # (N+1, *grid, n, n)
    gamma: np.ndarray     # (N+1, *grid, n, n, n)  Gamma^c_ab
    n: int


def _grad_series(chart: BoundaryChart, arr, r_deriv):
    """Stack of partial derivatives along each coordinate; ``r_deriv`` supplies the last."""
    parts = [np.stack([chart.derivative(c, k) for c in arr]) for k in range(chart.dim)]
    parts.append(r_deriv)
    return np.stack(parts, axis=-1)


def _geometry(g: NormalFormMetric, N) -> _Geometry:
    chart = g.chart
    G = g.metric_series(N + 1)
    Ginv = matrix_inverse(G[: N + 1])
    dr = G[1:] * np.arange(1, N + 2).reshape((-1,) + (1,) * (G.ndim - 1))
    # dG[..., a, b, c] = d_c G_ab
    dG = _grad_series(chart, G[: N + 1], dr)
    # Gamma_{d,ab} = 1/2 (d_a G_db + d_b G_da - d_d G_ab)
    first = np.einsum("...dba->...dab", dG)
    second = np.einsum("...dab->...dab", dG)
    third = np.einsum("...abd->...dab", dG)
    lowered = 0.5 * (first + second - third)
    del first, second, third
    gamma = cauchy(Ginv, lowered, lambda x, y: np.einsum("...cd,...dab->...cab", x, y))
    return _Geometry(Ginv, gamma, g.n)


def _omega_derivatives(chart, omega: Series, N):
    """``(d omega, dd omega)`` as series of order N (omega needs order N+1)."""
    w = omega.coeffs
    wr = omega.d_r().coeffs                       # order N
    wrr = omega.d_r().d_r().coeffs if omega.order >= 2 else np.zeros_like(wr)
    base = w[: N + 1]
    dw = _grad_series(chart, base, wr[: N + 1])   # (N+1, *grid, n)
    n = chart.dim + 1
    ddw = np.zeros(dw.shape + (n,))
    for a in range(chart.dim):
        for b in range(chart.dim):
            ddw[..., a, b] = np.stack([chart.derivative(chart.derivative(c, a), b) for c in base])
        mixed = np.stack([chart.derivative(c, a) for c in wr[: N + 1]])
        ddw[..., a, n - 1] = ddw[..., n - 1, a] = mixed
    rr = np.zeros_like(wr[: N + 1])
    rr[: min(N + 1, len(wrr))] = wrr[: N + 1]
    ddw[..., n - 1, n - 1] = rr
    return dw, ddw


def _pieces(g: NormalFormMetric, omega: Series, N):
    """Series building blocks A, B, C and the P groups, all of order N."""
    if omega.order < N + 1:
        raise SeriesError(f"omega needs order >= N+1 = {N + 1} (got {omega.order})")
    chart = g.chart
    n = g.n
    geo = _geometry(g, N)
    Ginv, gamma = geo.Ginv, geo.gamma
    dw, ddw = _omega_derivatives(chart, omega, N)

    vec = lambda M, v: cauchy(M, v, lambda x, y: np.einsum("...ab,...b->...a", x, y))  # noqa: E731
    dot = lambda u, v: cauchy(u, v, lambda x, y: np.einsum("...a,...a->...", x, y))  # noqa: E731
    quad = lambda u, M, v: cauchy(u, cauchy(M, v, lambda x, y: np.einsum("...ab,...b->...a", x, y)),  # noqa: E731
                                  lambda x, y: np.einsum("...a,...a->...", x, y))
    trace = lambda M, X: cauchy(M, X, lambda x, y: np.einsum("...ab,...ab->...", x, y))  # noqa: E731

    R = Ginv[..., n - 1]                                   # grad r
    W = vec(Ginv, dw)                                      # grad omega
    hess_r = -gamma[..., n - 1, :, :]
    hess_w = ddw - cauchy(gamma, dw, lambda x, y: np.einsum("...cab,...c->...ab", x, y))
    lap_r = trace(Ginv, hess_r)
    lap_w = trace(Ginv, hess_w)
    A = Series(R[..., n - 1])
    B = Series(dot(R, dw))
    C = Series(dot(W, dw))
    Lr, Lw = Series(lap_r), Series(lap_w)
    S = lambda arr: Series(arr)  # noqa: E731
    P0 = A * Lr + (n - 1) * (A * B) - S(quad(R, hess_r, R))
    P1 = (A * Lw + (n - 2) * (A * C) + 2 * (B * Lr) + (2 * n - 1) * (B * B)
          - 2 * S(quad(R, hess_r, W)) - S(quad(R, hess_w, R)))
    P2 = (2 * (B * Lw) + C * Lr + 3 * (n - 1) * (B * C)
          - S(quad(W, hess_r, W)) - 2 * S(quad(R, hess_w, W)))
    P3 = C * Lw + (n - 1) * (C * C) - S(quad(W, hess_w, W))
    return A, B, C, (P0, P1, P2, P3)


def _zero(order, chart):
    return Series.constant(0.0, order, chart.shape)


def mean_curvature_series(g: NormalFormMetric, omega: Series = None, N=6) -> Series:
    """Series of ``H`` for the slicing ``exp(omega) r`` under ``exp(2 omega) g``, order N.

    ``omega`` must have order at least N+1, because its r-derivative enters.
    """
    omega = _zero(N + 1, g.chart) if omega is None else omega
    A, B, C, P = _pieces(g, omega, N)
    r = Series.variable(N, g.chart.shape)
    VV = A + 2 * (r * B) + (r * r) * C
    rhs = P[0] + P[1].mul_r(1) + P[2].mul_r(2) + P[3].mul_r(3)
    w = omega.truncate(N)
    return rhs * (-w).exp() * VV.power(-1.5) / (g.n - 1)


def ah_defect(g: NormalFormMetric, omega: Series = None, N=6) -> Series:
    """``|d r_bar|^2`` under ``g_bar`` minus one, as a series of order N."""
    omega = _zero(N + 1, g.chart) if omega is None else omega
    A, B, C, _ = _pieces(g, omega, N)
    r = Series.variable(N, g.chart.shape)
    return A + 2 * (r * B) + (r * r) * C - 1.0


@dataclass
class ExpansionState:
    k: int
    omega_total: Series
    r_k: Series
    H_k: Series
    F_k: np.ndarray
    history: list = field(default_factory=list, repr=False)

    @property
    def r_bar(self):
        return self.r_k


def _check_ah(g: NormalFormMetric, N):
    A0 = ah_defect(g, None, N)[0] + 1.0
    if not np.all(np.abs(A0 - 1) <= AH_TOL):
        raise NotAsymptoticallyHyperbolicError(
            f"not asymptotically hyperbolic: |dr|^2 at r=0 is {np.ravel(A0)[0]:.12g}, not 1")


def _expand(g: NormalFormMetric, ell, N, mode):
    if ell < 1:
        raise SeriesError("expansion order ell must be >= 1")
    N = ell + 2 if N is None else N
    if N < ell:
        raise SeriesError(f"series order N={N} is below ell={ell}")
    _check_ah(g, N)
    shape = g.chart.shape
    W = N + 1
    omega = _zero(W, g.chart)
    r = Series.variable(W, shape)
    history = []
    for k in range(ell + 1):
        H = mean_curvature_series(g, omega, N)
        r_k = r * omega.exp()
        defect = H - r_k.truncate(N) if mode == "cmc" else H
        F = defect[k].copy() if k <= N else np.zeros(shape)
        state = ExpansionState(k, omega, r_k, H, F)
        history.append(state)
        if k == ell:
            break
        step = -(r_k.power(k + 1) * F) / (k + 1)
        omega = omega + step
    final = history[-1]
    final.history = history
    return final


def expand_minimal(g: NormalFormMetric, ell, N=None) -> ExpansionState:
    """Defining function ``r_bar = exp(omega) r`` with ``H = O(r_bar^ell)``.

    The returned state is the one after ``ell`` steps; ``history[k]`` holds
    the state before step k.
    """
    return _expand(g, ell, N, "minimal")


def expand_cmc(g: NormalFormMetric, ell, N=None) -> ExpansionState:
    """As :func:`expand_minimal`, with ``H = r_bar + O(r_bar^ell)``."""
    return _expand(g, ell, N, "cmc")


def interior_mean_curvature_relation(H_g, drho_norm, rho):
    """Mean curvature of the rho-leaf for ``g/rho^2``: ``rho H_g - |d rho|_g``."""
    if np.any(np.asarray(rho) < 0):
        raise SeriesError("rho must be nonnegative")
    return np.asarray(rho) * np.asarray(H_g) - np.asarray(drho_norm)
