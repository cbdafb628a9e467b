"""Randomized property suites; each returns (cases, worst error) so the
property tests and the acceptance report share one implementation."""

import numpy as np

from cmcfol.conformal import transform_mean_curvature
from cmcfol.corpus import corpus_get
from cmcfol.foliation import generic_cmc_residual, mean_curvature
from cmcfol.geometry import Chart, ConformalMetric, FieldMetric, euclidean
from cmcfol.series import Series

def num(x):
    return f"({float(x)!r})"


REPARAM_ENTRIES = ["euclidean-spheres", "sphere-height", "sphere-height-stereographic", "poincare-ball",
                   "ellipse-noncmc", "warped-normal-form", "halfspace-hyperbolic"]


def _cubic(rng):
    # F' = 3a t^2 + 2b t + c > 0 everywhere iff c > 0 and b^2 < 3ac
    while True:
        a, b, c = rng.uniform(-1, 1, 3)
        if c > 0.05 and b * b < 3 * a * c - 0.01:
            return a, b, c


def reparametrization(cases=200, seed=0):
    """H_{F o f} = H_f for increasing F; the sign flips exactly for decreasing F."""
    rng = np.random.default_rng(seed)
    worst_inc = worst_dec = 0.0
    for i in range(cases):
        e = corpus_get(REPARAM_ENTRIES[i % len(REPARAM_ENTRIES)], 2 + i % 2)
        f = e.slicing_source
        p = e.sample(1, seed=int(rng.integers(1 << 30)))
        # shift so the cubic's argument stays O(1) on every entry
        t0 = float(e.slicing(p)[0])
        a, b, c = _cubic(rng)
        u = f"(({f}) - ({num(t0)}))"
        F = f"{num(a)}*{u}^3 + {num(b)}*{u}^2 + {num(c)}*{u}"
        base = float(mean_curvature(e.metric, f, p).H[0])
        inc = float(mean_curvature(e.metric, F, p).H[0])
        dec = float(mean_curvature(e.metric, f"-({F})", p).H[0])
        worst_inc = max(worst_inc, abs(inc - base) / (1 + abs(base)))
        worst_dec = max(worst_dec, abs(dec + inc))
    return cases, worst_inc, worst_dec


CONFORMAL_ENTRIES = ["sphere-height-stereographic", "poincare-ball", "ellipse-noncmc", "warped-normal-form",
                     "halfspace-hyperbolic", "euclidean-spheres"]


def conformal_law(cases=200, seed=1):
    """Direct mean curvature under exp(2w) g versus the transformation law."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(cases):
        dim = 2 + i % 2
        e = corpus_get(CONFORMAL_ENTRIES[i % len(CONFORMAL_ENTRIES)], dim)
        a = rng.uniform(-0.5, 0.5, size=dim)
        k = rng.uniform(0.5, 2.0, size=dim)
        b = rng.uniform(-0.3, 0.3)
        omega = " + ".join(f"{num(c)}*sin({num(kk)}*x{j + 1})" for j, (c, kk) in enumerate(zip(a, k)))
        omega += f" + {num(b)}*x1*x{dim}"
        p = e.sample(1, seed=int(rng.integers(1 << 30)))
        s = mean_curvature(e.metric, e.slicing, p)
        direct = mean_curvature(ConformalMetric(e.metric, omega), e.slicing, p).H
        law = transform_mean_curvature(s.H, omega, s.nu, e.metric, p)
        worst = max(worst, float(np.max(np.abs(direct - law))))
    return cases, worst


def _solution_family(rng):
    """A random generic CMC slicing (f, lambda) with a metric and an admissible point."""
    kind = int(rng.integers(3))
    if kind == 0:
        # flat space, f = 1/|x - c|, H = -f
        c = rng.uniform(-1, 1, 3)
        r2 = " + ".join(f"(x{j + 1} - ({num(c[j])}))^2" for j in range(3))
        d = rng.normal(size=3)
        p = c + d / np.linalg.norm(d) * rng.uniform(0.3, 2.5)
        return euclidean(3), f"1/sqrt({r2})", -1, p
    c = rng.uniform(0.5, 3.0)
    if kind == 1:
        # g_E/(c - z^2) with rho = z/sqrt(c - z^2): H = rho
        g = FieldMetric([[f"1/({num(c)} - x3^2)" if a == b else "0" for b in range(3)] for a in range(3)],
                        Chart(3, (-5, -5, 0), (5, 5, np.sqrt(c))))
        z = rng.uniform(0.05, 0.9) * np.sqrt(c)
        return g, f"x3/sqrt({num(c)} - x3^2)", 1, np.array([*rng.uniform(-2, 2, 2), z])
    # g_E/(z^2 + c) with rho = z/sqrt(z^2 + c): H = -rho
    g = FieldMetric([[f"1/(x3^2 + {num(c)})" if a == b else "0" for b in range(3)] for a in range(3)],
                    Chart(3, (-5, -5, 0), (5, 5, 5)))
    return g, f"x3/sqrt(x3^2 + {num(c)})", -1, np.array([*rng.uniform(-2, 2, 2), rng.uniform(0.05, 3.0)])


def lambda_sign(cases=200, seed=2):
    """On generic CMC slicings, f and -f solve the equation with the same lambda."""
    rng = np.random.default_rng(seed)
    worst_res = worst_diff = 0.0
    for _ in range(cases):
        g, f, lam, p = _solution_family(rng)
        plus = float(generic_cmc_residual(g, f, lam, p))
        minus = float(generic_cmc_residual(g, f"-({f})", lam, p))
        worst_res = max(worst_res, abs(plus), abs(minus))
        worst_diff = max(worst_diff, abs(plus - minus))
    return cases, worst_res, worst_diff


def ring_axioms(cases=200, seed=3):
    rng = np.random.default_rng(seed)
    worst_assoc = worst_dist = worst_explog = 0.0
    for _ in range(cases):
        order = int(rng.integers(3, 9))
        shape = (int(rng.integers(1, 5)),)
        a, b, c = (Series(rng.normal(size=(order + 1,) + shape)) for _ in range(3))
        worst_assoc = max(worst_assoc, np.max(np.abs(((a * b) * c).coeffs - (a * (b * c)).coeffs)))
        worst_dist = max(worst_dist, np.max(np.abs((a * (b + c)).coeffs - (a * b + a * c).coeffs)))
        pos = Series(np.concatenate([rng.uniform(0.5, 2.0, size=(1,) + shape),
                                     0.5 * rng.normal(size=(order,) + shape)]))
        worst_explog = max(worst_explog, np.max(np.abs(pos.log().exp().coeffs - pos.coeffs)))
    return cases, worst_assoc, worst_dist, worst_explog
