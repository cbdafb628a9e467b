import numpy as np
import pytest

from cmcfol.conformal import (
    Collar, cmc_factor, integrate_flow_line, minimalizing_factor, prescribing_factor, transform_mean_curvature,
)
from cmcfol.corpus import corpus_get
from cmcfol.errors import CmcfolError, DegenerateSliceError, PreconditionError
from cmcfol.foliation import mean_curvature, unit_normal
from cmcfol.geometry import Chart, ConformalMetric, FieldMetric, euclidean

E3 = euclidean(3)


def test_transform_examples():
    p = np.array([0.3, -0.2, 0.7])
    assert transform_mean_curvature(0.0, "-log(z)", [0, 0, 1], E3, p) == pytest.approx(-1.0, abs=1e-14)
    for r in (0.2, 0.5, 0.8):
        q = np.array([0.0, 0.6, 0.8]) * r
        # inward conormal (f = 1 - r^2): H_E = -1/r
        H = transform_mean_curvature(-1 / r, "log(2/(1 - x^2 - y^2 - z^2))", -q / r, E3, q)
        assert H == pytest.approx(-(r * r + 1) / (2 * r), rel=1e-12)
        out = transform_mean_curvature(1 / r, "log(2/(1 - x^2 - y^2 - z^2))", q / r, E3, q)
        assert out == pytest.approx(-H, rel=1e-12)
    assert transform_mean_curvature(0.37, "0", [1, 0, 0], E3, p) == 0.37


def test_transform_requires_unit_normal():
    with pytest.raises(PreconditionError, match="not unit"):
        transform_mean_curvature(0.0, "x", [0, 0, 1.001], E3, [0, 0, 1])


@pytest.mark.parametrize("name", ["sphere-height-stereographic", "poincare-ball", "ellipse-noncmc",
                                  "warped-normal-form", "halfspace-hyperbolic"])
@pytest.mark.parametrize("dim", [2, 3])
def test_transformation_law_consistency(name, dim, rng):
    e = corpus_get(name, dim)
    p = e.sample(25, seed=11)
    for _ in range(4):
        a = rng.uniform(-0.5, 0.5, size=dim)
        b = rng.uniform(-0.3, 0.3)
        omega = " + ".join(f"{c}*sin(x{i + 1})" for i, c in enumerate(a)) + f" + {b}*x1*x{dim}"
        s = mean_curvature(e.metric, e.slicing, p)
        direct = mean_curvature(ConformalMetric(e.metric, omega), e.slicing, p).H
        via_law = transform_mean_curvature(s.H, omega, s.nu, e.metric, p)
        assert np.max(np.abs(direct - via_law)) < 1e-6


def test_flow_line_planes():
    line = integrate_flow_line(E3, "z", [0, 0, 0], np.linspace(-1, 1, 9))
    assert np.allclose(line.points, np.c_[np.zeros((9, 2)), line.t], atol=1e-12)
    assert np.allclose(line.t, np.linspace(-1, 1, 9))


def test_flow_line_radial():
    line = integrate_flow_line(E3, "x^2+y^2+z^2", [1, 0, 0], np.linspace(0.25, 4, 16))
    assert np.allclose(line.points[:, 0], np.sqrt(line.t), atol=1e-9)
    assert np.allclose(line.points[:, 1:], 0, atol=1e-12)
    assert np.all(np.diff(line.t) > 0)


def test_flow_line_integrand_and_parameter():
    e = corpus_get("poincare-ball", 3)
    line = integrate_flow_line(e.metric, e.slicing, [0.5, 0.1, -0.2], np.linspace(0.2, 0.95, 12),
                               integrand=lambda pts, t, H, N: np.ones(len(pts)))
    assert np.max(np.abs(e.slicing(line.points) - line.t)) < 1e-8
    t0 = float(e.slicing([0.5, 0.1, -0.2]))
    assert np.allclose(line.integral[:, 0], line.t - t0, atol=1e-10)


def test_flow_line_degenerate_seed():
    with pytest.raises(DegenerateSliceError):
        integrate_flow_line(E3, "x^2+y^2+z^2", [0, 0, 0], [1.0])


def test_flow_line_leaving_domain():
    g = FieldMetric([["1", "0"], ["", "1"]], Chart(2, (-1, -1), (1, 1)))
    with pytest.raises(CmcfolError):
        integrate_flow_line(g, "y", [0, 0], [0.5, 3.0])


def _stereo_collar(dim, grid):
    seeds = [[1.0, 0.0], [0.0, 1.0], [-0.6, 0.8]] if dim == 2 else [[1, 0, 0], [0, 0.6, 0.8], [-0.48, 0.6, 0.64]]
    return Collar.make(0.0, grid, seeds)


def test_minimalizing_round_sphere():
    e = corpus_get("sphere-height-stereographic", 3)
    fac = minimalizing_factor(e.metric, e.slicing, _stereo_collar(3, np.linspace(-0.8, 0.8, 17)))
    t = fac.t
    # along t-parametrized flow lines, omega' = -H/|dt| = t/(1-t^2)
    assert np.max(np.abs(fac.table + 0.5 * np.log(1 - t * t))) < 1e-8
    assert np.max(np.abs(fac.recompute_H())) < 1e-5


def test_minimalizing_planes_is_zero():
    fac = minimalizing_factor(E3, "z", Collar.make(0.0, np.linspace(-1, 1, 5), [[0, 0, 0], [1, 1, 0]]))
    assert np.all(fac.table == 0)


def test_minimalizing_spheres_cylinder():
    e = corpus_get("euclidean-spheres", 3)
    collar = Collar.make(1.0, np.linspace(0.25, 4, 11), [[1, 0, 0], [0, 0.6, 0.8]])
    fac = minimalizing_factor(e.metric, e.slicing, collar)
    assert np.max(np.abs(fac.table + 0.25 * np.log(fac.t) * 2)) < 1e-8  # -log r with t = r^2
    assert np.max(np.abs(fac.recompute_H())) < 1e-6
    # g_hat = g_E/r^2 directly
    cyl = FieldMetric([["1/(x^2+y^2+z^2)", "0", "0"], ["", "1/(x^2+y^2+z^2)", "0"], ["", "", "1/(x^2+y^2+z^2)"]],
                      e.chart)
    assert np.max(np.abs(mean_curvature(cyl, e.slicing, fac.points.reshape(-1, 3)).H)) < 1e-12


def test_gauge_anchoring():
    e = corpus_get("poincare-ball", 3)
    collar = Collar.make(0.5, np.linspace(0.2, 0.9, 8), [[0.7, 0, 0], [0, 0.5, 0.5], [0.1, -0.7, 0.0]])
    fac = minimalizing_factor(e.metric, e.slicing, collar)
    j = int(np.flatnonzero(fac.t == 0.5)[0])
    assert np.max(np.abs(fac.table[:, j])) <= 1e-10
    assert np.max(np.abs(e.slicing(fac.points.reshape(-1, 3)) - np.tile(fac.t, 3))) < 1e-8


def test_omega_at_matches_table():
    e = corpus_get("poincare-ball", 3)
    collar = Collar.make(0.5, np.linspace(0.2, 0.9, 8), [[0.7, 0, 0], [0, 0.5, 0.5]])
    fac = minimalizing_factor(e.metric, e.slicing, collar)
    assert np.allclose(fac.omega_at(fac.points.reshape(-1, 3)), fac.table.reshape(-1), atol=1e-8)


def test_prescribing_constant_target():
    e = corpus_get("euclidean-spheres", 3)
    collar = Collar.make(1.0, np.linspace(0.5, 2.0, 7), [[1, 0, 0], [0, 0, 1]])
    fac = prescribing_factor(e.metric, e.slicing, 0.3, collar)
    assert fac.C > 0
    assert np.all(np.isfinite(fac.table))
    assert np.max(np.abs(fac.recompute_H() - 0.3)) < 1e-5


def test_prescribing_field_target():
    e = corpus_get("poincare-ball", 2)
    collar = Collar.make(0.5, np.linspace(0.25, 0.85, 7), [[0.7, 0.0], [0.0, -0.7071067811865476]])
    h = "0.5*x1 + x2^2"
    fac = prescribing_factor(e.metric, e.slicing, h, collar)
    assert np.max(np.abs(fac.recompute_H() - fac.target())) < 1e-5


def test_prescribing_zero_is_minimalizing():
    e = corpus_get("poincare-ball", 3)
    collar = Collar.make(0.5, np.linspace(0.2, 0.9, 8), [[0.7, 0, 0], [0, 0.5, 0.5]])
    a = minimalizing_factor(e.metric, e.slicing, collar)
    b = prescribing_factor(e.metric, e.slicing, 0, collar)
    assert b.C == 1.0
    assert np.allclose(a.table, b.table, atol=1e-14)


def test_prescribing_reference_leaf_offset():
    e = corpus_get("euclidean-spheres", 3)
    collar = Collar.make(1.0, np.linspace(0.5, 2.0, 4), [[1, 0, 0]])
    fac = prescribing_factor(e.metric, e.slicing, 0.5, collar, C=3.0)
    j = int(np.flatnonzero(fac.t == 1.0)[0])
    assert fac.table[0, j] == pytest.approx(-np.log(3.0), abs=1e-12)


def test_prescribing_C_too_small():
    e = corpus_get("euclidean-spheres", 3)
    collar = Collar.make(1.0, np.linspace(0.5, 4.0, 6), [[1, 0, 0]])
    with pytest.raises(PreconditionError, match="C too small"):
        prescribing_factor(e.metric, e.slicing, 2.0, collar, C=0.5)


def _planes(dim=3):
    e = corpus_get("halfspace-planes-euclidean", dim)
    seeds = [[0.0, 0.0, 0.1], [0.5, -0.3, 0.1]] if dim == 3 else [[0.0, 0.1], [0.5, 0.1]]
    return e, Collar.make(0.1, np.linspace(0.05, 0.7, 14), seeds)


def test_cmc_rescaled_lambda_plus():
    e, collar = _planes()
    fac = cmc_factor(e.metric, e.slicing, collar, lam=1, rescale_slice=True)
    c = fac.C + 0.1**2
    z = fac.t
    assert np.max(np.abs(fac.table + 0.5 * np.log(c - z * z))) < 1e-9
    rho = np.exp(fac.table) * z
    assert np.allclose(rho, z / np.sqrt(c - z * z), atol=1e-9)
    assert np.max(np.abs(fac.recompute_H() - rho)) < 1e-5


def test_cmc_rescaled_lambda_minus():
    e, collar = _planes()
    fac = cmc_factor(e.metric, e.slicing, collar, lam=-1, rescale_slice=True)
    c = fac.C - 0.1**2
    z = fac.t
    assert np.max(np.abs(fac.table + 0.5 * np.log(z * z + c))) < 1e-9
    rho = np.exp(fac.table) * z
    assert np.max(np.abs(fac.recompute_H() + rho)) < 1e-5


def test_cmc_target_G():
    e = corpus_get("poincare-ball", 3)
    collar = Collar.make(0.5, np.linspace(0.3, 0.8, 6), [[0.7, 0, 0], [0, 0.5, 0.5]])
    fac = cmc_factor(e.metric, e.slicing, collar, G=lambda t: 1 + t)
    assert np.max(np.abs(fac.recompute_H() - (1 + fac.t)[None, :])) < 1e-5
    lam = cmc_factor(e.metric, e.slicing, collar, lam=-1)
    assert np.max(np.abs(lam.recompute_H() + fac.t[None, :])) < 1e-5


def test_cmc_G_zero_is_minimalizing():
    e = corpus_get("poincare-ball", 3)
    collar = Collar.make(0.5, np.linspace(0.3, 0.8, 6), [[0.7, 0, 0]])
    a = minimalizing_factor(e.metric, e.slicing, collar)
    b = cmc_factor(e.metric, e.slicing, collar, G=lambda t: 0 * t)
    assert np.allclose(a.table, b.table, atol=1e-14)


def test_cmc_argument_checks():
    e, collar = _planes()
    with pytest.raises(PreconditionError):
        cmc_factor(e.metric, e.slicing, collar)
    with pytest.raises(PreconditionError):
        cmc_factor(e.metric, e.slicing, collar, lam=2, rescale_slice=True)


def test_factor_csv():
    e, collar = _planes(2)
    fac = minimalizing_factor(e.metric, e.slicing, collar)
    lines = fac.to_csv().splitlines()
    assert lines[0] == "seed_index,t,omega"
    assert len(lines) == 1 + fac.table.size
    assert lines[1].startswith("0,0.05")


def test_seed_projection_and_errors():
    e = corpus_get("poincare-ball", 3)
    # seeds off the leaf are projected onto it
    fac = minimalizing_factor(e.metric, e.slicing, Collar.make(0.5, [0.4, 0.6], [[0.6, 0.1, 0.0]]))
    assert float(e.slicing(fac.points[0, list(fac.t).index(0.5)])) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(PreconditionError):
        minimalizing_factor(e.metric, e.slicing, Collar.make(0.5, [0.4], [[0.6, 0.1]]))
