import io
import json
import subprocess
import sys

import numpy as np
import pytest

from cmcfol.cli import run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_eval_h_example():
    code, out, _ = call("eval-h", "--manifold", "builtin:euclidean-spheres", "--points", "1,0;0,2")
    assert code == 0
    data = json.loads(out)
    assert [row["H"] for row in data["rows"]] == [1.0, 0.5]


def test_ah_expand_example():
    code, out, _ = call("ah-expand", "--mode", "cmc", "--metric", "builtin:hyperbolic-normal-form", "--order", "6")
    assert code == 0
    assert np.allclose(json.loads(out)["r_bar"], [0, 1, 0, 0.5, 0, 0.375, 0], atol=1e-10)


def test_missing_file_is_usage_error():
    code, out, err = call("eval-h", "--manifold", "nonexistent.json")
    assert code == 2 and out == ""
    rec = json.loads(err)
    assert "file not found" in rec["error"] and len(err.strip().splitlines()) == 1


def test_usage_errors():
    assert call()[0] == 2
    assert call("no-such-command")[0] == 2
    assert call("eval-h", "--manifold", "builtin:euclidean-spheres", "--points", "1,a")[0] == 2
    assert call("eval-h", "--manifold", "builtin:euclidean-spheres", "--format", "xml")[0] == 2
    assert call("minimalize", "--manifold", "builtin:euclidean-spheres")[0] == 2


def test_library_errors_exit_one():
    code, _, err = call("eval-h", "--manifold", "builtin:euclidean-spheres", "--points", "0,0")
    assert code == 1 and json.loads(err)["type"] == "DegenerateSliceError"
    code, _, err = call("eval-h", "--manifold", "builtin:nope")
    assert code == 1 and "available" in json.loads(err)["error"]
    code, _, err = call("ah-expand", "--metric", "builtin:euclidean-spheres", "--order", "2")
    assert code == 1


def test_float_format_17_digits():
    _, out, _ = call("eval-h", "--manifold", "builtin:euclidean-spheres", "--points", "0.3,0.4,0.5")
    H = json.loads(out)["rows"][0]["H"]
    assert f'"H": {format(H, ".17g")}' in out


@pytest.mark.parametrize("argv", [
    ["eval-h", "--manifold", "builtin:poincare-ball", "--sample", "5"],
    ["residual", "--manifold", "builtin:euclidean-inverse-radius", "--lam", "-1", "--sample", "5"],
    ["detect-cmc", "--manifold", "builtin:sphere-height"],
    ["linearize", "--manifold", "builtin:ellipse-noncmc", "--u", "x1*x2", "--sample", "4"],
    ["minimalize", "--manifold", "builtin:poincare-ball", "--t0", "0.5", "--t-grid", "0.3:0.8:6", "--no-verify"],
    ["ah-expand", "--metric", "builtin:warped-normal-form", "--mode", "minimal", "--order", "3"],
    ["relate", "--manifold", "builtin:halfspace-hyperbolic"],
    ["corpus", "sphere-height"],
])
@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_byte_identical_output(argv, fmt):
    a = call(*argv, "--format", fmt)
    b = call(*argv, "--format", fmt)
    assert a[0] == 0 and a == b


def test_csv_headers():
    _, out, _ = call("eval-h", "--manifold", "builtin:euclidean-spheres", "--points", "1,0", "--format", "csv")
    assert out.splitlines()[0] == "index,x1,x2,t,H,df_norm,H_closed_form"
    _, out, _ = call("minimalize", "--manifold", "builtin:euclidean-spheres", "--dim", "2", "--t0", "1",
                     "--t-grid", "0.5:2:4", "--format", "csv", "--no-verify")
    assert out.splitlines()[0] == "seed_index,t,omega"


def test_output_file_and_plots(tmp_path):
    cases = [
        ("eval-h", "--manifold", "builtin:sphere-height", "--sample", "10"),
        ("residual", "--manifold", "builtin:euclidean-inverse-radius", "--lam", "-1", "--sample", "5"),
        ("linearize", "--manifold", "builtin:ellipse-noncmc", "--u", "x1", "--sample", "5"),
        ("detect-cmc", "--manifold", "builtin:poincare-ball"),
        ("cmc-factor", "--manifold", "builtin:halfspace-planes-euclidean", "--lam", "1", "--rescale-slice",
         "--t0", "0.1", "--t-grid", "0.05:0.7:8", "--no-verify"),
        ("ah-expand", "--metric", "builtin:hyperbolic-normal-form", "--order", "4"),
        ("relate", "--manifold", "builtin:halfspace-hyperbolic"),
    ]
    for i, argv in enumerate(cases):
        out = tmp_path / f"case{i}.json"
        code, stdout, err = call(*argv, "--output", str(out), "--plot")
        assert code == 0, err
        assert stdout == "" and out.exists()
        png = tmp_path / f"case{i}.png"
        assert png.exists() and png.read_bytes()[:4] == b"\x89PNG"
    explicit = tmp_path / "fig.svg"
    assert call("eval-h", "--manifold", "builtin:euclidean-spheres", "--points", "1,0", "--plot", str(explicit))[0] == 0
    assert explicit.exists()


def test_plot_files_are_reproducible(tmp_path):
    argv = ["detect-cmc", "--manifold", "builtin:sphere-height", "--output"]
    call(*argv, str(tmp_path / "a.json"), "--plot")
    call(*argv, str(tmp_path / "b.json"), "--plot")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_plot_errors():
    assert call("corpus", "--plot", "x.png")[0] == 2
    assert call("eval-h", "--manifold", "builtin:euclidean-spheres", "--points", "1,0", "--plot")[0] == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"manifold": "builtin:euclidean-spheres", "points": "2,0,0", "format": "csv"}))
    code, out, _ = call("eval-h", "--config", str(cfg))
    assert code == 0 and out.splitlines()[1].split(",")[5] == "0.5"
    # command-line flags win over the config
    code, out, _ = call("eval-h", "--config", str(cfg), "--format", "json")
    assert json.loads(out)["rows"][0]["H"] == 0.5
    assert call("eval-h", "--config", str(tmp_path / "missing.json"))[0] == 2


def test_custom_manifold_file(tmp_path):
    desc = {"dimension": 2, "domain": {"lower": [-3, 0], "upper": [3, 3]},
            "metric": [["1/x2^2", "0"], ["0", "1/x2^2"]], "slicing": "x2",
            "rays": [{"origin": [0, 0.01], "direction": [0, 1], "length": 2.5},
                     {"origin": [1, 0.01], "direction": [0, 1], "length": 2.5}]}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(desc))
    code, out, _ = call("eval-h", "--manifold", str(path), "--points", "0.3,0.7")
    assert code == 0 and json.loads(out)["rows"][0]["H"] == pytest.approx(-1)
    code, out, _ = call("detect-cmc", "--manifold", str(path), "--leaves", "0.5,1.0")
    assert code == 0 and json.loads(out)["is_cmc"]
    bad = dict(desc, metric=[["-1", "0"], ["0", "1"]])
    path.write_text(json.dumps(bad))
    code, _, err = call("eval-h", "--manifold", str(path), "--points", "0.3,0.7")
    assert code == 1 and json.loads(err)["type"] == "NotPositiveDefiniteError"


def test_normal_form_file(tmp_path):
    desc = {"boundary": {"dim": 2, "axes": [None, None]}, "h": [[[1, 0], [0, 1]], [[1, 0], [0, 1]]]}
    path = tmp_path / "nf.json"
    path.write_text(json.dumps(desc))
    a = call("ah-expand", "--metric", str(path), "--mode", "minimal", "--order", "3")
    b = call("ah-expand", "--metric", "builtin:warped-normal-form", "--mode", "minimal", "--order", "3")
    assert a[0] == 0 and a[1] == b[1]


def test_relate_pure_formula():
    code, out, _ = call("relate", "--H", "0", "--drho", "1", "--rho", "0")
    assert json.loads(out)["relation"] == -1.0


def test_cmc_factor_G_and_prescribe():
    code, out, err = call("cmc-factor", "--manifold", "builtin:poincare-ball", "--dim", "2", "--G", "1 + t",
                          "--t0", "0.5", "--t-grid", "0.3:0.8:4")
    assert code == 0, err
    assert json.loads(out)["max_abs_H_minus_target"] < 1e-5
    code, out, err = call("prescribe", "--manifold", "builtin:poincare-ball", "--dim", "2", "--target", "x1",
                          "--t0", "0.5", "--t-grid", "0.3:0.8:4")
    assert code == 0, err
    assert json.loads(out)["max_abs_H_minus_target"] < 1e-5
    code, _, err = call("prescribe", "--manifold", "builtin:euclidean-spheres", "--target", "2",
                        "--t0", "1", "--t-grid", "0.5:4:5", "--C", "0.5", "--no-verify")
    assert code == 1 and "C too small" in json.loads(err)["error"]


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cmcfol", "corpus"], capture_output=True, text=True)
    assert proc.returncode == 0 and "poincare-ball" in proc.stdout


def test_conformal_law_option_and_slicing_override():
    code, out, _ = call("eval-h", "--manifold", "builtin:euclidean-spheres", "--slicing", "1 - x1^2 - x2^2 - x3^2",
                        "--omega", "log(2/(1 - x1^2 - x2^2 - x3^2))", "--points", "0.5,0,0;0,0.2,0")
    assert code == 0
    data = json.loads(out)
    # hyperbolic ball: H = -(1 + r^2)/(2r) on the sphere of radius r
    assert np.allclose([row["H_conformal_law"] for row in data["rows"]], [-1.25, -2.6], atol=1e-12)
    assert data["max_abs_law_minus_direct"] < 1e-12
    assert "H_closed_form" not in data["rows"][0]


def test_weighted_residual_option():
    code, out, _ = call("residual", "--manifold", "builtin:sphere-height", "--lhs=-t", "--weight", "sqrt(1-t^2)",
                        "--sample", "30")
    assert code == 0 and json.loads(out)["max_abs_residual"] < 1e-12


def test_grid_and_fd_step():
    code, out, _ = call("linearize", "--manifold", "builtin:euclidean-spheres", "--dim", "2", "--u", "atan(x2/x1)",
                        "--grid", "0.75:2.75:5,-2:2:4", "--fd-step", "1e-4")
    data = json.loads(out)
    assert code == 0 and len(data["rows"]) == 20
    assert data["max_abs_dH"] < 1e-12 and 0 < data["max_abs_fd_gap"] < 5e-4
    assert call("eval-h", "--manifold", "builtin:euclidean-spheres", "--grid", "1:2")[0] == 2


def test_expect_option():
    code, out, _ = call("minimalize", "--manifold", "builtin:sphere-height-stereographic", "--t0", "0",
                        "--t-grid=-0.5:0.5:5", "--expect=-log(1-t^2)/2")
    assert code == 0 and json.loads(out)["max_abs_omega_minus_expected"] < 1e-8


def test_output_creates_parent_directories(tmp_path):
    target = tmp_path / "a" / "b" / "h.csv"
    code, _, _ = call("eval-h", "--manifold", "builtin:euclidean-spheres", "--points", "1,0", "--format", "csv",
                      "--output", str(target), "--plot")
    assert code == 0 and target.exists() and target.with_suffix(".png").exists()
