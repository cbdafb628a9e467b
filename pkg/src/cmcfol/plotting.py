"""Figures written next to the numeric output.

matplotlib is imported lazily (headless Agg backend) so the library and the
rest of the CLI work without it.
"""

from __future__ import annotations

import numpy as np

from .errors import PreconditionError

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "lines.linewidth": 1.4,
}


def _pyplot():
    try:
        import matplotlib
    except ImportError:  # pragma: no cover - depends on the environment
        raise PreconditionError("--plot needs matplotlib (pip install 'artifact[plot]')") from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    # fixed metadata keeps repeated renders byte-identical
    meta = {"Software": None} if str(path).lower().endswith(".png") else {}
    fig.savefig(path, bbox_inches="tight", metadata=meta)


def render(kind, data, path):
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        try:
            _DRAW[kind](ax, data)
            fig.tight_layout()
            _save(fig, path)
        finally:
            plt.close(fig)


def _curvature(ax, data):
    t = np.array([row["t"] for row in data["rows"]])
    H = np.array([row["H"] for row in data["rows"]], dtype=float)
    ax.plot(t, H, "o", ms=4, label="computed")
    ref = [row.get("H_closed_form") for row in data["rows"]]
    if all(v is not None for v in ref):
        order = np.argsort(t)
        ax.plot(t[order], np.asarray(ref, float)[order], "-", lw=1, label="closed form")
    ax.set_xlabel("leaf value t")
    ax.set_ylabel("H")
    ax.legend()


def _pointwise(key, label):
    def draw(ax, data):
        vals = [row[key] for row in data["rows"]]
        ax.plot(np.arange(len(vals)), vals, ".", ms=5)
        ax.set_xlabel("point index")
        ax.set_ylabel(label)
    return draw


def _cmc(ax, data):
    leaves = data["leaves"]
    t = [leaf["t"] for leaf in leaves]
    ax.errorbar(t, [leaf["H_mean"] for leaf in leaves], yerr=[leaf["spread"] / 2 for leaf in leaves],
                fmt="o", capsize=3, ms=4)
    ax.set_xlabel("leaf value t")
    ax.set_ylabel("mean H on leaf")
    ax.set_title("CMC" if data["is_cmc"] else "not CMC", fontsize=9)


def _factor(ax, data):
    t = np.asarray(data["t"])
    for i, row in enumerate(data["omega"]):
        ax.plot(t, row, lw=1, label=f"seed {i}" if i < 6 else None)
    ax.set_xlabel("leaf value t")
    ax.set_ylabel("omega")
    if len(data["omega"]) <= 6:
        ax.legend()


def _coefficients(ax, data):
    for key, marker in (("omega_total", "o"), ("r_bar", "s"), ("defect", "^")):
        c = np.asarray(data[key], dtype=float)
        c = c.reshape(len(c), -1)[:, 0]
        ax.plot(np.arange(len(c)), c, marker + "-", ms=4, lw=0.8, label=key)
    ax.axhline(0, color="0.5", lw=0.6)
    ax.set_xlabel("power of r")
    ax.set_ylabel("coefficient (first grid node)")
    ax.legend()


def _relate(ax, data):
    rho = [row["rho"] for row in data["rows"]]
    ax.semilogx(rho, [row["relation"] for row in data["rows"]], "o-", ms=4, label="rho H - |d rho|")
    if "scalar_curvature_bound" in data:
        ax.axhline(data["scalar_curvature_bound"], color="C1", lw=1, ls="--", label="from scalar curvature")
    ax.set_xlabel("rho")
    ax.legend()


_DRAW = {
    "eval-h": _curvature,
    "residual": _pointwise("residual", "residual"),
    "linearize": _pointwise("dH", "dH[u]"),
    "detect-cmc": _cmc,
    "factor": _factor,
    "ah-expand": _coefficients,
    "relate": _relate,
}
