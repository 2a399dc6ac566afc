"""PNG figures for runs and sweeps (file output only, Agg backend)."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (3.4, 2.4),
}
SCHEME_STYLE = {"DLM": dict(color="#08589e", linestyle="-"), "FEIBM": dict(color="#c0392b", linestyle="--")}
# Fixed metadata keeps repeated runs byte-identical.
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def _column(series, name):
    return series[name] if name in series.keys() else np.array([])


def run_figures(result, output_dir):
    s = result.series
    scheme = result.config.scheme
    sty = SCHEME_STYLE.get(scheme, {})
    out = {}
    if not len(s):
        return out
    t = _column(s, "time")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, _column(s, "energy_ratio"), label=scheme, **sty)
        ax.set_xlabel("time")
        ax.set_ylabel("energy ratio")
        ax.legend()
        out["energy_figure"] = _save(fig, os.path.join(output_dir, "energy_ratio.png"))

        fig, ax = plt.subplots()
        a = _column(s, "area")
        ax.plot(t, a / a[0], **sty)
        ax.set_xlabel("time")
        ax.set_ylabel("area / initial area")
        out["area_figure"] = _save(fig, os.path.join(output_dir, "area.png"))

        fig, ax = plt.subplots()
        ax.semilogy(t, _column(s, "cfl_lhs") / _column(s, "cfl_rhs"), **sty)
        ax.axhline(1.0, color="0.4", linewidth=0.8, linestyle=":")
        ax.set_xlabel("time")
        ax.set_ylabel(r"$L^n\Delta t$ / CFL scale")
        out["cfl_figure"] = _save(fig, os.path.join(output_dir, "cfl.png"))
    return out


def stability_figure(cells, path):
    """One panel per (dt, h_s, h_x) cell, both schemes overlaid."""
    keys = sorted({(c.dt, c.h_s, c.h_x) for c in cells}, key=lambda k: (-k[0], -k[1], -k[2]))
    n = len(keys)
    ncol = min(3, n)
    nrow = int(np.ceil(n / ncol))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(nrow, ncol, figsize=(2.6 * ncol, 2.0 * nrow), squeeze=False)
        for ax, key in zip(axes.ravel(), keys):
            for c in cells:
                if (c.dt, c.h_s, c.h_x) != key or not c.energy_ratios:
                    continue
                ax.semilogy(c.times, np.maximum(c.energy_ratios, 1e-16), label=c.scheme,
                            **SCHEME_STYLE.get(c.scheme, {}))
            ax.set_title(f"dt={key[0]:g}, h_s={key[1]:g}, h_x={key[2]:g}", fontsize=7)
            ax.set_xlabel("time")
            ax.set_ylabel("energy ratio")
        for ax in axes.ravel()[n:]:
            ax.set_visible(False)
        axes.ravel()[0].legend()
        return _save(fig, path)
