"""Render figures from the CSVs of a run or sweep directory.

This file has no package imports, so it is also copied into every output
directory as ``render.py``:  ``python render.py <dir>`` redraws the PNGs
from the files listed in ``<dir>/manifest.json``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PNG_META = {"Software": None}


def read_csv(path):
    """Columns of a header-row CSV as a dict of float arrays (strings kept as-is)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return cols


def density_figure(files, out):
    """Trait density against the mortality landscape, one panel per snapshot."""
    fig, axes = plt.subplots(1, len(files), figsize=(4.2 * len(files), 3.4), squeeze=False)
    for ax, (label, path) in zip(axes[0], files):
        d = read_csv(path)
        ax.plot(d["x"], d["q"], color="tab:blue", label="q")
        ax.set_xlabel("trait x")
        ax.set_ylabel("density", color="tab:blue")
        ax.set_title(f"t = {label}")
        tw = ax.twinx()
        tw.plot(d["x"], d["mortality"], color="tab:red", label="mortality")
        tw.plot(d["x"], d["mortality_limit"], color="tab:red", ls="--", label="limit")
        tw.set_ylabel("mortality", color="tab:red")
    fig.tight_layout()
    fig.savefig(out, dpi=110, metadata=PNG_META)
    plt.close(fig)


def trajectory_figure(moments, theory, out):
    """Mean trait and population against the canonical-equation prediction."""
    m = read_csv(moments)
    th = read_csv(theory)
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.4))
    a.plot(m["time"], m["m1"], label="M1")
    a.plot(th["times"], th["zbar_eps"], ls="--", label="Zbar_eps")
    a.plot(th["times"], th["zbar_0"], ls=":", label="Zbar_0")
    a.set_xlabel("t")
    a.set_ylabel("mean trait")
    a.legend()
    b.plot(m["time"], m["rho"], label="rho")
    if np.all(np.isnan(th["i_of_z"])):
        b.plot(th["times"], th["rho_limit"], ls="--", label="rho limit")
    else:
        b.plot(th["times"], th["i_of_z"], ls="--", label="I(Zbar_eps)")
    if "rho2" in m and not np.all(np.isnan(m["rho2"])):
        b.plot(m["time"], m["rho2"], label="rho2")
    b.set_xlabel("t")
    b.set_ylabel("population")
    b.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=110, metadata=PNG_META)
    plt.close(fig)


SCALING_METRICS = ("terminal_m1_gap", "terminal_rho_gap", "terminal_w1", "sup_w1",
                   "terminal_m2c_gap")


def scaling_figure(scaling, out):
    """Log-log plot of the sweep diagnostics against epsilon."""
    s = read_csv(scaling)
    ok = s["status"] == "ok"
    fig, ax = plt.subplots(figsize=(5, 4))
    for name in SCALING_METRICS:
        ax.loglog(s["epsilon"][ok], s[name][ok], "o-", label=name)
    ax.set_xlabel("epsilon")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=110, metadata=PNG_META)
    plt.close(fig)


def render(directory):
    """Draw every figure the manifest of ``directory`` calls for; return the PNG names."""
    d = Path(directory)
    man = json.loads((d / "manifest.json").read_text())
    files = set(man["files"])
    made = []
    dens = sorted((f for f in files if f.startswith("density_t") and f.endswith(".csv")),
                  key=lambda f: float(f[len("density_t"):-4]))
    if dens:
        density_figure([(f[len("density_t"):-4], d / f) for f in dens], d / "fig_density.png")
        made.append("fig_density.png")
    if {"moments.csv", "theory.csv"} <= files:
        trajectory_figure(d / "moments.csv", d / "theory.csv", d / "fig_trajectories.png")
        made.append("fig_trajectories.png")
    if "scaling.csv" in files:
        s = read_csv(d / "scaling.csv")
        if np.count_nonzero(s["status"] == "ok") >= 2:
            scaling_figure(d / "scaling.csv", d / "fig_scaling.png")
            made.append("fig_scaling.png")
    return made


if __name__ == "__main__":
    render(sys.argv[1] if len(sys.argv) > 1 else ".")
