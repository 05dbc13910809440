"""
Figures of error curves and their quadratic fits.
"""

from __future__ import annotations

import math

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_estimate(estimate, path, xi=1e-13, t0=None, title=None):
    """
    Log-log error curves with the fitted growth regions, one colour per M.

    Parameters
    ----------
    estimate : DelayEstimate
    path : str
        Output image file; the format follows the extension.
    xi : float
        Drawn as a horizontal reference line.
    t0 : float, optional
        Known delay in seconds, drawn as a vertical line.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for e in estimate.per_m:
        c = e.curve
        m = c.ts > 0
        line, = ax.loglog(c.t_seconds[m], c.errs[m], lw=1.0,
                          label=f"M={e.M}")
        f = e.fit
        u = np.linspace(min(math.log(xi), math.log(f.e_range[0])),
                        math.log(f.e_range[1]), 100)
        t = np.exp([f.log_time(v) for v in u]) * c.scale_a
        ax.loglog(t, np.exp(u), ls="--", lw=0.8, color=line.get_color())
    ax.axhline(xi, color="0.5", ls=":", lw=0.8)
    if t0 is not None:
        ax.axvline(t0, color="k", ls=":", lw=0.8)
    ax.set_xlabel("trial delay T [s]")
    ax.set_ylabel(r"$\|E_R\|_\infty$")
    ax.set_title(title or "continuation error vs trial delay")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
