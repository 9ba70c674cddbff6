"""PNG figures for run reports."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import chart


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_traces(records, path):
    """Energy, criticality and modulus against the step index."""
    step = np.array([r["step"] for r in records], dtype=float)
    E = np.array([r["E"] for r in records], dtype=float)
    g = np.array([r["g1"] + r["g2"] + r["g3"] for r in records], dtype=float)
    rho = np.array([r["rho"] for r in records], dtype=float)
    fig, ax = plt.subplots(1, 3, figsize=(11, 3.2))
    ax[0].plot(step, E, "o-", ms=3)
    ax[0].set_ylabel("energy")
    ok = np.isfinite(g) & (g > 0)
    if ok.any():
        ax[1].semilogy(step[ok], g[ok], "o-", ms=3)
    ax[1].set_ylabel("g = g1 + g2 + g3")
    ax[2].plot(step, rho, "o-", ms=3)
    ax[2].set_ylabel("rho")
    for a in ax:
        a.set_xlabel("step")
        a.grid(alpha=0.3)
    _finish(fig, path)


def plot_path_profile(sigmas, energies, path, beta=None, saddle_sigma=None):
    """Energy along the mountain-pass path against sigma = 1/|ln rho|."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(sigmas, energies, "o-", ms=3, label="path nodes")
    if beta is not None and saddle_sigma is not None:
        ax.plot([saddle_sigma], [beta], "r*", ms=10, label="saddle")
    ax.set_xlabel("sigma = 1/|ln rho|")
    ax.set_ylabel("energy")
    ax.grid(alpha=0.3)
    ax.legend()
    _finish(fig, path)


def plot_surface(F, path, use_chart=False):
    """Wireframe of the first three coordinates (or the 3-D chart) of a field."""
    fields = F if isinstance(F, (tuple, list)) else (F,)
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="3d")
    for G in fields:
        P = chart(G.values, G.manifold) if use_chart else G.values[..., :3]
        P = np.concatenate([P, P[:, :1]], axis=1)
        st = max(1, P.shape[1] // 48)
        ax.plot_surface(P[..., 0], P[..., 1], P[..., 2], rstride=1, cstride=st,
                        color="tab:blue", alpha=0.6, linewidth=0.2, edgecolor="k")
    ax.set_box_aspect((1, 1, 1))
    _finish(fig, path)
