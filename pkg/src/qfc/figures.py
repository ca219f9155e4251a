"""Matplotlib figure rendering for the report paths.

All figures are written to files (SVG for the response surfaces, PNG for
traces); rendering is headless and deterministic (fixed hash salt, no
embedded timestamps).
"""

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "qfc"

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KWARGS = {"metadata": {"Date": None}}


def surface_figure(x_grid, p_grid, forces, path, title="control force") -> None:
    """Heatmap of force against the phase-space means."""
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    mesh = ax.pcolormesh(x_grid, p_grid, forces, shading="auto", cmap="RdBu_r")
    fig.colorbar(mesh, ax=ax, label="force")
    ax.set_xlabel(r"$\langle x \rangle$")
    ax.set_ylabel(r"$\langle p \rangle$")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **(_SAVE_KWARGS if str(path).endswith(".svg") else {}))
    plt.close(fig)


def episode_figure(records, path, value_label="phonon number") -> None:
    """Observable and force traces of the first few episodes."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 5.2), sharex=True)
    for i, rec in enumerate(records[:5]):
        values = rec.phonons if hasattr(rec, "phonons") else rec.energies
        ax1.plot(rec.times, values, lw=0.8, label=f"episode {i}")
    ax1.set_ylabel(value_label)
    ax1.legend(loc="upper right", fontsize=7)
    rec = records[0]
    ax2.step(rec.times, rec.forces, lw=0.7, where="post")
    ax2.set_ylabel("force")
    ax2.set_xlabel(r"$t$ ($1/\omega_c$)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def training_figure(metrics, path) -> None:
    """Episode reward and training loss curves."""
    metrics = np.asarray(
        [(m[0], m[2], m[3]) for m in metrics], dtype=float
    )
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 5.2), sharex=True)
    ax1.plot(metrics[:, 0], metrics[:, 1], lw=0.8)
    ax1.set_ylabel("episode reward")
    ax2.plot(metrics[:, 0], metrics[:, 2], lw=0.8)
    ax2.set_ylabel("mean loss")
    ax2.set_xlabel("episode")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
