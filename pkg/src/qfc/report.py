"""Delimited outputs: episode records, evaluation summaries, surfaces.

CSV schemas are versioned by column order and documented in the README:

    episodes.csv  episode,t,x_mean,p_mean,vx,vp,c,n_or_energy,force,reward,failed
    surface.csv   x,p,force
    summary.csv   problem,controller,episodes,n_samples,mean,se,failures
    metrics.csv   episode,steps,reward,mean_loss,epsilon,lr

Floats are written with repr (shortest round-trip form), so two runs
with the same seed produce byte-identical files.
"""

import os

import numpy as np


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_rows(path, header, rows) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


EPISODE_HEADER = (
    "episode", "t", "x_mean", "p_mean", "vx", "vp", "c",
    "n_or_energy", "force", "reward", "failed",
)


def episode_rows(records):
    for index, rec in enumerate(records):
        values = rec.phonons if hasattr(rec, "phonons") else rec.energies
        last = len(rec.times) - 1
        for i in range(len(rec.times)):
            failed_here = rec.failed and i == last
            yield (
                index,
                rec.times[i],
                rec.moments[i, 0],
                rec.moments[i, 1],
                rec.moments[i, 2],
                rec.moments[i, 3],
                rec.moments[i, 4],
                values[i],
                rec.forces[i],
                rec.rewards[i],
                failed_here,
            )


def write_episodes(path, records) -> None:
    write_rows(path, EPISODE_HEADER, episode_rows(records))


def write_surface(path, x_grid, p_grid, forces) -> None:
    rows = (
        (x, p, forces[i, j])
        for j, x in enumerate(x_grid)
        for i, p in enumerate(p_grid)
    )
    write_rows(path, ("x", "p", "force"), rows)


def write_summary(path, summaries) -> None:
    rows = (
        (s.problem, s.controller, s.episodes, s.n_samples, s.mean, s.se, s.failures)
        for s in summaries
    )
    header = ("problem", "controller", "episodes", "n_samples", "mean", "se", "failures")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            out = []
            for v in row:
                out.append(v if isinstance(v, str) else _fmt(v))
            fh.write(",".join(out) + "\n")


def write_metrics(path, metrics) -> None:
    write_rows(
        path,
        ("episode", "steps", "reward", "mean_loss", "epsilon", "lr"),
        metrics,
    )
