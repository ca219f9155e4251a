"""Non-learning control laws.

The trajectory controller drives the phase-space means onto the stopping
manifold p = -sqrt(m|k|) x by solving, per control step, for the constant
force whose second-order (dt^2) deterministic endpoint lands on the
manifold.  Its discretized and bang-bang variants model the coarser
actuators.  The three quartic controllers (damping, quadratic, Gaussian
approximation) use the same endpoint construction with the quartic drift
d<p>/dt = -4 lambda <x^3> - F.

All controllers clip to the configured force bounds; when an episode is
configured with discrete actuation they additionally snap to the
21-level equispaced force grid.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from qfc.states import GaussianMoments


@dataclass(frozen=True)
class StepSummary:
    """Per-control-step observables handed to a controller."""

    moments: GaussianMoments
    x3: Optional[float] = None  # raw <x^3>, needed by the quartic laws


@dataclass(frozen=True)
class ControlPolicy:
    """Named controller configuration.

    kind is one of optimal_trajectory, discretized_optimal, bang_bang,
    damping, quadratic, gaussian_approx, dqn.
    """

    kind: str
    zeta: float = 0.5
    k_quadratic: Optional[float] = None  # quartic 'quadratic' law; default 2*lambda
    levels: int = 21


def force_levels(bounds, levels: int = 21) -> np.ndarray:
    lo, hi = bounds
    delta = (hi - lo) / (levels - 1)
    if lo == -hi and levels % 2 == 1:
        # symmetric grids hit 0 and +-k*delta exactly, keeping the
        # midpoint tie rule meaningful
        half = (levels - 1) // 2
        return delta * np.arange(-half, half + 1)
    return lo + delta * np.arange(levels)


def clip_discretize(force: float, bounds, levels: int = 21) -> float:
    """Clamp to bounds and snap to the nearest of the equispaced levels.

    Exact midpoints snap toward zero force.
    """
    lo, hi = bounds
    f = min(max(force, lo), hi)
    grid = force_levels(bounds, levels)
    dist = np.abs(grid - f)
    best = np.min(dist)
    tied = np.flatnonzero(dist == best)
    if len(tied) > 1:
        tied = tied[np.argmin(np.abs(grid[tied]))]
        return float(grid[tied])
    return float(grid[tied[0]])


def bang_bang(force: float, bounds) -> float:
    """Extreme-force variant; a zero input maps to the positive extreme."""
    lo, hi = bounds
    return float(lo) if force < 0 else float(hi)


def trajectory_force(
    moments: GaussianMoments,
    k: float,
    m: float,
    step_dt: float,
    bounds=None,
    order: int = 2,
) -> float:
    """Constant force placing the deterministic endpoint on p = -sqrt(m|k|) x.

    Expanding d<x> and d<p> to second order over the control step tau:

        x' = x + p/m tau - (k x + F) tau^2 / (2m)
        p' = p - (k x + F) tau - k p tau^2 / (2m)

    and imposing p' + s x' = 0 with s = sqrt(m|k|) solves linearly for F.
    order=1 keeps only the linear endpoint terms (the coarser variant
    the quartic 'quadratic' law uses).
    """
    x, p = moments.mean_x, moments.mean_p
    s = np.sqrt(m * abs(k))
    tau = step_dt
    if order == 1:
        force = (p + s * x) / tau + s * p / m - k * x
    else:
        numer = (p + s * x) * (1 - k * tau**2 / (2 * m)) + tau * (s * p / m - k * x)
        denom = tau * (1 + s * tau / (2 * m))
        force = numer / denom
    if bounds is not None:
        force = min(max(force, bounds[0]), bounds[1])
    return float(force)


def damping_force(
    summary: StepSummary, lam: float, zeta: float, step_dt: float
) -> float:
    """Remove a fraction zeta of <p> with the control term alone:
    F tau = zeta <p>.

    Pure momentum dissipation (dE = -zeta <p>^2/(m tau) dt <= 0).
    Folding the -4 lambda <x^3> potential drift into the solve instead
    would make every (x, p = 0) state a closed-loop equilibrium: the
    force then exactly cancels the restoring force and parks the packet
    on the potential wall.
    """
    return float(zeta * summary.moments.mean_p / step_dt)


def gaussian_target_momentum(x: float, var_x: float, lam: float, m: float) -> float:
    """Stopping-manifold momentum of the Gaussian-approximated quartic flow."""
    return float(-np.sqrt(2 * m * (6 * lam * var_x + lam * x**2)) * x)


def gaussian_approx_force(
    summary: StepSummary, lam: float, m: float, step_dt: float
) -> float:
    """Endpoint solve onto p = -sqrt(2m(6 lambda V_x + lambda x^2)) x.

    The endpoint position is advanced to first order, the momentum
    equation then gives the force; the current (recomputed) V_x enters
    the target manifold and the raw <x^3> enters the momentum drift.
    """
    mom = summary.moments
    x1 = mom.mean_x + mom.mean_p / m * step_dt
    p_target = gaussian_target_momentum(x1, mom.var_x, lam, m)
    return float((mom.mean_p - p_target) / step_dt - 4 * lam * summary.x3)


def quartic_force(
    policy: ControlPolicy,
    summary: StepSummary,
    lam: float,
    m: float,
    step_dt: float,
    bounds,
) -> float:
    """Dispatch one of the quartic control laws and discretize the output."""
    if policy.kind == "damping":
        raw = damping_force(summary, lam, policy.zeta, step_dt)
    elif policy.kind == "quadratic":
        k_eff = policy.k_quadratic if policy.k_quadratic is not None else 2 * lam
        raw = trajectory_force(summary.moments, k_eff, m, step_dt, order=1)
    elif policy.kind == "gaussian_approx":
        raw = gaussian_approx_force(summary, lam, m, step_dt)
    else:
        raise ValueError(f"unknown quartic control kind {policy.kind!r}")
    return clip_discretize(raw, bounds, policy.levels)


def make_quadratic_controller(policy: ControlPolicy, k, m, step_dt, bounds):
    """Controller callable for the quadratic problems."""
    kind = policy.kind

    def control(summary: StepSummary) -> float:
        raw = trajectory_force(summary.moments, k, m, step_dt, bounds=bounds)
        if kind == "optimal_trajectory":
            return raw
        if kind == "discretized_optimal":
            return clip_discretize(raw, bounds, policy.levels)
        if kind == "bang_bang":
            return bang_bang(raw, bounds)
        raise ValueError(f"unknown quadratic control kind {kind!r}")

    return control


def make_quartic_controller(policy: ControlPolicy, lam, m, step_dt, bounds):
    """Controller callable for the quartic problem (always discretized)."""

    def control(summary: StepSummary) -> float:
        return quartic_force(policy, summary, lam, m, step_dt, bounds)

    return control


def zero_controller(summary: StepSummary) -> float:
    return 0.0
