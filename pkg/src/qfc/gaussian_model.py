"""Reduced five-moment model of a measured particle in a quadratic potential.

Under continuous position measurement the state stays Gaussian, so
(<x>, <p>, V_x, V_p, C) is a complete description.  The moments obey

    d<x> = <p>/m dt + sqrt(2 gamma eta) V_x dW
    d<p> = (-k <x> - F) dt + sqrt(2 gamma eta) C dW
    dV_x = (2C/m - 2 gamma eta V_x^2) dt
    dV_p = (-2kC - 2 gamma eta C^2 + gamma hbar^2 / 2) dt
    dC   = (V_p/m - kV_x - 2 gamma eta V_x C) dt

with only the means carrying noise; the covariances evolve
deterministically and converge to closed-form steady values.
"""

from dataclasses import dataclass

import numpy as np

from qfc.states import HBAR, GaussianMoments


@dataclass(frozen=True)
class MomentModelParams:
    """Potential curvature k (either sign), mass, measurement strength/efficiency."""

    k: float
    m: float
    gamma: float
    eta: float = 1.0

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if self.gamma < 0 or not (0 <= self.eta <= 1):
            raise ValueError("need gamma >= 0 and 0 <= eta <= 1")

    @property
    def omega(self) -> float:
        return np.sqrt(abs(self.k) / self.m)


def steady_covariances(k: float, m: float, gamma: float, eta: float = 1.0):
    """Closed-form stationary (V_x, V_p, C) of the covariance flow."""
    ge = gamma * eta
    if ge <= 0:
        raise ValueError("gamma * eta must be positive")
    c = (-k + np.sqrt(k**2 + gamma**2 * eta * HBAR**2)) / (2 * ge)
    vx = np.sqrt(c / (m * ge))
    vp = 2 * c * np.sqrt(m * ge * c) + k * np.sqrt(m * c / ge)
    return float(vx), float(vp), float(c)


def moment_step(
    moments: GaussianMoments,
    params: MomentModelParams,
    force: float,
    dt: float,
    dW: float,
) -> GaussianMoments:
    """Advance the five moments by one time step.

    Means are updated with Euler-Maruyama (noise coefficients evaluated
    at the step start, Ito convention); the noiseless covariance ODEs are
    integrated with a classical RK4 stage over the same interval.
    """
    k, m, ge, gamma = params.k, params.m, params.gamma * params.eta, params.gamma
    amp = np.sqrt(2 * ge)
    mx = moments.mean_x + moments.mean_p / m * dt + amp * moments.var_x * dW
    mp = (
        moments.mean_p
        + (-k * moments.mean_x - force) * dt
        + amp * moments.cov_c * dW
    )

    def rates(v):
        vx, vp, c = v
        return np.array(
            [
                2 * c / m - 2 * ge * vx**2,
                -2 * k * c - 2 * ge * c**2 + 0.5 * gamma * HBAR**2,
                vp / m - k * vx - 2 * ge * vx * c,
            ]
        )

    v0 = np.array([moments.var_x, moments.var_p, moments.cov_c])
    k1 = rates(v0)
    k2 = rates(v0 + 0.5 * dt * k1)
    k3 = rates(v0 + 0.5 * dt * k2)
    k4 = rates(v0 + dt * k3)
    vx, vp, c = v0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return GaussianMoments(float(mx), float(mp), float(vx), float(vp), float(c))


def energy_from_means(
    moments: GaussianMoments, k: float, m: float
) -> float:
    """Phonon-number expectation <n> of a displaced steady-shape state.

    <n> = <n>_rho0 + (<p>^2/2m + |k| <x>^2 / 2) / (hbar omega), where the
    offset <n>_rho0 = (V_p/2m + |k| V_x/2)/(hbar omega) - 1/2 comes from
    the state's covariances.
    """
    omega = np.sqrt(abs(k) / m)
    offset = (moments.var_p / (2 * m) + abs(k) * moments.var_x / 2) / (
        HBAR * omega
    ) - 0.5
    displacement = (
        moments.mean_p**2 / (2 * m) + abs(k) * moments.mean_x**2 / 2
    ) / (HBAR * omega)
    return float(offset + displacement)


def cooling_floor(k: float, m: float, gamma: float, eta: float = 1.0) -> float:
    """Analytic phonon-number floor of the trajectory-constrained control.

    Holding <p> = -sqrt(mk) <x> turns <x> into an Ornstein-Uhlenbeck
    process with rate theta = sqrt(k/m) and diffusion sigma = sqrt(2
    gamma eta) V_x, whose stationary E[<x>^2] = sigma^2/(2 theta); the
    floor adds the resulting displacement energy to the covariance
    offset.
    """
    if k <= 0:
        raise ValueError("cooling floor is defined for a confining potential k > 0")
    if gamma * eta == 0:
        return 0.0
    vx, vp, c = steady_covariances(k, m, gamma, eta)
    omega = np.sqrt(k / m)
    offset = (vp / (2 * m) + k * vx / 2) / (HBAR * omega) - 0.5
    sigma2 = 2 * gamma * eta * vx**2
    ex2 = sigma2 / (2 * omega)
    return float(offset + k * ex2 / (HBAR * omega))
