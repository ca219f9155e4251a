"""SSE simulation of quadratic potentials in the harmonic eigenbasis.

The pure-state stochastic Schroedinger equation under continuous
position measurement,

    d|psi> = [(-i H - gamma/4 (x - <x>)^2) dt + sqrt(gamma/2) (x - <x>) dW] |psi>,
    H = p^2/2m + k/2 x^2 + F x,

is advanced with the mixed explicit/implicit order-1.5 scheme; the
Hamiltonian drift is the implicit linear part.  The state is expressed
on the eigenbasis of the reference oscillator (1/2)|k| x^2 truncated at
n_max, and renormalized after every step.  An episode fails when the
amplitude on the fail_index eigenstate exceeds the threshold, checked at
control-step cadence.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from qfc import sde
from qfc._osc_kernel import osc_control_step, osc_observables
from qfc.controllers import StepSummary, force_levels
from qfc.states import HBAR, GaussianMoments, HarmonicBasisState

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class QuadraticParams:
    """Simulation configuration; defaults are the cooling problem."""

    k: float = np.pi
    m: float = 1 / np.pi
    gamma: float = np.pi
    eta: float = 1.0
    dt: float = 1 / 720
    n_max: int = 130
    fail_index: int = 120
    fail_threshold: float = 1e-5
    force_bounds: tuple = (-5 * np.pi, 5 * np.pi)
    controls_per_unit_time: int = 18
    t_max: float = 100.0
    third_order: bool = True

    def __post_init__(self):
        ratio = self.control_dt / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("dt must divide the control-step duration exactly")

    @property
    def omega(self) -> float:
        return np.sqrt(abs(self.k) / self.m)

    @property
    def control_dt(self) -> float:
        return 1.0 / self.controls_per_unit_time

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.dt))

    @property
    def n_control_steps(self) -> int:
        return int(round(self.t_max * self.controls_per_unit_time))


def cooling_params(**overrides) -> QuadraticParams:
    """Paper configuration of the harmonic cooling problem."""
    return QuadraticParams(**overrides)


def inverted_params(**overrides) -> QuadraticParams:
    """Paper configuration of the inverted-oscillator stabilization problem."""
    defaults = dict(
        k=-np.pi,
        gamma=2 * np.pi,
        dt=1 / 1440,
        force_bounds=(-10 * np.pi, 10 * np.pi),
    )
    defaults.update(overrides)
    return QuadraticParams(**defaults)


@lru_cache(maxsize=8)
def _operator_bands(n_basis: int, m: float, omega: float, k: float):
    """Real band representations of x, p, x^2, p^2, sym(xp), H0 on the basis."""
    n = np.arange(n_basis)
    lx2 = HBAR / (2 * m * omega)
    lp2 = HBAR * m * omega / 2
    sq1 = np.sqrt(n[:-1] + 1.0)
    sq2 = np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0))
    xoff = np.sqrt(lx2) * sq1
    poff = np.sqrt(lp2) * sq1  # imaginary part of p_{n,n+1} is -poff
    x2d = lx2 * (2 * n + 1.0)
    x2o = lx2 * sq2
    p2d = lp2 * (2 * n + 1.0)
    p2o = -lp2 * sq2
    co = -np.sqrt(lx2 * lp2) * sq2  # imaginary part of sym(xp)_{n,n+2}
    h0d = p2d / (2 * m) + 0.5 * k * x2d
    h0o2 = p2o / (2 * m) + 0.5 * k * x2o
    return {
        "xoff": xoff,
        "poff": poff,
        "x2d": x2d,
        "x2o": x2o,
        "p2d": p2d,
        "p2o": p2o,
        "co": co,
        "h0d": h0d,
        "h0o2": h0o2,
    }


def build_operators(params: QuadraticParams) -> dict:
    """Dense {x, x2, p2, n} matrices on the truncated basis."""
    if params.n_max < 2:
        raise ValueError("n_max must be at least 2")
    bands = _operator_bands(params.n_max + 1, params.m, params.omega, params.k)
    nb = params.n_max + 1
    x = np.zeros((nb, nb))
    x[np.arange(nb - 1), np.arange(1, nb)] = bands["xoff"]
    x += x.T
    x2 = np.diag(bands["x2d"])
    x2[np.arange(nb - 2), np.arange(2, nb)] = bands["x2o"]
    x2[np.arange(2, nb), np.arange(nb - 2)] = bands["x2o"]
    p2 = np.diag(bands["p2d"])
    p2[np.arange(nb - 2), np.arange(2, nb)] = bands["p2o"]
    p2[np.arange(2, nb), np.arange(nb - 2)] = bands["p2o"]
    number = np.diag(np.arange(nb, dtype=float))
    return {"x": x, "x2": x2, "p2": p2, "n": number}


def hamiltonian_bands(params: QuadraticParams, force: float):
    """Real symmetric pentadiagonal bands of H = H0 + F x."""
    bands = _operator_bands(params.n_max + 1, params.m, params.omega, params.k)
    h0 = bands["h0d"]
    h1 = force * bands["xoff"]
    h2 = bands["h0o2"]
    return h0, h1, h2, bands["xoff"]


def ground_state(params: QuadraticParams) -> HarmonicBasisState:
    amps = np.zeros(params.n_max + 1, dtype=np.complex128)
    amps[0] = 1.0
    return HarmonicBasisState(amps, params.m, params.omega)


def make_problem(params: QuadraticParams, force: float) -> sde.DriftDiffusionProblem:
    """Reference (numpy) drift/diffusion contracts for one force value."""
    h0, h1, h2, xoff = hamiltonian_bands(params, force)
    nb = params.n_max + 1
    hmat = np.diag(h0).astype(np.complex128)
    hmat[np.arange(nb - 1), np.arange(1, nb)] += h1
    hmat[np.arange(1, nb), np.arange(nb - 1)] += h1
    hmat[np.arange(nb - 2), np.arange(2, nb)] += h2
    hmat[np.arange(2, nb), np.arange(nb - 2)] += h2
    xmat = np.zeros((nb, nb))
    xmat[np.arange(nb - 1), np.arange(1, nb)] = xoff
    xmat += xmat.T
    gamma = params.gamma

    def mean_x(psi):
        nrm2 = float(np.real(np.vdot(psi, psi)))
        return float(np.real(np.vdot(psi, xmat @ psi))) / nrm2

    def drift(psi):
        ex = mean_x(psi)
        xc = xmat @ psi - ex * psi
        xc2 = xmat @ xc - ex * xc
        return -1j * (hmat @ psi) - (gamma / 4) * xc2

    def diffusion(psi):
        ex = mean_x(psi)
        return np.sqrt(gamma / 2) * (xmat @ psi - ex * psi)

    def linear_apply(psi):
        return -1j * (hmat @ psi)

    def linear_solve(rhs, dt):
        return np.linalg.solve(
            np.eye(nb) + 0.5j * dt * hmat, rhs
        )

    return sde.DriftDiffusionProblem(drift, diffusion, linear_apply, linear_solve)


def step(
    state: HarmonicBasisState,
    force: float,
    params: QuadraticParams,
    rng: np.random.Generator,
):
    """One reference SDE step; returns (new state, measurement signal).

    The numba control-step kernel reproduces this arithmetic; this entry
    point exists for tests and for custom stepping.
    """
    lo, hi = params.force_bounds
    if not lo - 1e-9 <= force <= hi + 1e-9:
        raise ValueError(f"force {force} outside bounds {params.force_bounds}")
    problem = make_problem(params, force)
    inc = sde.sample_increments(rng, params.dt)
    ex_pre = float(
        np.real(np.vdot(state.amplitudes, build_operators(params)["x"] @ state.amplitudes))
    )
    psi = sde.step_mixed_implicit_15(
        problem, state.amplitudes, params.dt, inc, third_order=params.third_order
    )
    psi = psi / np.linalg.norm(psi)
    sig_coef = 1 / (np.sqrt(2 * params.gamma) * params.dt) if params.gamma > 0 else 0.0
    signal = ex_pre + inc.dW * sig_coef
    if not np.all(np.isfinite(psi)):
        raise sde.StepFailure("non-finite amplitudes in oscillator step")
    return HarmonicBasisState(psi, state.m, state.omega), signal


@dataclass
class StepResult:
    """Observables recorded at the end of one control step."""

    time: float
    moments: GaussianMoments
    phonon: float
    signal: float
    force: float
    failed: bool


@dataclass
class EpisodeRecord:
    """Per-control-step history of one episode."""

    times: np.ndarray
    moments: np.ndarray  # (n, 5): mean_x, mean_p, var_x, var_p, cov_c
    phonons: np.ndarray
    forces: np.ndarray
    signals: np.ndarray
    rewards: np.ndarray
    failed: bool
    terminal_time: float


class OscillatorEpisode:
    """Incremental episode driver (one control step per call)."""

    def __init__(
        self,
        params: QuadraticParams,
        rng: np.random.Generator,
        initial: Optional[HarmonicBasisState] = None,
    ):
        self.params = params
        self.rng = rng
        if initial is not None:
            self.psi = initial.amplitudes.astype(np.complex128).copy()
        else:
            self.psi = np.zeros(params.n_max + 1, dtype=np.complex128)
            self.psi[0] = 1.0
        self.t = 0.0
        self.failed = False
        self.done = False
        self.substep_signals = np.zeros(params.substeps)
        self._bands = _operator_bands(
            params.n_max + 1, params.m, params.omega, params.k
        )
        self._levels = force_levels(params.force_bounds)

    def observables(self):
        b = self._bands
        ex, ep, vx, vp, c, phonon = osc_observables(
            self.psi, b["xoff"], b["poff"], b["x2d"], b["x2o"], b["p2d"], b["p2o"], b["co"]
        )
        return GaussianMoments(ex, ep, vx, vp, c), phonon

    def summary(self) -> StepSummary:
        moments, _ = self.observables()
        return StepSummary(moments=moments)

    def control_step(self, force: float, discrete: bool = False) -> StepResult:
        """Hold `force` constant for one control step and advance."""
        if self.done:
            raise RuntimeError("episode already terminated")
        p = self.params
        lo, hi = p.force_bounds
        if not lo - 1e-9 <= force <= hi + 1e-9:
            raise ValueError(f"force {force} outside bounds {p.force_bounds}")
        if discrete and np.min(np.abs(self._levels - force)) > 1e-9:
            raise ValueError(f"force {force} not on the discrete grid")
        h0, h1, h2, xoff = hamiltonian_bands(p, force)
        draws = self.rng.standard_normal((p.substeps, 2)) * np.sqrt(p.dt)
        dws = draws[:, 0]
        dzs = 0.5 * p.dt * (dws + draws[:, 1] / SQRT3)
        self.substep_signals = np.zeros(p.substeps)
        signal = osc_control_step(
            self.psi, h0, h1, h2, xoff, p.gamma, p.dt, dws, dzs, p.third_order,
            self.substep_signals,
        )
        self.t += p.control_dt
        moments, phonon = self.observables()
        if abs(self.psi[p.fail_index]) > p.fail_threshold:
            self.failed = True
            self.done = True
        elif self.t >= p.t_max - 1e-9:
            self.done = True
        return StepResult(self.t, moments, phonon, signal, force, self.failed)

    def state(self) -> HarmonicBasisState:
        return HarmonicBasisState(self.psi.copy(), self.params.m, self.params.omega)


def run_episode(
    controller: Callable[[StepSummary], float],
    params: QuadraticParams,
    rng: np.random.Generator,
    discrete: bool = False,
    reward_fn: Optional[Callable[[StepResult], float]] = None,
) -> EpisodeRecord:
    """Run one episode from the ground state under a controller."""
    ep = OscillatorEpisode(params, rng)
    n = params.n_control_steps
    times = np.zeros(n)
    moments = np.zeros((n, 5))
    phonons = np.zeros(n)
    forces = np.zeros(n)
    signals = np.zeros(n)
    rewards = np.zeros(n)
    steps = 0
    while not ep.done:
        force = controller(ep.summary())
        res = ep.control_step(force, discrete=discrete)
        times[steps] = res.time
        moments[steps] = res.moments.as_array()
        phonons[steps] = res.phonon
        forces[steps] = res.force
        signals[steps] = res.signal
        rewards[steps] = reward_fn(res) if reward_fn is not None else 0.0
        steps += 1
    return EpisodeRecord(
        times=times[:steps],
        moments=moments[:steps],
        phonons=phonons[:steps],
        forces=forces[:steps],
        signals=signals[:steps],
        rewards=rewards[:steps],
        failed=ep.failed,
        terminal_time=ep.t,
    )
