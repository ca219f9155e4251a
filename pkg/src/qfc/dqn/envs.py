"""Control environments adapting the simulators to the Q-learning loop.

Each environment exposes reset(rng) -> obs, step(action) -> (obs,
reward, done), n_actions and duration.  Actions index the 21-level force
grid.  Observations are scaled by fixed affine constants (obs_scale,
obs_shift) that are recorded in checkpoints for reproducibility.

Reward shapings (sign-flipped losses):

    cooling (moments input)      r = -5 (<n> - 0.4)
    cooling (other inputs)       r = -2 (<n> - 1), episode stops at <n> > 10
                                 (wavefunction) or <n> > 20 (measurement)
    inverted                     r = 0.02 (-<n>), and -10 on failure
    quartic                      r = -2 (E - 1)
"""

import numpy as np

from qfc.controllers import force_levels
from qfc.oscillator import OscillatorEpisode, QuadraticParams
from qfc.quartic import QuarticEpisode, QuarticParams
from qfc.states import moment_vector


def reward_cooling_primary(phonon: float) -> float:
    return -5.0 * (phonon - 0.4)


def reward_cooling_rescaled(phonon: float) -> float:
    return -2.0 * (phonon - 1.0)


def reward_inverted(phonon: float, failed: bool) -> float:
    return 0.02 * (-phonon) + (-10.0 if failed else 0.0)


def reward_quartic(energy: float) -> float:
    return -2.0 * (energy - 1.0)


class _QuadraticEnvBase:
    def __init__(self, params: QuadraticParams):
        self.params = params
        self.levels = force_levels(params.force_bounds)
        self.n_actions = len(self.levels)
        self.episode = None

    @property
    def duration(self) -> float:
        return self.episode.t if self.episode is not None else 0.0

    def reset(self, rng):
        self.episode = OscillatorEpisode(self.params, rng)
        return self._observe_initial()

    def step(self, action: int):
        res = self.episode.control_step(float(self.levels[action]), discrete=True)
        return self._observe(res), self._reward(res), self.episode.done


class CoolingMomentsEnv(_QuadraticEnvBase):
    """Quintuple input; primary cooling reward."""

    obs_scale = np.array([0.5, 0.5, 1.0, 1.0, 1.0])
    obs_shift = np.zeros(5)
    obs_dim = 5

    def _moments_obs(self):
        moments, _ = self.episode.observables()
        return ((moments.as_array() - self.obs_shift) * self.obs_scale).astype(
            np.float32
        )

    def _observe_initial(self):
        return self._moments_obs()

    def _observe(self, res):
        return ((res.moments.as_array() - self.obs_shift) * self.obs_scale).astype(
            np.float32
        )

    def _reward(self, res):
        return reward_cooling_primary(res.phonon)


class InvertedMomentsEnv(CoolingMomentsEnv):
    """Quintuple input for the inverted problem; failure-penalty reward."""

    def _reward(self, res):
        return reward_inverted(res.phonon, res.failed)


class CoolingWavefunctionEnv(_QuadraticEnvBase):
    """Raw eigenbasis amplitudes (first n_coeffs), re/im split."""

    def __init__(self, params: QuadraticParams, n_coeffs: int = 40,
                 stop_phonon: float = 10.0):
        super().__init__(params)
        self.n_coeffs = n_coeffs
        self.stop_phonon = stop_phonon
        self.obs_dim = 2 * n_coeffs
        self.obs_scale = np.ones(self.obs_dim)
        self.obs_shift = np.zeros(self.obs_dim)

    def _observe_state(self):
        amps = self.episode.psi[: self.n_coeffs]
        return np.concatenate([amps.real, amps.imag]).astype(np.float32)

    def _observe_initial(self):
        return self._observe_state()

    def _observe(self, res):
        return self._observe_state()

    def _reward(self, res):
        return reward_cooling_rescaled(res.phonon)

    def step(self, action: int):
        res = self.episode.control_step(float(self.levels[action]), discrete=True)
        if res.phonon > self.stop_phonon:
            self.episode.done = True
        return self._observe(res), self._reward(res), self.episode.done


class CoolingMeasurementEnv(_QuadraticEnvBase):
    """(force, signal) history over a trailing window, two channels.

    The record is kept at simulation-step resolution (the per-substep
    measurement outcomes and the force held during them): the reference
    conv stack with kernels/strides (13,5), (11,4), (9,4) needs at least
    223 samples, so a control-step-resolution window (108 samples at
    6/omega_c) cannot feed it.  Window 6/omega_c cooling, 4/omega_c
    inverted.
    """

    def __init__(self, params: QuadraticParams, window_time: float = 6.0,
                 stop_phonon: float = 20.0,
                 force_scale: float = None, signal_scale: float = None):
        super().__init__(params)
        self.window = int(round(window_time / params.dt))
        self.stop_phonon = stop_phonon
        self.force_scale = force_scale or 1.0 / params.force_bounds[1]
        # raw outcomes are dominated by dW/(sqrt(2 gamma) dt), std
        # 1/sqrt(2 gamma dt); scale them to unit size
        self.signal_scale = signal_scale or float(
            np.sqrt(2 * params.gamma * params.dt)
        )
        self.obs_shape = (2, self.window)
        self.history = np.zeros(self.obs_shape, dtype=np.float32)

    def _observe_initial(self):
        self.history = np.zeros(self.obs_shape, dtype=np.float32)
        return self.history.copy()

    def _observe(self, res):
        sub = self.episode.substep_signals
        n = len(sub)
        self.history = np.roll(self.history, -n, axis=1)
        self.history[0, -n:] = res.force * self.force_scale
        self.history[1, -n:] = sub * self.signal_scale
        return self.history.copy()

    def _reward(self, res):
        return reward_cooling_rescaled(res.phonon)

    def step(self, action: int):
        res = self.episode.control_step(float(self.levels[action]), discrete=True)
        if res.phonon > self.stop_phonon:
            self.episode.done = True
        return self._observe(res), self._reward(res), self.episode.done


class QuarticMomentsEnv:
    """20 phase-space central moments of the grid state."""

    obs_dim = 20
    obs_scale = np.ones(20)
    obs_shift = np.zeros(20)

    def __init__(self, params: QuarticParams):
        self.params = params
        self.levels = force_levels(params.force_bounds)
        self.n_actions = len(self.levels)
        self.episode = None

    @property
    def duration(self) -> float:
        return self.episode.t if self.episode is not None else 0.0

    def _observe(self):
        vec = moment_vector(self.episode.state()).as_array()
        return ((vec - self.obs_shift) * self.obs_scale).astype(np.float32)

    def reset(self, rng):
        self.episode = QuarticEpisode(self.params, rng)
        return self._observe()

    def step(self, action: int):
        res = self.episode.control_step(float(self.levels[action]), discrete=True)
        return self._observe(), reward_quartic(res.energy), self.episode.done


class QuarticWavefunctionEnv(QuarticMomentsEnv):
    """Grid amplitudes with `trim` points dropped at both borders, re/im split.

    The trimmed slice is taken raw, without renormalization.
    """

    def __init__(self, params: QuarticParams, trim: int = 15):
        super().__init__(params)
        self.trim = trim
        self.obs_dim = 2 * (params.n_points - 2 * trim)
        self.obs_scale = np.ones(self.obs_dim)
        self.obs_shift = np.zeros(self.obs_dim)

    def _observe(self):
        amps = self.episode.psi[self.trim : -self.trim]
        return np.concatenate([amps.real, amps.imag]).astype(np.float32)
