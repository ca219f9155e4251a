"""Fast invariant suite behind the `selftest` CLI subcommand."""

import os
import tempfile

import numpy as np

from qfc import controllers as ctl
from qfc import gaussian_model as gm
from qfc import quartic as qt
from qfc import riccati as ric
from qfc import sde
from qfc.dqn.checkpoint import load_checkpoint, save_checkpoint
from qfc.dqn.loss import huber
from qfc.dqn.replay import SumTree
from qfc.oscillator import build_operators, cooling_params
from qfc.states import GaussianMoments, HarmonicBasisState, observables
from qfc.stencils import second_derivative


def _checks():
    rng = np.random.default_rng(2024)

    def steady_is_fixed_point():
        for k, g in ((np.pi, np.pi), (-np.pi, 2 * np.pi)):
            m = 1 / np.pi
            vx, vp, c = gm.steady_covariances(k, m, g, 1.0)
            assert abs(2 * c / m - 2 * g * vx**2) < 1e-10
            assert abs(-2 * k * c - 2 * g * c**2 + g / 2) < 1e-10
            assert abs(vp / m - k * vx - 2 * g * vx * c) < 1e-10
            assert abs(vx * vp - c * c - 0.25) < 1e-9

    def increment_moments():
        n = 200_000
        dt = 0.01
        incs = [sde.sample_increments(rng, dt) for _ in range(n)]
        dw = np.array([i.dW for i in incs])
        dz = np.array([i.dZ for i in incs])
        assert abs(np.var(dw) / dt - 1) < 0.05
        assert abs(np.var(dz) / (dt**3 / 3) - 1) < 0.05
        assert abs(np.mean(dz * dw) / (dt**2 / 2) - 1) < 0.05

    def stencil_exactness():
        x = np.arange(-3, 3.001, 0.1)
        err = np.max(np.abs(second_derivative(x**4 + 0j, 0.1)[4:-4] - 12 * x[4:-4] ** 2))
        assert err < 1e-9

    def riccati_scalars():
        p = ric.solve_care(ric.RiccatiProblem(F=0.0, G=1.0, R=1.0, Q=1.0))
        assert abs(p[0, 0] - 1.0) < 1e-10
        p = ric.solve_care(ric.RiccatiProblem(F=1.0, G=1.0, R=1.0, Q=0.0))
        assert abs(p[0, 0] - 2.0) < 1e-10
        s = ric.solve_dare(ric.RiccatiProblem(F=1.0, G=1.0, R=1.0, Q=1.0))
        assert abs(s[0, 0] - (1 + np.sqrt(5)) / 2) < 1e-10

    def force_grid():
        bounds = (-5 * np.pi, 5 * np.pi)
        assert abs(ctl.clip_discretize(0.8, bounds) - np.pi / 2) < 1e-12
        assert ctl.clip_discretize(100.0, bounds) == 5 * np.pi
        assert ctl.clip_discretize(np.pi / 4, bounds) == 0.0
        for f in ctl.force_levels(bounds):
            assert ctl.clip_discretize(f, bounds) == f
        assert ctl.bang_bang(0.0, bounds) == 5 * np.pi

    def huber_values():
        assert abs(huber(0.01) - 5e-5) < 1e-12
        assert abs(huber(2.0) - 1.5) < 1e-12

    def sum_tree():
        tree = SumTree(4)
        for i, p in enumerate([1.0, 2.0, 3.0, 4.0]):
            tree.update(i, p)
        assert tree.sample(6.5) == 3
        tree.update(0, 5.0)
        assert abs(tree.total - 14.0) < 1e-12
        assert tree.consistency_error() < 1e-12

    def checkpoint_roundtrip():
        arrays = {"a/v": rng.standard_normal((3, 2)).astype(np.float32)}
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "x.ckpt")
            save_checkpoint(path, arrays)
            loaded = load_checkpoint(path)
        assert np.array_equal(arrays["a/v"], loaded["a/v"])

    def trajectory_force_shape():
        k, m, tau = np.pi, 1 / np.pi, 1 / 18
        zero = ctl.trajectory_force(GaussianMoments(0, 0, 1, 1, 0), k, m, tau)
        assert abs(zero) < 1e-12
        f1 = ctl.trajectory_force(GaussianMoments(0.3, -0.7, 1, 1, 0), k, m, tau)
        f2 = ctl.trajectory_force(GaussianMoments(-0.3, 0.7, 1, 1, 0), k, m, tau)
        assert abs(f1 + f2) < 1e-12

    def ground_state_moments():
        params = cooling_params()
        amps = np.zeros(params.n_max + 1, dtype=complex)
        amps[0] = 1.0
        mom = observables(HarmonicBasisState(amps, params.m, params.omega))
        assert np.allclose(
            mom.as_array(), [0.0, 0.0, 0.5, 0.5, 0.0], atol=1e-12
        )
        ops = build_operators(params)
        assert abs(ops["x"][0, 1] - np.sqrt(0.5)) < 1e-12

    def quartic_ground_energy():
        e0, _ = qt.ground_state(qt.quartic_params())
        assert abs(e0 - 0.7177) < 1e-3

    return [
        ("steady covariances are the covariance-flow fixed point", steady_is_fixed_point),
        ("increment pair has the stated covariance structure", increment_moments),
        ("9-point stencil is exact on degree-8 polynomials", stencil_exactness),
        ("CARE/DARE scalar cases", riccati_scalars),
        ("force clipping, discretization and tie rules", force_grid),
        ("Huber loss values", huber_values),
        ("sum tree sampling and updates", sum_tree),
        ("checkpoint round trip", checkpoint_roundtrip),
        ("trajectory force fixed point and antisymmetry", trajectory_force_shape),
        ("harmonic ground-state observables and ladder element", ground_state_moments),
        ("quartic ground-state energy", quartic_ground_energy),
    ]


def run_selftest(verbose: bool = True) -> bool:
    ok = True
    for name, check in _checks():
        try:
            check()
        except AssertionError:
            ok = False
            status = "FAIL"
        else:
            status = "PASS"
        if verbose:
            print(f"{status}  {name}")
    return ok
