"""Increment statistics, scheme reductions and strong-order convergence."""

import numpy as np
import pytest

from qfc.sde import (
    DriftDiffusionProblem,
    IncrementPair,
    StepFailure,
    sample_increments,
    step_explicit_15,
    step_mixed_implicit_15,
)


def gbm_problem(mu, sigma, linear=False):
    problem = DriftDiffusionProblem(
        drift=lambda y: mu * y,
        diffusion=lambda y: sigma * y,
    )
    if linear:
        problem.linear_apply = lambda y: mu * y
        problem.linear_solve = lambda rhs, dt: rhs / (1 - mu * dt / 2)
    return problem


def zero_linear(problem):
    problem.linear_apply = lambda y: np.zeros_like(y)
    problem.linear_solve = lambda rhs, dt: rhs
    return problem


def test_increment_statistics():
    rng = np.random.default_rng(11)
    dt = 0.01
    n = 1_000_000
    draws = rng.standard_normal((n, 2)) * np.sqrt(dt)
    dw = draws[:, 0]
    dz = 0.5 * dt * (dw + draws[:, 1] / np.sqrt(3))
    assert abs(np.var(dw) / dt - 1) < 0.01
    assert abs(np.var(dz) / (dt**3 / 3) - 1) < 0.02
    assert abs(np.mean(dz * dw) / (dt**2 / 2) - 1) < 0.02
    # the scalar sampler realizes the same construction
    one = sample_increments(np.random.default_rng(0), dt)
    assert isinstance(one, IncrementPair)


def test_increment_covariance_at_larger_dt():
    rng = np.random.default_rng(12)
    dt = 0.1
    n = 1_000_000
    draws = rng.standard_normal((n, 2)) * np.sqrt(dt)
    dw = draws[:, 0]
    dz = 0.5 * dt * (dw + draws[:, 1] / np.sqrt(3))
    assert abs(np.mean(dz * dw) - 5.0e-3) < 0.02 * 5.0e-3


def test_zero_increments_give_zero_dz():
    inc = IncrementPair(dW=0.0, dZ=0.5 * 0.01 * (0.0 + 0.0 / np.sqrt(3)))
    assert inc.dZ == 0.0


def test_deterministic_reduction_matches_exponential():
    # b = 0, a = c y: one step must match exp(c dt) through dt^3
    c = 0.8
    problem = DriftDiffusionProblem(
        drift=lambda y: c * y,
        diffusion=lambda y: np.zeros_like(y),
        linear_apply=lambda y: c * y,
        linear_solve=lambda rhs, dt: rhs / (1 - c * dt / 2),
    )
    y0 = np.array([1.0])
    for dt in (0.1, 0.05, 0.025):
        inc = IncrementPair(0.0, 0.0)
        y1 = step_explicit_15(problem, y0, dt, inc)
        taylor = 1 + c * dt + (c * dt) ** 2 / 2 + (c * dt) ** 3 / 6
        assert abs(y1[0] - taylor) < 1e-3 * dt**3
        # and the deviation from the true exponential is O(dt^4)
        assert abs(y1[0] - np.exp(c * dt)) < (c * dt) ** 4


def test_mixed_equals_explicit_when_linear_part_vanishes():
    rng = np.random.default_rng(3)
    dim = 256
    a_mat = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    b_mat = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    problem = zero_linear(
        DriftDiffusionProblem(
            drift=lambda y: np.tanh(a_mat @ y),
            diffusion=lambda y: 0.3 * np.sin(b_mat @ y),
        )
    )
    y0 = rng.standard_normal(dim)
    inc = sample_increments(rng, 0.01)
    y_exp = step_explicit_15(problem, y0, 0.01, inc)
    y_mix = step_mixed_implicit_15(problem, y0, 0.01, inc)
    assert np.max(np.abs(y_exp - y_mix)) < 1e-12 * np.max(np.abs(y_exp))


def test_crank_nicolson_part_is_unitary():
    rng = np.random.default_rng(4)
    dim = 64
    herm = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    herm = 0.5 * (herm + herm.conj().T)
    eye = np.eye(dim)

    problem = DriftDiffusionProblem(
        drift=lambda y: -1j * (herm @ y),
        diffusion=lambda y: np.zeros_like(y),
        linear_apply=lambda y: -1j * (herm @ y),
        linear_solve=lambda rhs, dt: np.linalg.solve(eye + 0.5j * dt * herm, rhs),
    )
    y0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    y0 /= np.linalg.norm(y0)
    y1 = step_mixed_implicit_15(
        problem, y0, 0.05, IncrementPair(0.0, 0.0), third_order=False
    )
    assert abs(np.linalg.norm(y1) - 1.0) < 1e-12


def test_step_failure_on_nonfinite():
    problem = DriftDiffusionProblem(
        drift=lambda y: y * np.inf,
        diffusion=lambda y: np.zeros_like(y),
    )
    with pytest.raises(StepFailure):
        step_explicit_15(problem, np.array([1.0]), 0.01, IncrementPair(0.0, 0.0))


def _coarsen(dws, dzs, dt):
    """Merge adjacent increment pairs: dW adds, dZ gains the h*dW1 shift."""
    dw2 = dws[0::2] + dws[1::2]
    dz2 = dzs[0::2] + dzs[1::2] + dt * dws[0::2]
    return dw2, dz2


def _gbm_strong_error(stepper, problem, mu, sigma, n_paths=160, seed=21):
    """Strong errors at T=1 for dt = 2^-10 .. 2^-6 on shared Wiener paths."""
    rng = np.random.default_rng(seed)
    levels = 5
    n_fine = 2**10
    dt_fine = 1.0 / n_fine
    errors = np.zeros(levels)
    for _ in range(n_paths):
        draws = rng.standard_normal((n_fine, 2)) * np.sqrt(dt_fine)
        dws = draws[:, 0]
        dzs = 0.5 * dt_fine * (dws + draws[:, 1] / np.sqrt(3))
        w_total = dws.sum()
        exact = np.exp((mu - sigma**2 / 2) * 1.0 + sigma * w_total)
        cur_dw, cur_dz, dt = dws, dzs, dt_fine
        for level in range(levels):
            y = np.array([1.0])
            for k in range(len(cur_dw)):
                y = stepper(problem, y, dt, IncrementPair(cur_dw[k], cur_dz[k]))
            errors[levels - 1 - level] += abs(y[0] - exact)
            if level < levels - 1:
                cur_dw, cur_dz = _coarsen(cur_dw, cur_dz, dt)
                dt *= 2
    return errors / n_paths  # index 0 = coarsest (2^-6)


@pytest.mark.slow
def test_explicit_strong_order_on_gbm():
    problem = zero_linear(gbm_problem(1.5, 0.1))
    errors = _gbm_strong_error(step_explicit_15, problem, 1.5, 0.1)
    dts = 2.0 ** -(np.arange(6, 11))
    slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    assert slope >= 1.4, (slope, errors)


@pytest.mark.slow
def test_mixed_strong_order_on_gbm():
    problem = gbm_problem(1.5, 0.1, linear=True)
    errors = _gbm_strong_error(step_mixed_implicit_15, problem, 1.5, 0.1)
    dts = 2.0 ** -(np.arange(6, 11))
    slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    assert slope >= 1.4, (slope, errors)


def test_ou_one_step_transition_moments():
    # for dY = -theta Y dt + sigma dW the scheme is linear in (1, dW, dZ),
    # so its one-step mean and variance are exact in closed form and must
    # match the OU transition law to O(dt^3)
    theta, sigma = 1.3, 0.4
    problem = DriftDiffusionProblem(
        drift=lambda y: -theta * y,
        diffusion=lambda y: np.full_like(y, sigma),
        linear_apply=lambda y: -theta * y,
        linear_solve=lambda rhs, dt: rhs / (1 + theta * dt / 2),
    )
    y0 = np.array([0.7])
    for stepper in (step_explicit_15, step_mixed_implicit_15):
        for dt in (0.05, 0.025, 0.0125):
            base = stepper(problem, y0, dt, IncrementPair(0.0, 0.0))[0]
            coef_w = stepper(problem, y0, dt, IncrementPair(1.0, 0.0))[0] - base
            coef_z = stepper(problem, y0, dt, IncrementPair(0.0, 1.0))[0] - base
            mean = base
            var = (
                coef_w**2 * dt
                + coef_z**2 * dt**3 / 3
                + 2 * coef_w * coef_z * dt**2 / 2
            )
            exact_mean = y0[0] * np.exp(-theta * dt)
            exact_var = sigma**2 * (1 - np.exp(-2 * theta * dt)) / (2 * theta)
            assert abs(mean - exact_mean) < 2 * theta**4 * dt**4 * abs(y0[0])
            assert abs(var - exact_var) < 2 * sigma**2 * theta**2 * dt**3


def test_determinism_per_seed():
    problem = zero_linear(gbm_problem(0.5, 0.2))
    outs = []
    for _ in range(2):
        rng = np.random.default_rng(99)
        y = np.array([1.0])
        for _ in range(50):
            y = step_explicit_15(problem, y, 0.01, sample_increments(rng, 0.01))
        outs.append(y[0])
    assert outs[0] == outs[1]


def test_euler_maruyama_agreement_at_small_dt():
    # on a fixed Wiener path the one-step deviation from Euler-Maruyama
    # is dominated by the Milstein term (1/2) b b' (dW^2 - dt) = O(dt)
    problem = zero_linear(
        DriftDiffusionProblem(
            drift=lambda y: np.sin(y),
            diffusion=lambda y: 0.5 * np.cos(y),
        )
    )
    y0 = np.array([0.3])
    rng = np.random.default_rng(8)
    z = rng.standard_normal()
    chi = rng.standard_normal()
    diffs = []
    dts = [1e-2, 1e-3, 1e-4]
    for dt in dts:
        dw = z * np.sqrt(dt)
        dz = 0.5 * dt * (dw + chi * np.sqrt(dt) / np.sqrt(3))
        inc = IncrementPair(dw, dz)
        em = y0 + np.sin(y0) * dt + 0.5 * np.cos(y0) * dw
        for stepper in (step_explicit_15, step_mixed_implicit_15):
            y1 = stepper(problem, y0, dt, inc)
            diffs.append(abs(y1[0] - em[0]))
    explicit, mixed = diffs[0::2], diffs[1::2]
    for seq in (explicit, mixed):
        for i in range(2):
            assert seq[i] / seq[i + 1] > 8.0, seq  # ~x10 per decade of dt
