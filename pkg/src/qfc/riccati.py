"""Algebraic Riccati equations for linear-quadratic-Gaussian synthesis.

For the plant dx = Fx dt + Gu dt with cost integrand u'Ru + x'Qx, the
infinite-horizon optimal feedback is u = -K x with K = R^{-1} G' P and P
the stabilizing solution of the CARE

    P F + F' P - P G R^{-1} G' P + Q = 0.

The CARE is solved from the stable invariant subspace of the associated
Hamiltonian matrix; the DARE by fixed-point iteration (value iteration)
with re-symmetrization each sweep.  Additive Gaussian noise does not
enter either equation, so the synthesized gain is noise-independent.
"""

from dataclasses import dataclass, field

import numpy as np


class RiccatiError(RuntimeError):
    """No stabilizing solution was found."""


def _as_matrix(a) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(a, dtype=np.float64))
    return arr


@dataclass
class RiccatiProblem:
    """Matrices (F, G, R, Q, A) of one linear-quadratic problem."""

    F: np.ndarray
    G: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    A: np.ndarray = None

    def __post_init__(self):
        self.F = _as_matrix(self.F)
        self.G = _as_matrix(self.G)
        self.R = _as_matrix(self.R)
        self.Q = _as_matrix(self.Q)
        self.A = _as_matrix(self.A) if self.A is not None else np.zeros_like(self.Q)
        n = self.F.shape[0]
        if self.F.shape != (n, n) or self.G.shape[0] != n:
            raise ValueError("inconsistent F/G dimensions")
        for name, mat in (("R", self.R), ("Q", self.Q), ("A", self.A)):
            if not np.allclose(mat, mat.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
        if np.min(np.linalg.eigvalsh(self.R)) <= 0:
            raise ValueError("R must be positive definite")


@dataclass(frozen=True)
class LinearGain:
    """Feedback law u = -K x."""

    K: np.ndarray = field(repr=False)

    def force(self, x: np.ndarray) -> np.ndarray:
        return -self.K @ np.atleast_1d(x)


def care_residual(problem: RiccatiProblem, P: np.ndarray) -> float:
    F, G, R, Q = problem.F, problem.G, problem.R, problem.Q
    res = P @ F + F.T @ P - P @ G @ np.linalg.solve(R, G.T @ P) + Q
    return float(np.max(np.abs(res)))


def _lyapunov_solve(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Solve a' X + X a = -w (row-major vectorization, small systems)."""
    n = a.shape[0]
    eye = np.eye(n)
    lhs = np.kron(a.T, eye) + np.kron(eye, a.T)
    x = np.linalg.solve(lhs, -w.reshape(-1)).reshape(n, n)
    return 0.5 * (x + x.T)


def solve_care(problem: RiccatiProblem) -> np.ndarray:
    """Stabilizing P >= 0 via the Hamiltonian matrix's stable subspace.

    The subspace solution is polished with Kleinman-Newton steps
    (a Lyapunov solve per step) until the residual is at rounding level.
    """
    F, G, R, Q = problem.F, problem.G, problem.R, problem.Q
    n = F.shape[0]
    GRG = G @ np.linalg.solve(R, G.T)
    ham = np.block([[F, -GRG], [-Q, -F.T]])
    eigvals, eigvecs = np.linalg.eig(ham)
    stable = np.real(eigvals) < 0
    if np.count_nonzero(stable) != n:
        raise RiccatiError(
            f"Hamiltonian matrix has {np.count_nonzero(stable)} stable "
            f"eigenvalues, expected {n}; (F, G) may not be stabilizable"
        )
    basis = eigvecs[:, stable]
    x1, x2 = basis[:n], basis[n:]
    try:
        P = np.real(x2 @ np.linalg.inv(x1))
    except np.linalg.LinAlgError as exc:
        raise RiccatiError("stable subspace is not a graph over the state") from exc
    P = 0.5 * (P + P.T)
    for _ in range(20):
        if care_residual(problem, P) < 1e-13:
            break
        K = np.linalg.solve(R, G.T @ P)
        P = _lyapunov_solve(F - G @ K, Q + K.T @ R @ K)
    if care_residual(problem, P) > 1e-10:
        raise RiccatiError("CARE residual too large; solution rejected")
    closed = np.linalg.eigvals(F - G @ np.linalg.solve(R, G.T @ P))
    if np.max(np.real(closed)) >= 0:
        raise RiccatiError("computed P is not stabilizing")
    return P


def dare_residual(problem: RiccatiProblem, S: np.ndarray) -> float:
    F, G, R, Q = problem.F, problem.G, problem.R, problem.Q
    inner = S - S @ G @ np.linalg.solve(G.T @ S @ G + R, G.T @ S)
    return float(np.max(np.abs(F.T @ inner @ F + Q - S)))


def solve_dare(
    problem: RiccatiProblem, tol: float = 1e-14, max_iter: int = 200_000
) -> np.ndarray:
    """Fixed-point solution of the DARE, symmetrized each sweep."""
    F, G, R, Q = problem.F, problem.G, problem.R, problem.Q
    S = Q.copy()
    for _ in range(max_iter):
        gain = np.linalg.solve(G.T @ S @ G + R, G.T @ S @ F)
        S_next = F.T @ S @ (F - G @ gain) + Q
        S_next = 0.5 * (S_next + S_next.T)
        converged = np.max(np.abs(S_next - S)) < tol * max(1.0, np.max(np.abs(S_next)))
        S = S_next
        if converged:
            break
    if dare_residual(problem, S) > 1e-10:
        raise RiccatiError("DARE residual too large; iteration did not converge")
    return S


def care_gain(problem: RiccatiProblem) -> LinearGain:
    P = solve_care(problem)
    return LinearGain(K=np.linalg.solve(problem.R, problem.G.T @ P))


def riccati_ode(
    problem: RiccatiProblem, horizon: float, n_steps: int = 2000
) -> np.ndarray:
    """Integrate the finite-horizon Riccati ODE -dP/dt = PF + F'P - PGR^-1G'P + Q
    backwards from P(T) = A; returns P(0).  Test utility only: the
    controllers use the infinite-horizon solutions.
    """
    F, G, R, Q = problem.F, problem.G, problem.R, problem.Q
    GRG = G @ np.linalg.solve(R, G.T)

    def rate(P):
        return P @ F + F.T @ P - P @ GRG @ P + Q

    P = problem.A.copy()
    h = horizon / n_steps
    for _ in range(n_steps):
        k1 = rate(P)
        k2 = rate(P + 0.5 * h * k1)
        k3 = rate(P + 0.5 * h * k2)
        k4 = rate(P + h * k3)
        P = P + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        P = 0.5 * (P + P.T)
    return P
