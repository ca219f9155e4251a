"""State representations and extraction of physical observables.

Two wavefunction representations are used:

* ``HarmonicBasisState`` -- amplitudes on the energy eigenbasis of the
  reference harmonic oscillator (1/2)|k| x^2, used for the quadratic
  potential simulations.
* ``GridState`` -- amplitudes on a uniform spatial grid, used for the
  quartic FDTD simulation.

All extractions are read-only and require a normalized state.  Momentum
on grids is evaluated with the 9-point finite-difference stencil; on the
eigenbasis the exact ladder algebra is used.  Mixed position/momentum
moments are Weyl (symmetrically) ordered, realized as the average of
operator products over all orderings.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
import warnings

import numpy as np

from qfc.stencils import first_derivative, second_derivative

HBAR = 1.0

NORM_TOL = 1e-6


class NotNormalizedError(ValueError):
    """State norm deviates from 1 beyond the extraction tolerance."""


class UnreliableEnergyWarning(UserWarning):
    """Grid-state energy computed with significant border amplitude."""


@dataclass
class HarmonicBasisState:
    """Wavefunction on the truncated harmonic eigenbasis n = 0..n_max."""

    amplitudes: np.ndarray
    m: float
    omega: float

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)

    @property
    def n_max(self) -> int:
        return len(self.amplitudes) - 1

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def normalized(self) -> "HarmonicBasisState":
        return HarmonicBasisState(self.amplitudes / self.norm(), self.m, self.omega)


@dataclass
class GridState:
    """Wavefunction sampled on a uniform spatial grid."""

    amplitudes: np.ndarray
    x: np.ndarray
    m: float

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        self.x = np.asarray(self.x, dtype=np.float64)

    @property
    def d(self) -> float:
        return float(self.x[1] - self.x[0])

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.d))

    def normalized(self) -> "GridState":
        return GridState(self.amplitudes / self.norm(), self.x, self.m)


@dataclass(frozen=True)
class GaussianMoments:
    """First and second phase-space moments (cov_c symmetrically ordered)."""

    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_c: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mean_x, self.mean_p, self.var_x, self.var_p, self.cov_c]
        )

    def uncertainty_product(self) -> float:
        """var_x*var_p - cov_c^2, >= hbar^2/4 for physical states."""
        return self.var_x * self.var_p - self.cov_c**2


# layout of the 20-value moment vector: means, then central moments of
# total degree 2..5; within a degree the position power decreases.
MOMENT_LABELS = (
    "mean_x", "mean_p",
    "m20", "m11", "m02",
    "m30", "m21", "m12", "m03",
    "m40", "m31", "m22", "m13", "m04",
    "m50", "m41", "m32", "m23", "m14", "m05",
)


@dataclass(frozen=True)
class MomentVector:
    """Phase-space central moments up to fifth order (20 values)."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.values) != len(MOMENT_LABELS):
            raise ValueError(f"expected {len(MOMENT_LABELS)} moments")

    def __getitem__(self, label: str) -> float:
        return float(self.values[MOMENT_LABELS.index(label)])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


@dataclass(frozen=True)
class Potential:
    """1D potential: 'quadratic' V = (strength/2) x^2, 'quartic' V = strength x^4."""

    kind: str
    strength: float

    def values(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "quadratic":
            return 0.5 * self.strength * x**2
        if self.kind == "quartic":
            return self.strength * x**4
        raise ValueError(f"unknown potential kind {self.kind!r}")


def _require_normalized(state) -> None:
    if abs(state.norm() - 1.0) > NORM_TOL:
        raise NotNormalizedError(
            f"state norm {state.norm():.9f} deviates from 1 by more than {NORM_TOL}"
        )


@lru_cache(maxsize=8)
def ladder_matrices(n_max: int, m: float, omega: float):
    """Dense x, p, x^2, p^2, sym(xp) and number matrices on the basis.

    x = sqrt(hbar/(2 m omega)) (adag + a),  p = i sqrt(hbar m omega / 2) (adag - a).
    """
    n = np.arange(n_max + 1)
    a = np.zeros((n_max + 1, n_max + 1), dtype=np.complex128)
    a[n[:-1], n[:-1] + 1] = np.sqrt(n[1:])
    adag = a.conj().T
    lx = np.sqrt(HBAR / (2 * m * omega))
    lp = np.sqrt(HBAR * m * omega / 2)
    x = lx * (adag + a)
    p = 1j * lp * (adag - a)
    x2 = x @ x
    p2 = p @ p
    xp_sym = 0.5 * (x @ p + p @ x)
    number = np.diag(n.astype(np.complex128))
    return {"x": x, "p": p, "x2": x2, "p2": p2, "xp_sym": xp_sym, "n": number}


def _grid_expect(psi: np.ndarray, op_psi: np.ndarray, d: float) -> float:
    return float(np.real(np.vdot(psi, op_psi)) * d)


def observables(state) -> GaussianMoments:
    """Extract (mean_x, mean_p, var_x, var_p, cov_c) from a wavefunction."""
    _require_normalized(state)
    if isinstance(state, HarmonicBasisState):
        ops = ladder_matrices(state.n_max, state.m, state.omega)
        c = state.amplitudes
        ex = float(np.real(np.vdot(c, ops["x"] @ c)))
        ep = float(np.real(np.vdot(c, ops["p"] @ c)))
        ex2 = float(np.real(np.vdot(c, ops["x2"] @ c)))
        ep2 = float(np.real(np.vdot(c, ops["p2"] @ c)))
        exp_sym = float(np.real(np.vdot(c, ops["xp_sym"] @ c)))
    else:
        psi, xg, d = state.amplitudes, state.x, state.d
        dens = np.abs(psi) ** 2
        ex = float(np.sum(xg * dens) * d)
        ex2 = float(np.sum(xg**2 * dens) * d)
        ppsi = -1j * HBAR * first_derivative(psi, d)
        p2psi = -(HBAR**2) * second_derivative(psi, d)
        ep = _grid_expect(psi, ppsi, d)
        ep2 = _grid_expect(psi, p2psi, d)
        # (xp)^dag = px, so Re<x p> is exactly the symmetrized <(xp+px)/2>
        exp_sym = _grid_expect(psi, xg * ppsi, d)
    return GaussianMoments(
        mean_x=ex,
        mean_p=ep,
        var_x=ex2 - ex**2,
        var_p=ep2 - ep**2,
        cov_c=exp_sym - ex * ep,
    )


def _central_appliers(state):
    """Return (apply_xc, apply_pc, expect) closures for centered operators."""
    mom = observables(state)
    if isinstance(state, HarmonicBasisState):
        ops = ladder_matrices(state.n_max, state.m, state.omega)
        xmat, pmat = ops["x"], ops["p"]

        def apply_xc(v):
            return xmat @ v - mom.mean_x * v

        def apply_pc(v):
            return pmat @ v - mom.mean_p * v

        def expect(v):
            return complex(np.vdot(state.amplitudes, v))

    else:
        xg, d = state.x, state.d

        def apply_xc(v):
            return (xg - mom.mean_x) * v

        def apply_pc(v):
            return -1j * HBAR * first_derivative(v, d) - mom.mean_p * v

        def expect(v):
            return complex(np.vdot(state.amplitudes, v) * d)

    return apply_xc, apply_pc, expect, mom


def weyl_central_moment(state, x_power: int, p_power: int) -> float:
    """Weyl-ordered central moment <sym((x-<x>)^j (p-<p>)^k)>.

    Averages the operator product over all distinct orderings of the
    factors; for (j,k) = (2,1) and (1,2) this reproduces the operator
    strings x~ p~ x~ and p~ x~ p~.
    """
    apply_xc, apply_pc, expect, _ = _central_appliers(state)
    orderings = set(permutations("x" * x_power + "p" * p_power))
    total = 0.0 + 0.0j
    for order in orderings:
        v = state.amplitudes
        for sym in reversed(order):
            v = apply_xc(v) if sym == "x" else apply_pc(v)
        total += expect(v)
    return float(np.real(total / len(orderings)))


def moment_vector(state) -> MomentVector:
    """The 20 phase-space moments up to fifth order (Weyl ordering)."""
    _require_normalized(state)
    mom = observables(state)
    values = [mom.mean_x, mom.mean_p]
    for degree in range(2, 6):
        for k in range(degree + 1):
            values.append(weyl_central_moment(state, degree - k, k))
    return MomentVector(np.array(values))


def phonon_number(state: HarmonicBasisState) -> float:
    """Expected excitation count sum_n n |c_n|^2."""
    _require_normalized(state)
    n = np.arange(state.n_max + 1)
    return float(np.sum(n * np.abs(state.amplitudes) ** 2))


def energy(state: GridState, potential: Potential, border_tol: float = 1e-3) -> float:
    """<p^2/2m + V(x)> on the grid, in units of hbar*omega_c.

    Warns when the outermost stencil-support points carry amplitude
    above ``border_tol``: the kinetic term is then unreliable.
    """
    _require_normalized(state)
    psi, xg, d = state.amplitudes, state.x, state.d
    border = max(np.max(np.abs(psi[:4])), np.max(np.abs(psi[-4:])))
    if border > border_tol:
        warnings.warn(
            f"border amplitude {border:.2e} exceeds {border_tol:.0e}; "
            "energy may be unreliable",
            UnreliableEnergyWarning,
        )
    kin = -(HBAR**2) / (2 * state.m) * np.real(
        np.vdot(psi, second_derivative(psi, d)) * d
    )
    pot = float(np.sum(potential.values(xg) * np.abs(psi) ** 2) * d)
    return float(kin + pot)


def hermite_functions(n_max: int, x: np.ndarray, m: float, omega: float) -> np.ndarray:
    """Harmonic eigenfunctions phi_0..phi_n_max evaluated at points x.

    Stable upward recurrence on the normalized functions:
    phi_{n+1} = sqrt(2/(n+1)) xi phi_n - sqrt(n/(n+1)) phi_{n-1}.
    """
    s = np.sqrt(m * omega / HBAR)
    xi = s * np.asarray(x, dtype=np.float64)
    out = np.zeros((n_max + 1, len(xi)))
    out[0] = np.sqrt(s) * np.pi**-0.25 * np.exp(-(xi**2) / 2)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * xi * out[0]
    for n in range(1, n_max):
        out[n + 1] = (
            np.sqrt(2.0 / (n + 1)) * xi * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
        )
    return out


def grid_from_basis(state: HarmonicBasisState, x: np.ndarray) -> GridState:
    """Resample an eigenbasis state onto a spatial grid."""
    phi = hermite_functions(state.n_max, x, state.m, state.omega)
    psi = state.amplitudes @ phi.astype(np.complex128)
    return GridState(psi, np.asarray(x, dtype=np.float64), state.m)


def basis_from_grid(state: GridState, n_max: int, omega: float) -> HarmonicBasisState:
    """Project a grid state onto the harmonic eigenbasis by quadrature."""
    phi = hermite_functions(n_max, state.x, state.m, omega)
    coeffs = phi @ state.amplitudes * state.d
    return HarmonicBasisState(coeffs, state.m, omega)
