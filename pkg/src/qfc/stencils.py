"""9-point central-difference stencils for first and second derivatives.

The coefficients are the standard 8th-order central-difference weights,
so both derivative evaluations are exact on polynomials up to degree 8.
Points beyond the grid ends are treated as zero (Dirichlet padding);
the simulation polices border amplitudes instead of modelling them.
"""

from dataclasses import dataclass

import numpy as np

# offsets -4..+4
D1_COEFFS = np.array(
    [1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280]
)
D2_COEFFS = np.array(
    [-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560]
)
STENCIL_HALF_WIDTH = 4


@dataclass(frozen=True)
class StencilSet:
    """First/second-derivative coefficient vectors for a grid spacing d."""

    d: float

    @property
    def first(self) -> np.ndarray:
        return D1_COEFFS / self.d

    @property
    def second(self) -> np.ndarray:
        return D2_COEFFS / self.d**2


def apply_stencil(values: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Convolve with a centered stencil, zero-padding beyond the ends."""
    n = values.shape[0]
    half = (len(coeffs) - 1) // 2
    padded = np.zeros(n + 2 * half, dtype=values.dtype)
    padded[half : half + n] = values
    out = np.zeros(n, dtype=np.result_type(values.dtype, coeffs.dtype))
    for k, c in enumerate(coeffs):
        if c != 0.0:
            out += c * padded[k : k + n]
    return out


def first_derivative(values: np.ndarray, d: float) -> np.ndarray:
    return apply_stencil(values, D1_COEFFS) / d


def second_derivative(values: np.ndarray, d: float) -> np.ndarray:
    return apply_stencil(values, D2_COEFFS) / d**2
