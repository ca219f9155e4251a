"""Measurement-feedback control benchmark for a quantum particle in 1D.

Simulates a single particle under continuous position measurement in
quadratic (harmonic / inverted) and quartic potentials, provides the
classical baseline controllers (trajectory-targeting, LQG-derived,
damping, bang-bang) and a self-contained deep Q-learning engine, and
reproduces the reference performance figures at desk scale.

Internally hbar = 1 and all quantities are expressed in the reference
units (m_c, omega_c): positions in sqrt(hbar/(m_c omega_c)), momenta in
sqrt(hbar m_c omega_c), energies in hbar*omega_c.
"""

from qfc.states import (
    GaussianMoments,
    GridState,
    HarmonicBasisState,
    MomentVector,
    Potential,
    energy,
    moment_vector,
    observables,
    phonon_number,
)

__all__ = [
    "GaussianMoments",
    "GridState",
    "HarmonicBasisState",
    "MomentVector",
    "Potential",
    "energy",
    "moment_vector",
    "observables",
    "phonon_number",
]

__version__ = "0.1.0"
