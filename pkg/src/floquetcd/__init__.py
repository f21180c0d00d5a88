"""Counterdiabatic control of periodically driven quantum systems.

The package computes exact and variationally approximated adiabatic gauge
potentials for time-periodic Hamiltonians, evolves states under assisted and
unassisted protocols, and ships the two-level, driven-band and driven
spin-chain reference experiments at desk scale.
"""

from .operators import (
    SIGMA,
    SPIN,
    HarmonicOperator,
    commutator,
    evaluate_at,
    harmonic_commutator,
    harmonic_multiply,
    harmonic_time_derivative,
    trace_pair,
    trace_period_norm,
)
from .pauli import HarmonicPauliSum, PauliStringSpec, PauliSum, pauli_compile

__version__ = "0.1.0"
