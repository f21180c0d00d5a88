"""Perturbative counterdiabatic protocols from inverse-frequency expansions.

Models supply the expanded Floquet Hamiltonian ``H_F^(n)(lam)`` and kick
operator ``K^(n)(lam, t)`` explicitly; this module solves the static
variational problem in that frame (``G_F = i[H_F, X_F] - dH_F/dlam``, no
time-derivative term) and lifts the result back to the lab frame with the
order-resolved nested-commutator formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable

import numpy as np

from .operators import HarmonicOperator, commutator, hermitize, is_hermitian
from .variational import (
    AnsatzSpec,
    VariationalSolution,
    assemble_linear_system,
    solve_lambda_grid,
    solve_system,
)

__all__ = [
    "FrameExpansion",
    "validate_frame_expansion",
    "static_floquet_frame_agp",
    "lift_to_lab_frame",
    "ife_solution",
    "StaticFrameModel",
]


@dataclass(frozen=True)
class FrameExpansion:
    """Order-``n`` high-frequency frame data for one model.

    ``hf(lam)`` and ``dhf(lam)`` give the expanded Floquet Hamiltonian and
    its parameter derivative; ``k(lam, t)`` the periodic kick operator with
    zero period average and ``dk(lam, t)`` its parameter derivative.
    """

    order: int
    omega: float
    hf: Callable[[float], np.ndarray]
    dhf: Callable[[float], np.ndarray]
    k: Callable[[float, float], np.ndarray] | None = None
    dk: Callable[[float, float], np.ndarray] | None = None

    @classmethod
    def lowest_order(
        cls, omega: float, hf: Callable[[float], np.ndarray], dhf: Callable[[float], np.ndarray]
    ) -> "FrameExpansion":
        """Order zero: vanishing kick operator."""
        return cls(order=0, omega=omega, hf=hf, dhf=dhf)

    def kick(self, lam: float, t: float) -> np.ndarray:
        if self.k is None:
            dim = self.hf(lam).shape[0]
            return np.zeros((dim, dim), dtype=complex)
        return np.asarray(self.k(lam, t), dtype=complex)

    def dkick(self, lam: float, t: float) -> np.ndarray:
        if self.dk is None:
            dim = self.hf(lam).shape[0]
            return np.zeros((dim, dim), dtype=complex)
        return np.asarray(self.dk(lam, t), dtype=complex)


def validate_frame_expansion(
    expansion: FrameExpansion, lam: float, n_pts: int = 64, tol: float = 1e-10
) -> None:
    """Check Hermiticity of ``H_F`` and the zero period-average of ``K``."""
    if not is_hermitian(expansion.hf(lam), tol=1e-10):
        raise ValueError("expanded Floquet Hamiltonian is not Hermitian")
    period = 2.0 * np.pi / expansion.omega
    avg = np.mean(
        [expansion.kick(lam, t) for t in np.linspace(0, period, n_pts, endpoint=False)],
        axis=0,
    )
    if np.max(np.abs(avg)) > tol * max(1.0, np.max(np.abs(expansion.kick(lam, 0.0)))):
        raise ValueError("kick operator has a non-zero period average")


class StaticFrameModel:
    """Adapter exposing the expanded frame as a static harmonic model."""

    def __init__(self, expansion: FrameExpansion):
        self.expansion = expansion
        self.dim = expansion.hf(0.0).shape[0]

    def hamiltonian(self, lam: float):
        h = HarmonicOperator.from_static(self.expansion.omega, self.expansion.hf(lam))
        dh = HarmonicOperator.from_static(self.expansion.omega, self.expansion.dhf(lam))
        return h, dh


def static_floquet_frame_agp(
    expansion: FrameExpansion, lam: float, ansatz: AnsatzSpec
) -> np.ndarray:
    """Coefficients of the static frame gauge potential at one parameter."""
    if ansatz.max_harmonic() != 0:
        raise ValueError("the frame problem is static; ansatz elements must carry l = 0")
    prob = assemble_linear_system(StaticFrameModel(expansion), lam, ansatz)
    return solve_system(prob)


def ife_solution(
    expansion: FrameExpansion,
    ansatz: AnsatzSpec,
    lambda_range: tuple[float, float],
    eps: float = 1e-6,
    model_meta: dict | None = None,
) -> VariationalSolution:
    """Static frame gauge potential solved over a parameter grid."""
    if ansatz.max_harmonic() != 0:
        raise ValueError("the frame problem is static; ansatz elements must carry l = 0")
    return solve_lambda_grid(
        StaticFrameModel(expansion), ansatz, lambda_range, eps=eps, model_meta=model_meta
    )


def _ad(k: np.ndarray, y: np.ndarray) -> np.ndarray:
    return 1j * commutator(k, y)


def lift_to_lab_frame(
    xf: np.ndarray,
    expansion: FrameExpansion,
    lam: float,
    t: float,
    order: int | None = None,
    ad_cutoff: int | None = None,
) -> np.ndarray:
    """Lab-frame counter-term built from the frame gauge potential.

    Orders 0-2 use the closed expressions of the expansion; higher orders
    fall back to the generic nested-commutator sums
    ``sum_k ad^k(X_F)/k! + sum_k (-1)^k ad^k(dK)/(k+1)!`` truncated at
    ``ad_cutoff`` terms.
    """
    n = expansion.order if order is None else order
    xf = np.asarray(xf, dtype=complex)
    if n == 0:
        return xf
    k = expansion.kick(lam, t)
    dk = expansion.dkick(lam, t)
    if n == 1:
        return hermitize(xf + _ad(k, xf) + dk)
    if n == 2:
        return hermitize(xf + dk + _ad(k, xf - 0.5 * dk) + _ad(k, _ad(k, xf)))
    cutoff = ad_cutoff if ad_cutoff is not None else max(n, 8)
    out = np.zeros_like(xf)
    term = xf.copy()
    for j in range(cutoff + 1):
        if j > 0:
            term = _ad(k, term)
        out = out + term / factorial(j)
    term = dk.copy()
    for j in range(cutoff):
        if j > 0:
            term = _ad(k, term)
        out = out + ((-1.0) ** j / factorial(j + 1)) * term
    return hermitize(out)
