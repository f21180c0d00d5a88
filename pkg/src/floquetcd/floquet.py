"""Floquet decompositions, micromotion and the exact gauge-potential oracle.

All quantities follow the convention ``U(t, 0) = P(t) exp(-i t H_F)`` with a
periodic micromotion unitary ``P(0) = P(T) = 1`` and quasi-energies folded to
``(-omega/2, omega/2]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .operators import HarmonicOperator, dagger, fit_harmonics, hermitize

__all__ = [
    "FloquetDecomposition",
    "TrackedState",
    "OracleDegeneracyError",
    "TrackingError",
    "propagate_one_period",
    "floquet_decompose",
    "micromotion_at",
    "track_eigenstate",
    "exact_fagp_oracle",
    "oracle_harmonics",
    "decompose_model",
]

UNITARITY_TOL = 1e-10


class OracleDegeneracyError(RuntimeError):
    """Raised when quasi-energy degeneracies defeat gauge alignment."""


class TrackingError(RuntimeError):
    """Raised when eigenstate tracking between parameter nodes is ambiguous."""


def _expm_hermitian(h: np.ndarray, scale: complex) -> np.ndarray:
    """``exp(scale * h)`` for Hermitian ``h`` via eigendecomposition.

    2x2 inputs use the closed Pauli form, larger ones ``eigh``.
    """
    if h.shape[0] == 2:
        a = 0.5 * (h[0, 0] + h[1, 1])
        vz = 0.5 * (h[0, 0] - h[1, 1])
        vx, vy = h[1, 0].real, h[1, 0].imag
        r = np.sqrt(vx * vx + vy * vy + (vz * vz).real)
        if r < 1e-300:
            return np.exp(scale * a) * np.eye(2, dtype=complex)
        c, s = np.cosh(scale * r), np.sinh(scale * r) / r
        e = np.exp(scale * a)
        return e * np.array(
            [[c + s * vz, s * (vx - 1j * vy)], [s * (vx + 1j * vy), c - s * vz]],
            dtype=complex,
        )
    evals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(scale * evals)) @ dagger(vecs)


_GAUSS_OFFSET = np.sqrt(3.0) / 6.0


def _propagate(
    h: Callable[[float], np.ndarray],
    t_final: float,
    steps: int,
    snapshots: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Time-ordered propagator built from fourth-order Magnus steps.

    Each step uses the two-point Gauss rule
    ``exp(-i dt (H1+H2)/2 - dt^2 sqrt(3)/12 [H2, H1])``; every factor is the
    exponential of an (anti-)Hermitian generator, so the product is unitary
    to rounding.
    """
    dim = np.asarray(h(0.0)).shape[0]
    u = np.eye(dim, dtype=complex)

    def advance(u0: np.ndarray, t0: float, t1: float, n: int) -> np.ndarray:
        dt = (t1 - t0) / n
        c = dt * dt * np.sqrt(3.0) / 12.0
        u_loc = u0
        for k in range(n):
            tk = t0 + k * dt
            h1 = np.asarray(h(tk + (0.5 - _GAUSS_OFFSET) * dt), dtype=complex)
            h2 = np.asarray(h(tk + (0.5 + _GAUSS_OFFSET) * dt), dtype=complex)
            if not np.all(np.isfinite(h1.view(float))) or not np.all(
                np.isfinite(h2.view(float))
            ):
                raise ValueError("non-finite Hamiltonian sample during propagation")
            gen = 0.5 * dt * (h1 + h2) - 1j * c * (h2 @ h1 - h1 @ h2)
            u_loc = _expm_hermitian(gen, -1j) @ u_loc
        return u_loc

    if snapshots is None:
        return advance(u, 0.0, t_final, steps), None
    marks = np.asarray(snapshots, dtype=float)
    if np.any(marks < -1e-12) or np.any(marks > t_final * (1 + 1e-12)):
        raise ValueError("snapshot times must lie inside the propagation window")
    stored = np.empty((len(marks), dim, dim), dtype=complex)
    order = np.argsort(marks)
    t_prev = 0.0
    for j in order:
        t_next = marks[j]
        if t_next > t_prev + 1e-15 * max(t_final, 1.0):
            n = max(1, int(np.ceil(steps * (t_next - t_prev) / t_final)))
            u = advance(u, t_prev, t_next, n)
            t_prev = t_next
        stored[j] = u
    if t_prev < t_final:
        n = max(1, int(np.ceil(steps * (t_final - t_prev) / t_final)))
        u = advance(u, t_prev, t_final, n)
    return u, stored


def propagate_one_period(
    h: Callable[[float], np.ndarray],
    omega: float,
    steps: int = 128,
    tol: float = UNITARITY_TOL,
    max_doublings: int = 14,
    snapshots: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """One-period propagator ``U(T, 0)`` with Richardson step control.

    The step count doubles until the operator max-norm change falls below
    ``tol``.  Optionally stores ``U(t, 0)`` at the requested snapshot times
    (which must divide the period evenly).

    Returns:
        ``(U(T,0), snapshots_or_None)``.
    """
    if steps < 100:
        steps = 100
    period = 2.0 * np.pi / omega
    u_prev, _ = _propagate(h, period, steps)
    for _ in range(max_doublings):
        steps *= 2
        u_next, stored = _propagate(h, period, steps, snapshots)
        if np.max(np.abs(u_next - u_prev)) < tol:
            return u_next, stored
        u_prev = u_next
    raise RuntimeError("one-period propagator did not converge under step doubling")


@dataclass(frozen=True)
class FloquetDecomposition:
    """Spectral data of one drive period at fixed parameters."""

    omega: float
    u_period: np.ndarray
    hf: np.ndarray
    quasi_energies: np.ndarray
    eigvecs: np.ndarray
    micromotion_times: np.ndarray
    micromotion: np.ndarray

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def validate(self, tol: float = 1e-8) -> None:
        dim = self.u_period.shape[0]
        eye = np.eye(dim)
        if np.max(np.abs(dagger(self.u_period) @ self.u_period - eye)) > 1e-10:
            raise ValueError("one-period propagator is not unitary")
        rebuilt = _expm_hermitian(self.hf, -1j * self.period)
        if np.max(np.abs(rebuilt - self.u_period)) > tol:
            raise ValueError("exp(-iT H_F) does not reproduce U(T,0)")
        half = 0.5 * self.omega
        if np.any(self.quasi_energies <= -half - 1e-12) or np.any(
            self.quasi_energies > half + 1e-12
        ):
            raise ValueError("quasi-energies escape the folding window")
        for t, p in ((self.micromotion_times[0], self.micromotion[0]),):
            if abs(t) < 1e-12 and np.max(np.abs(p - eye)) > tol:
                raise ValueError("P(0) is not the identity")


def fold_quasi_energy(eps: np.ndarray | float, omega: float) -> np.ndarray | float:
    """Fold into ``(-omega/2, omega/2]``."""
    out = np.mod(np.asarray(eps) + 0.5 * omega, omega) - 0.5 * omega
    return np.where(out <= -0.5 * omega + 1e-15 * omega, out + omega, out)


def _eig_unitary(u: np.ndarray, cluster_tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases and orthonormal eigenvectors of a (normal) unitary."""
    evals, vecs = np.linalg.eig(u)
    phases = np.angle(evals)
    order = np.argsort(phases)
    phases, vecs = phases[order], vecs[:, order]
    # re-orthonormalize within (near-)degenerate clusters
    start = 0
    n = len(phases)
    while start < n:
        stop = start + 1
        while stop < n and abs(phases[stop] - phases[stop - 1]) < cluster_tol:
            stop += 1
        if stop - start > 1:
            q, _ = np.linalg.qr(vecs[:, start:stop])
            vecs[:, start:stop] = q
        else:
            vecs[:, start] /= np.linalg.norm(vecs[:, start])
        start = stop
    return phases, vecs


def floquet_decompose(
    u: np.ndarray,
    omega: float,
    branch_shifts: Sequence[int] | None = None,
    micromotion_times: np.ndarray | None = None,
    micromotion: np.ndarray | None = None,
    unitarity_tol: float = 1e-8,
) -> FloquetDecomposition:
    """Diagonalize a one-period propagator into Floquet data.

    Eigenphases ``theta_n`` of ``u`` map to quasi-energies
    ``eps_n = -theta_n / T`` folded into ``(-omega/2, omega/2]``;
    ``branch_shifts`` adds ``n*omega`` to selected branches after folding.
    """
    u = np.asarray(u, dtype=complex)
    dim = u.shape[0]
    defect = np.max(np.abs(dagger(u) @ u - np.eye(dim)))
    if defect > unitarity_tol:
        raise ValueError(f"input is not unitary (defect {defect:.2e})")
    period = 2.0 * np.pi / omega
    thetas, vecs = _eig_unitary(u)
    eps = fold_quasi_energy(-thetas / period, omega)
    order = np.argsort(eps)
    eps, vecs = eps[order], vecs[:, order]
    if branch_shifts is not None:
        eps = eps + omega * np.asarray(branch_shifts, dtype=float)
    hf = hermitize((vecs * eps) @ dagger(vecs))
    if micromotion_times is None:
        micromotion_times = np.array([0.0])
        micromotion = np.eye(dim, dtype=complex)[None, :, :]
    return FloquetDecomposition(
        omega=omega,
        u_period=u,
        hf=hf,
        quasi_energies=eps,
        eigvecs=vecs,
        micromotion_times=np.asarray(micromotion_times, dtype=float),
        micromotion=np.asarray(micromotion, dtype=complex),
    )


def decompose_model(
    h_harm: HarmonicOperator,
    n_micromotion: int = 0,
    steps: int = 128,
    branch_shifts: Sequence[int] | None = None,
) -> FloquetDecomposition:
    """Propagate one period of a harmonic Hamiltonian and diagonalize it."""
    omega = h_harm.omega
    period = 2.0 * np.pi / omega
    times = (
        np.linspace(0.0, period, n_micromotion, endpoint=False)
        if n_micromotion
        else None
    )
    u, stored = propagate_one_period(h_harm.evaluate, omega, steps=steps, snapshots=times)
    dec = floquet_decompose(u, omega, branch_shifts=branch_shifts)
    if stored is None:
        return dec
    # micromotion P(t) = U(t,0) exp(+i t H_F)
    eps = dec.quasi_energies
    w = dec.eigvecs
    phases = np.exp(1j * np.multiply.outer(times, eps))
    p = np.einsum("tij,jk,tk,lk->til", stored, w, phases, np.conj(w), optimize=True)
    return FloquetDecomposition(
        omega=omega,
        u_period=dec.u_period,
        hf=dec.hf,
        quasi_energies=eps,
        eigvecs=w,
        micromotion_times=times,
        micromotion=p,
    )


def micromotion_at(
    decomp: FloquetDecomposition,
    h: Callable[[float], np.ndarray],
    t: float,
    steps: int = 128,
) -> np.ndarray:
    """``P(t) = U(t, 0) exp(+i t H_F)`` recomputed at an arbitrary ``t``."""
    if t < 0.0 or t > decomp.period + 1e-12:
        raise ValueError("t must lie within one period")
    if t == 0.0:
        return np.eye(decomp.u_period.shape[0], dtype=complex)
    frac = t / decomp.period
    n = max(100, int(np.ceil(steps * frac)))
    u_t, _ = _propagate(h, t, n)
    u_prev = u_t
    for _ in range(12):
        n *= 2
        u_t, _ = _propagate(h, t, n)
        if np.max(np.abs(u_t - u_prev)) < 1e-10:
            break
        u_prev = u_t
    return u_t @ _expm_hermitian(decomp.hf, 1j * t)


@dataclass(frozen=True)
class TrackedState:
    """Floquet-frame eigenvector continued along a parameter sweep."""

    lambda_node: float
    state: np.ndarray
    phase_gauge: str = "real-positive-overlap"


def _align_phase(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    ov = np.vdot(prev, cur)
    if abs(ov) < 1e-14:
        return cur
    return cur * (abs(ov) / ov)


def track_eigenstate(
    decomps: Sequence[FloquetDecomposition],
    initial: np.ndarray,
    lambda_nodes: Sequence[float] | None = None,
    min_overlap: float = 0.5,
    ambiguity_tol: float = 1e-6,
) -> list[TrackedState]:
    """Continue an eigenvector through a sequence of decompositions.

    At each node the eigenvector with maximal ``|overlap|`` with the previous
    node's state is selected and phase-fixed to a real positive overlap.
    """
    if lambda_nodes is None:
        lambda_nodes = np.arange(len(decomps), dtype=float)
    prev = np.asarray(initial, dtype=complex)
    prev = prev / np.linalg.norm(prev)
    out: list[TrackedState] = []
    for lam, dec in zip(lambda_nodes, decomps):
        overlaps = np.abs(dagger(dec.eigvecs) @ prev)
        best = int(np.argmax(overlaps))
        ranked = np.sort(overlaps)[::-1]
        if len(ranked) > 1 and ranked[0] - ranked[1] < ambiguity_tol:
            raise TrackingError(
                f"ambiguous tracking at lambda={lam}: overlaps {ranked[0]:.6f} vs {ranked[1]:.6f}"
            )
        if overlaps[best] < min_overlap:
            raise TrackingError(
                f"overlap {overlaps[best]:.3f} below {min_overlap} at lambda={lam}; refine the grid"
            )
        vec = _align_phase(prev, dec.eigvecs[:, best].copy())
        out.append(TrackedState(lambda_node=float(lam), state=vec))
        prev = vec
    return out


# ---------------------------------------------------------------------------
# exact gauge-potential oracle
# ---------------------------------------------------------------------------


def _aligned_frame(
    h_family: Callable[[float], HarmonicOperator],
    lam: float,
    t_samples: np.ndarray,
    steps: int,
    ref: FloquetDecomposition | None = None,
) -> tuple[FloquetDecomposition, np.ndarray]:
    """Decomposition at ``lam`` with columns aligned to a reference frame.

    Returns the decomposition and the frame stack ``Phi(t) = P(t) W =
    U(t) W exp(+i t diag(eps))`` on the sample grid.
    """
    h = h_family(lam)
    omega = h.omega
    u, stored = propagate_one_period(h.evaluate, omega, steps=steps, snapshots=t_samples)
    dec = floquet_decompose(u, omega)
    eps, w = dec.quasi_energies, dec.eigvecs
    if ref is not None:
        cost = -np.abs(dagger(ref.eigvecs) @ w)
        rows, cols = linear_sum_assignment(cost)
        w = w[:, cols]
        eps = eps[cols]
        # continue the quasi-energy branch chosen by the reference
        eps = eps + omega * np.rint((ref.quasi_energies - eps) / omega)
        phases = np.diag(dagger(ref.eigvecs) @ w)
        w = w * np.where(np.abs(phases) > 1e-14, np.abs(phases) / phases, 1.0)
        dec = FloquetDecomposition(
            omega=omega,
            u_period=dec.u_period,
            hf=hermitize((w * eps) @ dagger(w)),
            quasi_energies=eps,
            eigvecs=w,
            micromotion_times=dec.micromotion_times,
            micromotion=dec.micromotion,
        )
    phases = np.exp(1j * np.multiply.outer(t_samples, dec.quasi_energies))
    phi = np.einsum("tij,jk,tk->tik", stored, dec.eigvecs, phases, optimize=True)
    return dec, phi


def exact_fagp_oracle(
    h_family: Callable[[float], HarmonicOperator],
    lam: float,
    dlam: float,
    t_samples: np.ndarray,
    steps: int = 256,
    richardson_tol: float | None = 1e-6,
    degeneracy_tol: float = 1e-9,
) -> np.ndarray:
    """Finite-difference gauge potential ``A(t) = i d_lam(P W) W^+ P^+``.

    Central differences over ``lam +- dlam`` with gauge-aligned eigenframes;
    the result is Hermitized.  Raises :class:`OracleDegeneracyError` when two
    quasi-energies at the centre are closer than ``degeneracy_tol * omega``.
    """

    def compute(step: float) -> np.ndarray:
        dec_c, phi_c = _aligned_frame(h_family, lam, t_samples, steps)
        eps = np.sort(dec_c.quasi_energies)
        gaps = np.diff(eps)
        wrap = (eps[0] + dec_c.omega) - eps[-1] if len(eps) > 1 else np.inf
        if len(eps) > 1 and min(np.min(gaps), wrap) < degeneracy_tol * dec_c.omega:
            raise OracleDegeneracyError(
                "quasi-energy degeneracy at the fold boundary; no unique eigenbasis"
            )
        _, phi_p = _aligned_frame(h_family, lam + step, t_samples, steps, ref=dec_c)
        _, phi_m = _aligned_frame(h_family, lam - step, t_samples, steps, ref=dec_c)
        dphi = (phi_p - phi_m) / (2.0 * step)
        a = 1j * np.einsum("tij,tkj->tik", dphi, np.conj(phi_c), optimize=True)
        return hermitize(a)

    a = compute(dlam)
    if richardson_tol is not None:
        a_half = compute(0.5 * dlam)
        scale = max(np.max(np.abs(a_half)), 1.0)
        if np.max(np.abs(a - a_half)) / scale > richardson_tol:
            raise RuntimeError(
                "finite-difference gauge potential failed the Richardson check; reduce dlam"
            )
        a = a_half
    return a


def oracle_harmonics(
    h_family: Callable[[float], HarmonicOperator],
    lam: float,
    n_h: int,
    dlam: float,
    steps: int = 256,
    richardson_tol: float | None = 1e-6,
) -> HarmonicOperator:
    """Harmonic fit of the oracle gauge potential at one parameter value."""
    h = h_family(lam)
    m = max(4 * n_h + 2, 32)
    period = 2.0 * np.pi / h.omega
    t_samples = period * np.arange(m) / m
    a = exact_fagp_oracle(
        h_family, lam, dlam, t_samples, steps=steps, richardson_tol=richardson_tol
    )
    spec = np.fft.fft(a, axis=0) / m
    ells = np.arange(-n_h, n_h + 1)
    return HarmonicOperator(h.omega, spec[np.mod(ells, m)])
