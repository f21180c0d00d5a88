"""Schrodinger evolution under assisted and unassisted control protocols.

Trajectories integrate ``i d psi/dt = H_total(t) psi`` with an adaptive
high-order Runge-Kutta method and no renormalization; fidelities are taken
against the instantaneous Floquet eigenstate (micromotion included) that is
adiabatically connected to the initial state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .floquet import _propagate, floquet_decompose, propagate_one_period
from .ife import FrameExpansion, lift_to_lab_frame
from .operators import HarmonicOperator
from .protocols import ControlProtocol
from .variational import VariationalSolution

__all__ = [
    "Trajectory",
    "integrate_tdse",
    "VariationalAssist",
    "ExactFCDAssist",
    "IfeAssist",
    "oracle_assist",
    "TrackedFloquetReference",
    "FrameReference",
    "run_protocol",
    "instantaneous_fidelity",
    "AssistMismatchError",
]


class AssistMismatchError(ValueError):
    """Chirp-mode conventions of the assist and the protocol disagree."""


# ---------------------------------------------------------------------------
# integrator
# ---------------------------------------------------------------------------


def integrate_tdse(
    h_total: Callable[[float], np.ndarray] | None,
    psi0: np.ndarray,
    t_grid: np.ndarray,
    tol: float = 1e-10,
    apply: Callable[[float, np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """Integrate the Schrodinger equation on ``t_grid`` (first entry is t0).

    ``h_total`` returns the dense Hamiltonian matrix; alternatively pass
    ``apply(t, psi)`` for matrix-free right-hand sides.  Local error is
    controlled at ``tol``; the state is never renormalized.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial state must have unit norm")
    if apply is None:
        def rhs(t, y):
            return -1j * (h_total(t) @ y)
    else:
        def rhs(t, y):
            return -1j * apply(t, y)

    sol = solve_ivp(
        rhs,
        (t_grid[0], t_grid[-1]),
        psi0,
        method="DOP853",
        t_eval=np.asarray(t_grid, dtype=float),
        rtol=tol,
        atol=tol * 1e-2,
    )
    if not sol.success:
        raise RuntimeError(f"time integration failed: {sol.message}")
    return sol.y.T.copy()


# ---------------------------------------------------------------------------
# assists
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariationalAssist:
    """Counter-term from a solved variational gauge potential."""

    solution: VariationalSolution

    @property
    def chirp_label(self) -> str:
        return self.solution.chirp_label

    def matrix(self, lam: float, phi: float, dim: int) -> np.ndarray:
        chi = self.solution.coefficients(lam)
        out = np.zeros((dim, dim), dtype=complex)
        for c, elem in zip(chi, self.solution.ansatz.elements):
            for op, ell, flavor, w in elem.terms:
                if flavor == "const":
                    f = 1.0
                elif flavor == "cos":
                    f = np.cos(ell * phi)
                else:
                    f = np.sin(ell * phi)
                out += (c * w * f) * op
        return out


@dataclass(frozen=True)
class ExactFCDAssist:
    """Counter-term interpolated from the finite-difference oracle."""

    lambda_nodes: np.ndarray
    coeff_spline: CubicSpline = field(repr=False)
    n_h: int = 0

    def matrix(self, lam: float, phi: float, dim: int) -> np.ndarray:
        lam = np.clip(lam, self.lambda_nodes[0], self.lambda_nodes[-1])
        coeffs = self.coeff_spline(lam)
        ells = np.arange(-self.n_h, self.n_h + 1)
        phases = np.exp(1j * ells * phi)
        return np.tensordot(phases, coeffs, axes=(0, 0))

    chirp_label = "none"


def oracle_assist(
    h_family: Callable[[float], HarmonicOperator],
    lambda_grid: np.ndarray,
    n_h: int,
    dlam: float,
    steps: int = 256,
    richardson_tol: float | None = 1e-6,
) -> ExactFCDAssist:
    """Fit the exact gauge potential on a parameter grid for evolution."""
    from .floquet import oracle_harmonics

    stacks = []
    for lam in lambda_grid:
        fit = oracle_harmonics(
            h_family, lam, n_h=n_h, dlam=dlam, steps=steps, richardson_tol=richardson_tol
        )
        stacks.append(fit.coeffs)
    spline = CubicSpline(lambda_grid, np.asarray(stacks), axis=0)
    return ExactFCDAssist(lambda_nodes=np.asarray(lambda_grid), coeff_spline=spline, n_h=n_h)


@dataclass(frozen=True)
class IfeAssist:
    """Perturbative counter-term: static frame solution lifted to the lab."""

    expansion: FrameExpansion
    solution: VariationalSolution
    order: int = 0

    chirp_label = "none"

    def matrix(self, lam: float, t: float, dim: int) -> np.ndarray:
        chi = self.solution.coefficients(lam)
        xf = np.zeros((dim, dim), dtype=complex)
        for c, elem in zip(chi, self.solution.ansatz.elements):
            for op, _, _, w in elem.terms:
                xf += (c * w) * op
        return lift_to_lab_frame(xf, self.expansion, lam, t, order=self.order)


# ---------------------------------------------------------------------------
# fidelity references
# ---------------------------------------------------------------------------


class TrackedFloquetReference:
    """Instantaneous Floquet eigenstates along a protocol, tracked from a seed.

    At each frame time the auxiliary fixed-frequency problem with the current
    harmonic content and frequency is decomposed, the eigenvector continued
    by overlap, and the lab-frame state reconstructed from the partial
    propagator at the matching drive phase.
    """

    def __init__(
        self,
        aux_of_t: Callable[[float], HarmonicOperator],
        phase_of_t: Callable[[float], float],
        t_frames: np.ndarray,
        seed: np.ndarray,
        steps: int = 192,
        min_overlap: float = 0.6,
        max_refine: int = 8,
    ):
        self.t_frames = np.asarray(t_frames, dtype=float)
        self.states = np.empty((len(t_frames), len(seed)), dtype=complex)
        prev_vec = np.asarray(seed, dtype=complex)
        prev_vec = prev_vec / np.linalg.norm(prev_vec)

        def frame_vector(t, seed_vec, depth=0):
            h_aux = aux_of_t(t)
            u, _ = propagate_one_period(h_aux.evaluate, h_aux.omega, steps=steps)
            dec = floquet_decompose(u, h_aux.omega)
            ov = np.abs(dec.eigvecs.conj().T @ seed_vec)
            best = int(np.argmax(ov))
            if ov[best] < min_overlap:
                if depth >= max_refine:
                    raise RuntimeError("reference tracking lost the branch")
                mid_vec = frame_vector(0.5 * (t + self._t_prev), seed_vec, depth + 1)
                return frame_vector(t, mid_vec, depth + 1)
            vec = dec.eigvecs[:, best]
            ovl = np.vdot(seed_vec, vec)
            if abs(ovl) > 1e-14:
                vec = vec * (abs(ovl) / ovl)
            return vec

        self._t_prev = self.t_frames[0]
        for k, t in enumerate(self.t_frames):
            vec = frame_vector(t, prev_vec)
            h_aux = aux_of_t(t)
            period = 2.0 * np.pi / h_aux.omega
            s_star = (phase_of_t(t) % (2.0 * np.pi)) / h_aux.omega
            s_star = min(s_star, period)
            if s_star > 1e-15 * max(period, 1.0):
                n = max(8, int(steps * s_star / period))
                u_s, _ = _propagate(h_aux.evaluate, s_star, n)
                for _ in range(6):
                    n *= 2
                    u_next, _ = _propagate(h_aux.evaluate, s_star, n)
                    done = np.max(np.abs(u_next - u_s)) < 1e-10
                    u_s = u_next
                    if done:
                        break
                lab = u_s @ vec
            else:
                lab = vec
            self.states[k] = lab / np.linalg.norm(lab)
            prev_vec = vec
            self._t_prev = t

    def state(self, index: int) -> np.ndarray:
        return self.states[index]


class FrameReference:
    """Reference states from an exact rotating-frame construction.

    ``frame_matrix(t)`` returns the static frame Hamiltonian (dense or
    sparse), ``rotate(t, vec)`` maps a frame eigenvector to the lab frame;
    the relevant eigenvector is continued from ``seed`` by overlap.
    """

    def __init__(
        self,
        frame_matrix: Callable[[float], object],
        rotate: Callable[[float, np.ndarray], np.ndarray],
        t_frames: np.ndarray,
        seed: np.ndarray,
        n_eig: int = 4,
        refine_overlap: float = 0.7,
        max_refine_depth: int = 10,
    ):
        self.t_frames = np.asarray(t_frames, dtype=float)
        dim = len(seed)
        self.states = np.empty((len(t_frames), dim), dtype=complex)
        self.frame_states = np.empty_like(self.states)
        prev = np.asarray(seed, dtype=complex)
        prev = prev / np.linalg.norm(prev)
        t_prev = self.t_frames[0]

        def eig_columns(t):
            h = frame_matrix(t)
            if hasattr(h, "toarray") and h.shape[0] > 128:
                from scipy.sparse.linalg import eigsh

                k = min(n_eig, h.shape[0] - 2)
                _, vecs = eigsh(h, k=k, which="SA")
                return vecs
            h = h.toarray() if hasattr(h, "toarray") else np.asarray(h)
            return np.linalg.eigh(h)[1]

        def continue_to(t, vec, t_from, depth=0):
            cols = eig_columns(t)
            ov = np.abs(cols.conj().T @ vec)
            best = int(np.argmax(ov))
            if ov[best] < refine_overlap and depth < max_refine_depth:
                mid = continue_to(0.5 * (t + t_from), vec, t_from, depth + 1)
                return continue_to(t, mid, 0.5 * (t + t_from), depth + 1)
            out = cols[:, best]
            ovl = np.vdot(vec, out)
            if abs(ovl) > 1e-14:
                out = out * (abs(ovl) / ovl)
            return out

        for k, t in enumerate(self.t_frames):
            prev = continue_to(t, prev, t_prev)
            self.frame_states[k] = prev
            lab = rotate(t, prev)
            self.states[k] = lab / np.linalg.norm(lab)
            t_prev = t

    def state(self, index: int) -> np.ndarray:
        return self.states[index]


def instantaneous_fidelity(psi: np.ndarray, reference: np.ndarray) -> float:
    """``|<psi_ref | psi>|^2``."""
    return float(abs(np.vdot(reference, psi)) ** 2)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    fidelities: np.ndarray | None
    observables: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelities[-1])

    def to_csv(self, path) -> None:
        header = ["t", "lambda", "nu", "fidelity", *self.observables.keys()]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(len(self.times)):
                row = [
                    self.times[k],
                    self.lam[k],
                    self.nu[k],
                    self.fidelities[k] if self.fidelities is not None else np.nan,
                ]
                row += [self.observables[name][k] for name in self.observables]
                writer.writerow([f"{v:.11e}" for v in row])


def _check_assist_mode(protocol: ControlProtocol, assist) -> None:
    if assist is None:
        return
    label = assist.chirp_label
    if protocol.has_chirp and label == "none":
        raise AssistMismatchError(
            "fixed-frequency assist applied to a chirped protocol; solve with a chirp action"
        )
    if not protocol.has_chirp and label != "none":
        raise AssistMismatchError(
            "chirp-mode assist applied to a fixed-frequency protocol"
        )


def run_protocol(
    model,
    protocol: ControlProtocol,
    assist=None,
    t_frames: np.ndarray | None = None,
    n_frames: int = 201,
    observables: dict[str, np.ndarray] | None = None,
    tol: float = 1e-10,
    reference: object = "auto",
    seed: np.ndarray | None = None,
) -> Trajectory:
    """Evolve a dense model along a protocol and score it against the tracked
    Floquet reference.

    ``H_total = H + lam_dot X`` for fixed-frequency assists and ``H + X`` for
    chirp-mode assists (whose coefficients already carry the velocities).
    ``reference``: "auto" builds the matching tracked reference, ``None``
    skips fidelities, or pass a precomputed state array.
    """
    _check_assist_mode(protocol, assist)
    if t_frames is None:
        t_frames = np.linspace(0.0, protocol.t_ramp, n_frames)
    t_frames = np.asarray(t_frames, dtype=float)
    dim = model.dim

    if protocol.has_chirp:
        phase_of_t = protocol.phase
        nu_series = protocol.nu(t_frames)
    else:
        omega0 = model.hamiltonian(protocol.lam(0.0))[0].omega
        phase_of_t = lambda t: omega0 * t
        nu_series = np.full_like(t_frames, omega0)

    # reference states on the frame grid
    ref_states = None
    if isinstance(reference, np.ndarray):
        ref_states = reference
    elif reference == "auto":
        ref_states = _auto_reference(model, protocol, t_frames, seed)
    elif reference is not None and reference != "none":
        raise ValueError(f"unknown reference spec {reference!r}")

    psi0 = seed if ref_states is None else ref_states[0]
    if psi0 is None:
        raise ValueError("need either a reference or an explicit seed state")

    velocity_prefactor = assist is not None and assist.chirp_label == "none"
    ife_like = isinstance(assist, IfeAssist)

    def h_total(t):
        lam = protocol.lam(t)
        phi = phase_of_t(t)
        h = model.lab_matrix(lam, phi)
        if assist is not None:
            x = assist.matrix(lam, t, dim) if ife_like else assist.matrix(lam, phi, dim)
            h = h + (protocol.lam_dot(t) * x if velocity_prefactor else x)
        return h

    states = integrate_tdse(h_total, psi0, t_frames, tol=tol)

    fid = None
    if ref_states is not None:
        fid = np.array(
            [instantaneous_fidelity(states[k], ref_states[k]) for k in range(len(t_frames))]
        )
    obs = {}
    for name, op in (observables or {}).items():
        obs[name] = np.real(np.einsum("ti,ij,tj->t", np.conj(states), op, states))
    return Trajectory(
        times=t_frames,
        states=states,
        lam=protocol.lam(t_frames),
        nu=nu_series,
        fidelities=fid,
        observables=obs,
    )


def _auto_reference(model, protocol, t_frames, seed):
    """Tracked reference dispatch for the dense two-level models."""
    from .models import TwoLevelCircular

    if isinstance(model, TwoLevelCircular) and protocol.has_chirp:
        # exact rotating frame: eigenstates of (delta - nu) S_z + amp S_x
        if seed is None:
            # Floquet state closest to the ground state of the non-driven part
            seed = np.array([0.0, 1.0]) if model.delta > 0 else np.array([1.0, 0.0])
        zdiag = np.array([1.0, -1.0])

        def frame_matrix(t):
            return model.rotating_frame_matrix(protocol.nu(t))

        def rotate(t, vec):
            return np.exp(-0.5j * protocol.phase(t) * zdiag) * vec

        return FrameReference(frame_matrix, rotate, t_frames, seed).states

    if seed is None:
        lam0 = protocol.lam(0.0)
        h0 = model.lab_matrix(lam0, 0.0)
        diag = np.real(np.diag(h0))
        seed = np.zeros(model.dim, dtype=complex)
        seed[int(np.argmin(diag))] = 1.0

    if protocol.has_chirp:
        def aux_of_t(t):
            h = model.hamiltonian(protocol.lam(t))[0]
            return h.with_omega(protocol.nu(t))

        return TrackedFloquetReference(aux_of_t, protocol.phase, t_frames, seed).states

    omega0 = model.hamiltonian(protocol.lam(0.0))[0].omega

    def aux_of_t(t):
        return model.hamiltonian(protocol.lam(t))[0]

    return TrackedFloquetReference(
        aux_of_t, lambda t: omega0 * t, t_frames, seed
    ).states
