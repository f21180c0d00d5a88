"""Variational gauge potentials from a quadratic action principle.

For an ansatz ``X = sum_j chi_j O_j(t)`` the deficiency operator
``G(X) = i[H, X] + dX/dt - D`` is quadratic in the coefficients, so the
minimizer of the period-averaged pairing ``<<G, G>>`` solves ``M chi = b``
with ``M_jk = <<g_j, g_k>>`` and ``b_j = <<g_j, D>>``, where
``g_j = i[H, O_j] + dO_j/dt``.  The driving term ``D`` is ``dH/dlam`` for
fixed-frequency sweeps and acquires velocity-bearing chirp corrections when
the drive frequency itself is ramped.  Pairings are either the full trace or
the expectation value in a tracked Floquet eigenstate.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .operators import (
    HarmonicOperator,
    harmonic_commutator,
    harmonic_time_derivative,
    trace_pair,
)
from .pauli import HarmonicPauliSum, PauliSum
from .protocols import ControlProtocol

__all__ = [
    "AnsatzElement",
    "AnsatzSpec",
    "element",
    "pauli_element",
    "TraceNorm",
    "GroundStateNorm",
    "FixedFrequency",
    "InstantFreqChirp",
    "NaiveOmegaChirp",
    "VariationalProblem",
    "assemble_g",
    "assemble_linear_system",
    "solve_system",
    "action_value",
    "solve_lambda_grid",
    "VariationalSolution",
]

SINGULAR_VALUE_CUTOFF = 1e-12
NU_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# ansatz descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnsatzElement:
    """One variational direction: a weighted sum of (operator, harmonic) terms.

    ``terms`` entries are ``(operator, l, flavor, weight)`` with ``l >= 0``
    and flavor in ``{const, cos, sin}``.  Operators are Hermitian matrices or
    :class:`PauliSum` instances (all terms of one element must agree).
    """

    terms: tuple
    label: str = ""

    @property
    def max_harmonic(self) -> int:
        return max(int(t[1]) for t in self.terms)

    @property
    def is_pauli(self) -> bool:
        return isinstance(self.terms[0][0], PauliSum)

    def to_harmonic(self, omega: float) -> HarmonicOperator:
        return HarmonicOperator.from_terms(
            omega,
            [(t[0], t[1], t[2]) for t in self.terms],
            weights=[t[3] for t in self.terms],
        )

    def to_harmonic_pauli(self, omega: float, length: int) -> HarmonicPauliSum:
        return HarmonicPauliSum.from_terms(
            omega, length, [(t[3] * t[0], t[1], t[2]) for t in self.terms]
        )


def element(op, ell: int = 0, flavor: str = "const", label: str = "") -> AnsatzElement:
    """Single-term dense element ``op * trig(l omega t)``."""
    return AnsatzElement(terms=((np.asarray(op, dtype=complex), ell, flavor, 1.0),), label=label)


def pauli_element(op: PauliSum, ell: int = 0, flavor: str = "const", label: str = "") -> AnsatzElement:
    return AnsatzElement(terms=((op, ell, flavor, 1.0),), label=label)


@dataclass(frozen=True)
class AnsatzSpec:
    """Variational basis plus the harmonic cutoff used to truncate ``G``.

    ``n_h = None`` defaults to ``max(ansatz harmonics, Hamiltonian
    harmonics)`` at assembly time.
    """

    elements: tuple[AnsatzElement, ...]
    n_h: int | None = None

    def __post_init__(self) -> None:
        if not self.elements:
            raise ValueError("ansatz needs at least one element")
        kinds = {e.is_pauli for e in self.elements}
        if len(kinds) != 1:
            raise ValueError("cannot mix dense and Pauli elements")

    @property
    def is_pauli(self) -> bool:
        return self.elements[0].is_pauli

    @property
    def size(self) -> int:
        return len(self.elements)

    def max_harmonic(self) -> int:
        return max(e.max_harmonic for e in self.elements)

    def truncation(self, h_n_h: int) -> int:
        return self.n_h if self.n_h is not None else max(self.max_harmonic(), h_n_h)

    def labels(self) -> list[str]:
        return [e.label or f"e{k}" for k, e in enumerate(self.elements)]

    def gram_min_eigenvalue(self, omega: float, length: int | None = None) -> float:
        """Smallest eigenvalue of the normalized element Gram matrix."""
        if self.is_pauli:
            ops = [e.to_harmonic_pauli(omega, length) for e in self.elements]
            gram = np.array([[a.trace_pair(b).real for b in ops] for a in ops])
        else:
            ops = [e.to_harmonic(omega) for e in self.elements]
            gram = np.array([[trace_pair(a, b).real for b in ops] for a in ops])
        d = np.sqrt(np.abs(np.diag(gram)))
        d[d == 0] = 1.0
        gram = gram / np.outer(d, d)
        return float(np.linalg.eigvalsh(gram)[0])

    def validate(self, omega: float, length: int | None = None) -> None:
        if self.gram_min_eigenvalue(omega, length) <= 1e-10:
            raise ValueError("ansatz elements are (numerically) linearly dependent")

    def describe(self) -> list[dict]:
        out = []
        for e in self.elements:
            out.append(
                {
                    "label": e.label,
                    "terms": [
                        {"harmonic": int(t[1]), "flavor": t[2], "weight": float(t[3])}
                        for t in e.terms
                    ],
                }
            )
        return out


# ---------------------------------------------------------------------------
# pairings and modes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceNorm:
    """Full Hilbert-Schmidt pairing averaged over one period."""

    label: str = "trace"


@dataclass(frozen=True)
class GroundStateNorm:
    """Expectation value in a tracked Floquet eigenstate.

    ``state_provider(lam)`` returns a callable mapping an array of drive
    phases to the stack of lab-frame reference states ``P(phi) |n(lam)>``.
    With ``frame="floquet"`` the micromotion dressing is omitted and the bare
    eigenvector is used at every phase.
    """

    state_provider: Callable[[float], Callable[[np.ndarray], np.ndarray]]
    frame: str = "lab"
    n_quad: int | None = None
    label: str = "ground_state"


@dataclass(frozen=True)
class FixedFrequency:
    label: str = "none"


@dataclass(frozen=True)
class InstantFreqChirp:
    """Drive frequency rides on the control parameter; the action follows the
    instantaneous frequency and produces velocity-bearing coefficients."""

    protocol: ControlProtocol
    label: str = "instant_freq"


@dataclass(frozen=True)
class NaiveOmegaChirp:
    """Chirp variant that follows the nominal frequency instead; the
    counter-term stays finite in the adiabatic limit."""

    protocol: ControlProtocol
    label: str = "naive_omega"


@dataclass(frozen=True)
class VariationalProblem:
    """Assembled normal equations ``M chi = b`` plus the constant action term."""

    m: np.ndarray
    b: np.ndarray
    const: float
    norm_label: str
    chirp_label: str

    def validate(self, tol: float = 1e-10) -> None:
        if np.max(np.abs(self.m - self.m.T)) > tol * max(1.0, np.max(np.abs(self.m))):
            raise ValueError("M is not symmetric")
        scale = max(np.max(np.abs(self.m)), 1e-300)
        if np.linalg.eigvalsh(self.m)[0] < -1e-10 * scale:
            raise ValueError("M is not positive semi-definite")


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def assemble_g(h, elem, n_h: int | None = None, deriv_scale: float | None = None):
    """Deficiency direction ``g = i[H, O] + dO/dt`` truncated to ``n_h``.

    ``deriv_scale`` replaces the frequency in the time derivative (the
    instantaneous frequency during chirps).
    """
    if isinstance(h, HarmonicPauliSum):
        o = elem.to_harmonic_pauli(h.omega, h.length)
        trunc = n_h if n_h is not None else max(o.n_h, h.n_h)
        if o.n_h > trunc:
            raise ValueError("element harmonic exceeds the truncation cutoff")
        g = 1j * h.commutator(o, truncate_to=trunc) + o.time_derivative(deriv_scale)
        return g.truncated(trunc)
    o = elem.to_harmonic(h.omega)
    trunc = n_h if n_h is not None else max(o.n_h, h.n_h)
    if o.max_coeff_norm() > 0 and o.n_h > trunc:
        raise ValueError("element harmonic exceeds the truncation cutoff")
    if h.dim != o.dim:
        raise ValueError("dimension mismatch between Hamiltonian and ansatz")
    g = 1j * harmonic_commutator(h, o, truncate_to=trunc) + harmonic_time_derivative(
        o, omega=deriv_scale
    )
    return g.truncated(trunc)


class _Pairing:
    """Evaluates the chosen period-averaged pairing on harmonic objects."""

    def __init__(self, norm, lam: float, n_h: int):
        self.norm = norm
        self.lam = lam
        self.n_h = n_h
        self._psi = None

    def _states(self, phis: np.ndarray) -> np.ndarray:
        if self._psi is None:
            provider = self.norm.state_provider(self.lam)
            self._psi = provider
        return self._psi(phis)

    def pair_many(self, ops: list, rhs: list) -> np.ndarray:
        """Matrix of pairings ``<<ops_i, rhs_j>>`` (real)."""
        if isinstance(self.norm, TraceNorm):
            out = np.empty((len(ops), len(rhs)))
            for i, a in enumerate(ops):
                for j, c in enumerate(rhs):
                    val = a.trace_pair(c) if isinstance(a, HarmonicPauliSum) else trace_pair(a, c)
                    out[i, j] = np.real(val)
            return out
        n_pts = self.norm.n_quad or max(4 * self.n_h + 2, 16)
        phis = 2.0 * np.pi * np.arange(n_pts) / n_pts
        if self.norm.frame == "lab":
            states = self._states(phis)
        else:
            states = np.repeat(self._states(np.zeros(1)), n_pts, axis=0)

        def vectors(op):
            if isinstance(op, HarmonicPauliSum):
                comp = op.compiled()
                return np.stack(
                    [op.apply_phase(phi, states[k], compiled=comp) for k, phi in enumerate(phis)]
                )
            mats = op.evaluate_phase(phis)
            return np.einsum("pij,pj->pi", mats, states, optimize=True)

        va = [vectors(a) for a in ops]
        vb = [vectors(c) for c in rhs] if rhs is not ops else va
        out = np.empty((len(ops), len(rhs)))
        for i in range(len(ops)):
            for j in range(len(rhs)):
                out[i, j] = np.mean(np.real(np.einsum("pi,pi->p", np.conj(va[i]), vb[j])))
        return out


def _chirp_data(chirp, lam: float):
    if isinstance(chirp, FixedFrequency):
        return None
    p = chirp.protocol
    t = p.time_of_lambda(lam)
    return {
        "t": t,
        "lam_dot": p.lam_dot(t),
        "nu": p.nu(t),
        "nu_dot": p.nu_dot(t),
        "omega": p.omega(t),
    }


def assemble_linear_system(
    model, lam: float, ansatz: AnsatzSpec, norm=None, chirp=None
) -> VariationalProblem:
    """Normal equations of the truncated action at one parameter value.

    Driving terms by mode: ``dH/dlam`` (fixed frequency);
    ``lam_dot dH/dlam - (nu_dot/nu) H`` (instantaneous-frequency chirp,
    assembled through the split ``<<g, H>>/nu = <<i[H,O], H>>/nu +
    <<dO/dphi, H>>`` so the static endpoints ``nu = 0`` stay finite);
    ``lam_dot (dH/dlam + t dH/dphi)`` (nominal-frequency chirp variant).
    """
    norm = norm or TraceNorm()
    chirp = chirp or FixedFrequency()
    if ansatz.is_pauli and hasattr(model, "pauli_hamiltonian"):
        h, dh = model.pauli_hamiltonian(lam)
    else:
        h, dh = model.hamiltonian(lam)
    cd = _chirp_data(chirp, lam)
    deriv_scale = cd["nu"] if isinstance(chirp, InstantFreqChirp) else (
        cd["omega"] if cd else None
    )
    n_h = ansatz.truncation(h.n_h)
    gs = [assemble_g(h, e, n_h=n_h, deriv_scale=deriv_scale) for e in ansatz.elements]
    pairing = _Pairing(norm, lam, n_h)
    m = pairing.pair_many(gs, gs)
    m = 0.5 * (m + m.T)

    h_tr = h.truncated(n_h)
    dh_tr = dh.truncated(n_h)
    if isinstance(chirp, FixedFrequency):
        b = pairing.pair_many(gs, [dh_tr])[:, 0]
        const = float(pairing.pair_many([dh_tr], [dh_tr])[0, 0])
    elif isinstance(chirp, InstantFreqChirp):
        lam_dot, nu, nu_dot = cd["lam_dot"], cd["nu"], cd["nu_dot"]
        b = lam_dot * pairing.pair_many(gs, [dh_tr])[:, 0]
        if ansatz.is_pauli:
            comms = [1j * h.commutator(e.to_harmonic_pauli(h.omega, h.length), truncate_to=n_h) for e in ansatz.elements]
            dphis = [e.to_harmonic_pauli(h.omega, h.length).time_derivative(1.0).truncated(n_h) for e in ansatz.elements]
        else:
            comms = [1j * harmonic_commutator(h, e.to_harmonic(h.omega), truncate_to=n_h) for e in ansatz.elements]
            dphis = [harmonic_time_derivative(e.to_harmonic(h.omega), omega=1.0).truncated(n_h) for e in ansatz.elements]
        s_comm = pairing.pair_many(comms, [h_tr])[:, 0]
        s_dphi = pairing.pair_many(dphis, [h_tr])[:, 0]
        if abs(nu) > NU_FLOOR:
            b = b - nu_dot * (s_comm / nu + s_dphi)
        else:
            # at a static endpoint the commutator pairing vanishes identically
            b = b - nu_dot * s_dphi
        if abs(nu) > NU_FLOOR:
            pieces = [dh_tr, h_tr]
            gram = pairing.pair_many(pieces, pieces)
            vec = np.array([lam_dot, -nu_dot / nu])
            const = float(vec @ gram @ vec)
        else:
            const = float("nan")
    elif isinstance(chirp, NaiveOmegaChirp):
        lam_dot, t = cd["lam_dot"], cd["t"]
        dphi_h = (
            h.time_derivative(1.0).truncated(n_h)
            if isinstance(h, HarmonicPauliSum)
            else harmonic_time_derivative(h, omega=1.0).truncated(n_h)
        )
        pieces = [dh_tr, dphi_h]
        raw = pairing.pair_many(gs, pieces)
        b = lam_dot * (raw[:, 0] + t * raw[:, 1])
        gram = pairing.pair_many(pieces, pieces)
        vec = lam_dot * np.array([1.0, t])
        const = float(vec @ gram @ vec)
    else:
        raise ValueError(f"unknown chirp mode {chirp!r}")
    return VariationalProblem(
        m=m, b=np.asarray(b, dtype=float), const=const,
        norm_label=norm.label, chirp_label=chirp.label,
    )


def solve_system(problem: VariationalProblem) -> np.ndarray:
    """Minimal-norm least-squares solution of ``M chi = b``."""
    chi, *_ = np.linalg.lstsq(problem.m, problem.b, rcond=SINGULAR_VALUE_CUTOFF)
    return chi


def residual_action(problem: VariationalProblem, chi: np.ndarray) -> float:
    """``S(chi) = chi M chi - 2 b chi + const``."""
    return float(chi @ problem.m @ chi - 2.0 * problem.b @ chi + problem.const)


def action_value(model, lam: float, x, norm=None, chirp=None, n_h: int | None = None) -> float:
    """Direct action of a candidate gauge potential ``x`` (harmonic operator).

    Independent of the normal-equation path: builds ``G = i[H,x] + dx/dt - D``
    explicitly and pairs it with itself.
    """
    norm = norm or TraceNorm()
    chirp = chirp or FixedFrequency()
    pauli = isinstance(x, HarmonicPauliSum)
    if pauli and hasattr(model, "pauli_hamiltonian"):
        h, dh = model.pauli_hamiltonian(lam)
    else:
        h, dh = model.hamiltonian(lam)
    cd = _chirp_data(chirp, lam)
    trunc = n_h if n_h is not None else max(x.n_h, h.n_h)
    if isinstance(chirp, FixedFrequency):
        scale = None
        d = dh
    elif isinstance(chirp, InstantFreqChirp):
        scale = cd["nu"]
        if abs(scale) <= NU_FLOOR:
            raise ValueError("direct action undefined at a static chirp endpoint")
        d = cd["lam_dot"] * dh - (cd["nu_dot"] / cd["nu"]) * h
    else:
        scale = cd["omega"]
        dphi_h = h.time_derivative(1.0) if pauli else harmonic_time_derivative(h, omega=1.0)
        d = cd["lam_dot"] * (dh + cd["t"] * dphi_h)
    if pauli:
        g = 1j * h.commutator(x, truncate_to=trunc) + x.time_derivative(scale) - d
        g = g.truncated(trunc)
    else:
        g = (
            1j * harmonic_commutator(h, x, truncate_to=trunc)
            + harmonic_time_derivative(x, omega=scale)
            - d
        )
        g = g.truncated(trunc)
    pairing = _Pairing(norm, lam, trunc)
    return float(pairing.pair_many([g], [g])[0, 0])


# ---------------------------------------------------------------------------
# parameter grids and interpolation
# ---------------------------------------------------------------------------


@dataclass
class VariationalSolution:
    """Coefficients on a parameter grid plus a validated spline interpolant."""

    lambda_nodes: np.ndarray
    coeffs: np.ndarray
    eps: float
    residuals: np.ndarray
    ansatz: AnsatzSpec
    norm_label: str
    chirp_label: str
    interpolant: CubicSpline = field(repr=False, default=None)
    model_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.interpolant is None:
            self.interpolant = CubicSpline(self.lambda_nodes, self.coeffs, axis=0)

    def coefficients(self, lam):
        lam = np.clip(lam, self.lambda_nodes[0], self.lambda_nodes[-1])
        return self.interpolant(lam)

    def to_json_dict(self) -> dict:
        return {
            "model_hash": self.model_meta.get("hash", ""),
            "model": self.model_meta.get("params", {}),
            "ansatz": self.ansatz.describe(),
            "lambda_nodes": self.lambda_nodes.tolist(),
            "coefficients": self.coeffs.tolist(),
            "eps": self.eps,
            "norm": self.norm_label,
            "chirp_mode": self.chirp_label,
            "residual_action": [None if np.isnan(r) else r for r in self.residuals],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)


def model_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=float).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def solve_lambda_grid(
    model,
    ansatz: AnsatzSpec,
    lambda_range: tuple[float, float],
    norm=None,
    chirp=None,
    eps: float = 1e-4,
    initial_nodes: int = 9,
    max_doublings: int = 12,
    model_meta: dict | None = None,
) -> VariationalSolution:
    """Solve on an equidistant grid, refine until the spline is trustworthy.

    Midpoint coefficients interpolated from the current grid must match
    directly solved values to ``eps`` (relative to the largest coefficient
    magnitude); the node count doubles until they do.
    """
    if initial_nodes < 5:
        raise ValueError("need at least 5 initial nodes")
    lo, hi = lambda_range
    if not np.isfinite([lo, hi]).all() or lo >= hi:
        raise ValueError("lambda_range must be finite and increasing")
    cache: dict[float, tuple[np.ndarray, float]] = {}

    def solve_at(lam: float) -> tuple[np.ndarray, float]:
        if lam not in cache:
            prob = assemble_linear_system(model, lam, ansatz, norm=norm, chirp=chirp)
            chi = solve_system(prob)
            cache[lam] = (chi, residual_action(prob, chi))
        return cache[lam]

    n = initial_nodes
    for _ in range(max_doublings + 1):
        nodes = np.linspace(lo, hi, n)
        coeffs = np.stack([solve_at(lam)[0] for lam in nodes])
        spline = CubicSpline(nodes, coeffs, axis=0)
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        direct = np.stack([solve_at(lam)[0] for lam in mids])
        scale = max(np.max(np.abs(coeffs)), np.max(np.abs(direct)), 1e-300)
        err = np.max(np.abs(spline(mids) - direct)) / scale
        if err <= eps:
            residuals = np.array([solve_at(lam)[1] for lam in nodes])
            norm_label = (norm or TraceNorm()).label
            chirp_label = (chirp or FixedFrequency()).label
            return VariationalSolution(
                lambda_nodes=nodes,
                coeffs=coeffs,
                eps=eps,
                residuals=residuals,
                ansatz=ansatz,
                norm_label=norm_label,
                chirp_label=chirp_label,
                interpolant=spline,
                model_meta=model_meta or {},
            )
        n = 2 * n - 1
    raise RuntimeError(f"grid refinement did not reach eps={eps} after {max_doublings} doublings")
