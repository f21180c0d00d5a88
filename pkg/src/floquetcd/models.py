"""Concrete driven models: two-level systems, a driven two-band lattice and
the circularly driven Ising chain, plus their analytic reference formulas.

Every model exposes ``hamiltonian(lam) -> (H, dH)`` where both entries are
:class:`~floquetcd.operators.HarmonicOperator` at the drive frequency
belonging to ``lam``, and ``dH`` is the analytic parameter derivative (the
derivative never acts on the harmonics).  Spin-chain models additionally
expose the symbolic Pauli form used by the large-``L`` solvers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .operators import SPIN, HarmonicOperator, fit_harmonics
from .pauli import HarmonicPauliSum, PauliSum, axis_sum, zz_chain
from .protocols import ControlProtocol, FrequencyMap

__all__ = [
    "TwoLevelLinear",
    "TwoLevelCircular",
    "circular2ls_analytic_agp",
    "BandPumpParams",
    "load_band_table",
    "bloch_hamiltonian",
    "BlochMomentumModel",
    "photon_resonance_scan",
    "resonance_window_clear",
    "TfiCircular",
    "mfi_rotating_frame",
    "model_hamiltonian",
    "DENSE_SITE_CAP",
]

DENSE_SITE_CAP = 12
KHZ = 2.0 * np.pi  # angular frequency per kHz, time measured in ms


def model_hamiltonian(model, lam: float) -> tuple[HarmonicOperator, HarmonicOperator]:
    """Harmonic decomposition and analytic parameter derivative of a model."""
    return model.hamiltonian(lam)


# ---------------------------------------------------------------------------
# two-level systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoLevelLinear:
    """Two-level system with a linearly polarized drive on the hybridizing axis.

    ``H(t) = lam * S_z + (g + amp cos(omega t)) * S_x``; the control
    parameter is the level splitting ``lam``.
    """

    g: float
    amp: float
    omega: float
    dim: int = 2

    def hamiltonian(self, lam: float) -> tuple[HarmonicOperator, HarmonicOperator]:
        h = HarmonicOperator.from_terms(
            self.omega,
            [
                (lam * SPIN["z"] + self.g * SPIN["x"], 0, "const"),
                (self.amp * SPIN["x"], 1, "cos"),
            ],
        )
        dh = HarmonicOperator.from_terms(self.omega, [(SPIN["z"], 0, "const")], n_h=1)
        return h, dh

    def lab_matrix(self, lam: float, phi: float) -> np.ndarray:
        return lam * SPIN["z"] + (self.g + self.amp * np.cos(phi)) * SPIN["x"]


@dataclass(frozen=True)
class TwoLevelCircular:
    """Circularly driven two-level system ``Delta S_z + amp (cos S_x + sin S_y)``.

    ``sweep`` selects the control parameter: the splitting (``delta``), the
    drive amplitude (``amp``) or the drive frequency (``omega``, a chirp).
    """

    delta: float
    amp: float
    omega: float
    sweep: str = "delta"
    dim: int = 2

    def __post_init__(self) -> None:
        if self.sweep not in ("delta", "amp", "omega"):
            raise ValueError("sweep must be one of delta, amp, omega")

    def _drive_terms(self, amp: float):
        return [
            (amp * SPIN["x"], 1, "cos"),
            (amp * SPIN["y"], 1, "sin"),
        ]

    def hamiltonian(self, lam: float) -> tuple[HarmonicOperator, HarmonicOperator]:
        delta, amp, omega = self.delta, self.amp, self.omega
        if self.sweep == "delta":
            delta = lam
        elif self.sweep == "amp":
            amp = lam
        else:
            omega = lam
        h = HarmonicOperator.from_terms(
            omega, [(delta * SPIN["z"], 0, "const")] + self._drive_terms(amp)
        )
        if self.sweep == "delta":
            dh = HarmonicOperator.from_terms(omega, [(SPIN["z"], 0, "const")], n_h=1)
        elif self.sweep == "amp":
            dh = HarmonicOperator.from_terms(omega, self._drive_terms(1.0))
        else:
            # the coefficients carry no explicit frequency dependence
            dh = HarmonicOperator.zero(omega, 1, 2)
        return h, dh

    def rotating_frame_matrix(self, nu: float, amp: float | None = None) -> np.ndarray:
        """Static frame Hamiltonian ``(Delta - nu) S_z + amp S_x``."""
        a = self.amp if amp is None else amp
        return (self.delta - nu) * SPIN["z"] + a * SPIN["x"]

    def lab_matrix(self, lam: float, phi: float) -> np.ndarray:
        delta, amp = self.delta, self.amp
        if self.sweep == "delta":
            delta = lam
        elif self.sweep == "amp":
            amp = lam
        return delta * SPIN["z"] + amp * (np.cos(phi) * SPIN["x"] + np.sin(phi) * SPIN["y"])


def circular2ls_analytic_agp(
    delta: float, amp: float, omega: float, which: str
) -> HarmonicOperator:
    """Closed-form gauge potential of the circularly driven two-level system.

    ``which`` selects the swept parameter (``delta`` or ``amp``); the result
    is ``c * (cos(omega t) S_y - sin(omega t) S_x)`` with ``c = -amp / D`` or
    ``c = (delta - omega) / D`` and ``D = (delta - omega)^2 + amp^2``.
    """
    denom = (delta - omega) ** 2 + amp**2
    if denom == 0.0:
        raise ValueError("gauge potential undefined at the exact resonance with amp = 0")
    if which == "delta":
        c = -amp / denom
    elif which == "amp":
        c = (delta - omega) / denom
    else:
        raise ValueError("which must be 'delta' or 'amp'")
    return HarmonicOperator.from_terms(
        omega, [(c * SPIN["y"], 1, "cos"), (-c * SPIN["x"], 1, "sin")]
    )


# ---------------------------------------------------------------------------
# driven two-band lattice (topological pump setting)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandPumpParams:
    """Tight-binding two-band parameters; energies and hoppings in kHz.

    ``j_s``/``j_p`` list first-, second- and third-neighbour hoppings.
    ``k1``/``k2`` are the dimensionless two-tone drive strengths and
    ``phase_shift`` the relative phase of the second tone.
    """

    eps_s: float
    eps_p: float
    j_s: tuple[float, float, float]
    j_p: tuple[float, float, float]
    eta0: float
    eta1: float
    k1: float
    k2: float
    phase_shift: float
    lattice_constant: float = 1.0
    n_f: int = 100
    label: str = "custom"

    @property
    def eps_plus(self) -> float:  # angular units
        return 0.5 * (self.eps_p + self.eps_s) * KHZ

    @property
    def eps_minus(self) -> float:
        return 0.5 * (self.eps_p - self.eps_s) * KHZ

    def j_plus(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.j_p) + np.asarray(self.j_s)) * KHZ

    def j_minus(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.j_p) - np.asarray(self.j_s)) * KHZ

    def momentum_grid(self, n_f: int | None = None) -> np.ndarray:
        """Quasi-momenta of an ``n_f``-site Brillouin zone, in ``(-pi/a, pi/a]``."""
        n = self.n_f if n_f is None else n_f
        a = self.lattice_constant
        j = np.arange(n)
        q = -np.pi / a + 2.0 * np.pi * (j + 1) / (n * a)
        return q

    def peierls_phase(self, phi: np.ndarray) -> np.ndarray:
        # phase-integral of force/omega, so the inter-band coupling averages
        # to zero over a period
        return self.k1 * np.sin(phi) + self.k2 * np.sin(2.0 * phi + self.phase_shift)

    def force(self, phi: np.ndarray, omega: float) -> np.ndarray:
        return omega * (
            self.k1 * np.cos(phi) + 2.0 * self.k2 * np.cos(2.0 * phi + self.phase_shift)
        )


def load_band_table(label: str) -> BandPumpParams:
    """Load one of the shipped parameter tables (``experiment``/``adjusted``)."""
    name = f"band_pump_{label}.json"
    with resources.files("floquetcd._tables").joinpath(name).open() as fh:
        raw = json.load(fh)
    return BandPumpParams(
        eps_s=raw["eps_s"],
        eps_p=raw["eps_p"],
        j_s=tuple(raw["j_s"]),
        j_p=tuple(raw["j_p"]),
        eta0=raw["eta0"],
        eta1=raw["eta1"],
        k1=raw["drive"]["k1"],
        k2=raw["drive"]["k2"],
        phase_shift=raw["drive"]["phase_shift"],
        lattice_constant=raw["lattice_constant"],
        label=raw["label"],
    )


def bloch_components(
    params: BandPumpParams, q: np.ndarray, phi: np.ndarray, omega: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scalar coefficients ``(c_1, c_x, c_z)`` of the 2x2 Bloch matrix.

    Broadcasts over momenta and phases: inputs of shape ``(nq,)`` and
    ``(nt,)`` produce outputs of shape ``(nq, nt)``.
    """
    a = params.lattice_constant
    q = np.asarray(q, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[None, ...]
    pei = params.peierls_phase(phi)
    force = params.force(phi, omega)
    jp, jm = params.j_plus(), params.j_minus()
    args = q * a - pei
    c1 = params.eps_plus + sum(jp[j - 1] * np.cos(j * args) for j in (1, 2, 3))
    cx = -a * force * (params.eta0 + 2.0 * params.eta1 * np.cos(args))
    cz = params.eps_minus - 2.0 * sum(jm[j - 1] * np.cos(j * args) for j in (1, 2, 3))
    return c1, cx, cz


def bloch_hamiltonian(
    params: BandPumpParams, q: float, t: float, omega: float
) -> np.ndarray:
    """Dense 2x2 Bloch matrix at fixed momentum and time."""
    qa = params.lattice_constant * q
    if not (-np.pi - 1e-12 < qa <= np.pi + 1e-12):
        raise ValueError("q outside the first Brillouin zone")
    c1, cx, cz = bloch_components(params, np.array([q]), np.array([omega * t]), omega)
    eye = np.eye(2, dtype=complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return c1[0, 0] * eye + cx[0, 0] * sx + cz[0, 0] * sz


@dataclass(frozen=True)
class BlochMomentumModel:
    """Single-momentum two-band model; the control parameter is the drive
    frequency (chirp)."""

    params: BandPumpParams
    q: float
    n_h: int = 32
    dim: int = 2

    def _fit(self, values_fn, omega: float) -> HarmonicOperator:
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        sz = np.array([[1, 0], [0, -1]], dtype=complex)
        eye = np.eye(2, dtype=complex)

        def stack(phi):
            c1, cx, cz = values_fn(phi)
            return (
                c1[0][..., None, None] * eye
                + cx[0][..., None, None] * sx
                + cz[0][..., None, None] * sz
            )

        return fit_harmonics(stack, omega, self.n_h, n_samples=max(4 * self.n_h + 2, 256))

    def hamiltonian(self, lam: float) -> tuple[HarmonicOperator, HarmonicOperator]:
        omega = lam
        q = np.array([self.q])
        h = self._fit(lambda phi: bloch_components(self.params, q, phi, omega), omega)
        # only the force prefactor carries the frequency: d(c_x)/d(omega) = c_x / omega
        def d_values(phi):
            c1, cx, cz = bloch_components(self.params, q, phi, omega)
            return np.zeros_like(c1), cx / omega, np.zeros_like(cz)

        dh = self._fit(d_values, omega)
        return h, dh

    def lab_matrix(self, lam: float, phi: float) -> np.ndarray:
        c1, cx, cz = bloch_components(
            self.params, np.array([self.q]), np.array([phi]), lam
        )
        return np.array(
            [[c1[0, 0] + cz[0, 0], cx[0, 0]], [cx[0, 0], c1[0, 0] - cz[0, 0]]],
            dtype=complex,
        )


def photon_resonance_scan(
    params: BandPumpParams,
    omega_range: tuple[float, float],
    q_grid: np.ndarray,
    n_omega: int = 400,
) -> list[tuple[float, float]]:
    """Roots of ``|Lambda|(omega, q) = omega`` inside the frequency window.

    ``Lambda = (eps_minus - omega) - 2 sum_k J_minus^k cos(k q a)`` is the
    rotating-frame level splitting; solutions mark photon resonances.
    Frequencies are angular (same units as ``eps_minus``).
    """
    if len(q_grid) == 0 or omega_range[0] >= omega_range[1]:
        return []
    jm = params.j_minus()
    a = params.lattice_constant
    omegas = np.linspace(*omega_range, n_omega)
    hits: list[tuple[float, float]] = []
    for q in np.asarray(q_grid, dtype=float):
        trig = 2.0 * sum(jm[k - 1] * np.cos(k * q * a) for k in (1, 2, 3))

        def gap(w):
            return abs(params.eps_minus - w - trig) - w

        vals = np.array([gap(w) for w in omegas])
        sign_change = np.where(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        for k in sign_change:
            from scipy.optimize import brentq

            w_star = brentq(gap, omegas[k], omegas[k + 1], xtol=1e-12)
            hits.append((float(w_star), float(q)))
    return hits


def resonance_window_clear(
    params: BandPumpParams, omega_i: float, omega_f: float
) -> bool:
    """Inequalities guaranteeing a resonance-free topological chirp window.

    Requires the rotating-frame detuning to start outside and end inside the
    hopping band: ``|eps_- - omega_i| > 2 sum|J_-|`` and
    ``|eps_- - omega_f| < 2 sum|J_-|``.
    """
    band = 2.0 * np.sum(np.abs(params.j_minus()))
    return bool(
        abs(params.eps_minus - omega_i) > band and abs(params.eps_minus - omega_f) < band
    )


# ---------------------------------------------------------------------------
# circularly driven transverse-field Ising chain
# ---------------------------------------------------------------------------


def _default_amp(lam: float) -> float:
    return 10.0 - 9.5 * lam


def _default_amp_derivative(lam: float) -> float:
    return -9.5


@dataclass(frozen=True)
class TfiCircular:
    """Ising chain with a circularly rotating transverse field.

    ``H(t) = J sum_j sigma^z_j sigma^z_{j+1} + A(lam) [cos(phi) sigma^x_j +
    sin(phi) sigma^y_j] + J h_z_break sigma^z_j`` with ``J < 0`` and
    ``phi = omega(lam) t``.  Amplitudes and frequencies are in units of
    ``|J|``; the symmetry-breaking field is stored as a magnitude and applied
    with the sign of ``J`` (aligned with the drive-induced z field).
    """

    length: int
    j: float = -1.0
    omega_max: float = 0.2
    h_z_break: float = 1e-3
    amp: Callable[[float], float] = _default_amp
    amp_derivative: Callable[[float], float] = _default_amp_derivative
    site_cap: int = DENSE_SITE_CAP

    def __post_init__(self) -> None:
        if self.length > self.site_cap:
            raise ValueError(
                f"L={self.length} exceeds the dense cap {self.site_cap}; "
                "pass site_cap explicitly to override"
            )
        if self.h_z_break < 0.0:
            raise ValueError("h_z_break is a magnitude")
        if self.j >= 0.0:
            raise ValueError("ferromagnetic convention requires J < 0")

    @property
    def dim(self) -> int:
        return 1 << self.length

    # -- schedules -------------------------------------------------------

    def freq_map(self) -> FrequencyMap:
        return FrequencyMap.sine(self.omega_max * abs(self.j))

    def protocol(self, t_ramp: float, kind: str = "cubic") -> ControlProtocol:
        return ControlProtocol(
            kind=kind, lambda_i=0.0, lambda_f=1.0, t_ramp=t_ramp, freq_map=self.freq_map()
        )

    # -- symbolic Hamiltonian --------------------------------------------

    def static_terms(self) -> PauliSum:
        L = self.length
        return self.j * zz_chain(L) + (self.j * self.h_z_break) * axis_sum(L, "z")

    def pauli_hamiltonian(self, lam: float) -> tuple[HarmonicPauliSum, HarmonicPauliSum]:
        L = self.length
        omega = self.freq_map().omega(lam)
        amp = self.amp(lam) * abs(self.j)
        damp = self.amp_derivative(lam) * abs(self.j)
        h = HarmonicPauliSum.from_terms(
            omega,
            L,
            [
                (self.static_terms(), 0, "const"),
                (amp * axis_sum(L, "x"), 1, "cos"),
                (amp * axis_sum(L, "y"), 1, "sin"),
            ],
        )
        dh = HarmonicPauliSum.from_terms(
            omega,
            L,
            [
                (damp * axis_sum(L, "x"), 1, "cos"),
                (damp * axis_sum(L, "y"), 1, "sin"),
            ],
        )
        return h, dh

    def hamiltonian(self, lam: float) -> tuple[HarmonicOperator, HarmonicOperator]:
        h, dh = self.pauli_hamiltonian(lam)
        nh = max(h.n_h, 1)
        return h.to_harmonic_operator(nh), dh.to_harmonic_operator(nh)

    # -- fast numerics ----------------------------------------------------

    def sparse_parts(self) -> dict[str, object]:
        """Cached pieces for evolution: diagonal statics, CSR x/y sums."""
        L = self.length
        dim = 1 << L
        idx = np.arange(dim)
        z = np.empty((L, dim))
        for j_site in range(L):
            z[j_site] = 1.0 - 2.0 * ((idx >> (L - 1 - j_site)) & 1)
        zz = sum(z[j_site] * z[(j_site + 1) % L] for j_site in range(L))
        static_diag = self.j * zz + self.j * self.h_z_break * z.sum(axis=0)
        return {
            "static_diag": static_diag,
            "sx": _sparse_axis_sum(L, "x"),
            "sy": _sparse_axis_sum(L, "y"),
            "z_diag": z.sum(axis=0),
        }


def _z_sum_diagonal(length: int) -> np.ndarray:
    dim = 1 << length
    idx = np.arange(dim)
    out = np.zeros(dim)
    for j_site in range(length):
        out += 1.0 - 2.0 * ((idx >> (length - 1 - j_site)) & 1)
    return out


def _sparse_axis_sum(length: int, axis: str) -> sp.csr_matrix:
    dim = 1 << length
    idx = np.arange(dim)
    rows, cols, vals = [], [], []
    for j_site in range(length):
        bit = 1 << (length - 1 - j_site)
        src = idx
        dst = idx ^ bit
        if axis == "x":
            v = np.ones(dim, dtype=complex)
        else:  # y
            v = np.where((idx & bit) != 0, -1.0j, 1.0j)
        rows.append(dst)
        cols.append(src)
        vals.append(v)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )


def mfi_rotating_frame(
    model: TfiCircular, amp: float, nu: float, chi: float = 0.0
) -> PauliSum:
    """Mixed-field Ising Hamiltonian seen from the co-rotating frame.

    ``H = J sum zz + amp sum sigma^x + (J h_z - nu/2) sum sigma^z`` plus an
    optional counter-term field ``chi sum sigma^y``.
    """
    L = model.length
    out = model.j * zz_chain(L) + amp * axis_sum(L, "x")
    out = out + (model.j * model.h_z_break - 0.5 * nu) * axis_sum(L, "z")
    if chi:
        out = out + chi * axis_sum(L, "y")
    return out


def mfi_sparse(model: TfiCircular, amp: float, nu: float, chi: float = 0.0) -> sp.csr_matrix:
    parts = model.sparse_parts()
    diag = parts["static_diag"] - 0.5 * nu * parts["z_diag"]
    h = sp.diags(diag.astype(complex)) + amp * parts["sx"]
    if chi:
        h = h + chi * parts["sy"]
    return h.tocsr()
