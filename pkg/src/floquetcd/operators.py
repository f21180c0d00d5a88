"""Dense complex operator algebra and Fourier-harmonic representations.

Operators are plain complex ``numpy`` arrays.  A time-periodic operator
``X(t) = sum_l X_l exp(i*l*omega*t)`` is stored as a :class:`HarmonicOperator`
holding the stack of coefficient matrices ``X_l`` for ``l in [-n_h, n_h]``.
All pairings between periodic operators use the period-averaged trace
``(1/T) int_0^T Tr(A(t) B(t)) dt``, which for harmonic data reduces to the
analytic contraction ``sum_l Tr(A_l B_{-l})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "SIGMA",
    "SPIN",
    "commutator",
    "anticommutator",
    "dagger",
    "is_hermitian",
    "hermitize",
    "HarmonicOperator",
    "harmonic_multiply",
    "harmonic_commutator",
    "harmonic_time_derivative",
    "evaluate_at",
    "trace_pair",
    "trace_period_norm",
    "fit_harmonics",
]

HERMITICITY_TOL = 1e-12

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_ID = np.eye(2, dtype=complex)

#: Pauli matrices keyed by axis.
SIGMA = {"x": _SX, "y": _SY, "z": _SZ, "i": _ID}
#: Spin-1/2 operators ``S^a = sigma^a / 2``.
SPIN = {k: 0.5 * v for k, v in SIGMA.items() if k != "i"}


def _as_matrix(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("operator entries must be finite")
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    return bool(np.max(np.abs(a - dagger(a))) < tol)


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix commutator ``ab - ba``."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


# ---------------------------------------------------------------------------
# Harmonic (Fourier) representation of time-periodic operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarmonicOperator:
    """Time-periodic operator stored as Fourier coefficient matrices.

    ``coeffs[k]`` is the matrix multiplying ``exp(i*(k - n_h)*omega*t)``.

    Attributes:
        omega: Angular drive frequency (rad / time unit).
        coeffs: Complex array of shape ``(2*n_h + 1, dim, dim)``.
    """

    omega: float
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[0] % 2 == 0:
            raise ValueError(f"bad harmonic coefficient shape {c.shape}")
        if not np.all(np.isfinite(c.view(float))):
            raise ValueError("harmonic coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- construction -------------------------------------------------

    @classmethod
    def zero(cls, omega: float, n_h: int, dim: int) -> "HarmonicOperator":
        return cls(omega, np.zeros((2 * n_h + 1, dim, dim), dtype=complex))

    @classmethod
    def from_static(cls, omega: float, mat: np.ndarray, n_h: int = 0) -> "HarmonicOperator":
        mat = _as_matrix(mat)
        out = np.zeros((2 * n_h + 1, *mat.shape), dtype=complex)
        out[n_h] = mat
        return cls(omega, out)

    @classmethod
    def from_terms(
        cls,
        omega: float,
        terms: Iterable[tuple[np.ndarray, int, str]],
        n_h: int | None = None,
        weights: Sequence[float] | None = None,
    ) -> "HarmonicOperator":
        """Build from ``(matrix, harmonic l >= 0, flavor)`` terms.

        Flavors: ``const`` (l must be 0), ``cos`` -> cos(l*omega*t),
        ``sin`` -> sin(l*omega*t) and ``exp`` -> exp(i*l*omega*t).  The
        trigonometric flavors with Hermitian matrices produce
        Hermitian-valued operators by construction.
        """
        terms = list(terms)
        if weights is None:
            weights = [1.0] * len(terms)
        ells = [abs(t[1]) for t in terms]
        nh = max(ells, default=0) if n_h is None else n_h
        dim = _as_matrix(terms[0][0]).shape[0]
        out = np.zeros((2 * nh + 1, dim, dim), dtype=complex)
        for (mat, ell, flavor), w in zip(terms, weights):
            mat = w * _as_matrix(mat)
            if abs(ell) > nh:
                raise ValueError(f"harmonic {ell} exceeds cutoff {nh}")
            if flavor == "const":
                if ell != 0:
                    raise ValueError("const terms must carry harmonic 0")
                out[nh] += mat
            elif flavor == "cos":
                out[nh + ell] += 0.5 * mat
                out[nh - ell] += 0.5 * mat
            elif flavor == "sin":
                out[nh + ell] += -0.5j * mat
                out[nh - ell] += 0.5j * mat
            elif flavor == "exp":
                out[nh + ell] += mat
            else:
                raise ValueError(f"unknown flavor {flavor!r}")
        return cls(omega, out)

    # -- basic queries -------------------------------------------------

    @property
    def n_h(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def coeff(self, ell: int) -> np.ndarray:
        if abs(ell) > self.n_h:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return self.coeffs[self.n_h + ell]

    def evaluate(self, t: float | np.ndarray) -> np.ndarray:
        """Evaluate ``sum_l X_l exp(i*l*omega*t)`` at time(s) ``t``."""
        return self.evaluate_phase(self.omega * np.asarray(t))

    def evaluate_phase(self, phi: float | np.ndarray) -> np.ndarray:
        """Evaluate at drive phase ``phi = omega*t`` directly."""
        phi = np.asarray(phi, dtype=float)
        ells = np.arange(-self.n_h, self.n_h + 1)
        phases = np.exp(1j * np.multiply.outer(phi, ells))
        return np.tensordot(phases, self.coeffs, axes=([phi.ndim], [0]))

    def is_hermitian_valued(self, tol: float = HERMITICITY_TOL) -> bool:
        flipped = dagger(self.coeffs[::-1])
        return bool(np.max(np.abs(self.coeffs - flipped)) < tol)

    def max_coeff_norm(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    # -- structural ops ------------------------------------------------

    def padded(self, n_h: int) -> "HarmonicOperator":
        if n_h < self.n_h:
            raise ValueError("padded() cannot shrink; use truncated()")
        extra = n_h - self.n_h
        pad = np.zeros((extra, self.dim, self.dim), dtype=complex)
        return HarmonicOperator(self.omega, np.concatenate([pad, self.coeffs, pad]))

    def truncated(self, n_h: int) -> "HarmonicOperator":
        if n_h >= self.n_h:
            return self.padded(n_h) if n_h > self.n_h else self
        cut = self.n_h - n_h
        return HarmonicOperator(self.omega, self.coeffs[cut:-cut].copy())

    def dagger_valued(self) -> "HarmonicOperator":
        """Coefficients of ``X(t)^dagger``: ``(X^dag)_l = X_{-l}^dag``."""
        return HarmonicOperator(self.omega, dagger(self.coeffs[::-1]))

    def with_omega(self, omega: float) -> "HarmonicOperator":
        return HarmonicOperator(omega, self.coeffs)

    # -- arithmetic ------------------------------------------------------

    def _binary(self, other: "HarmonicOperator", sign: float) -> "HarmonicOperator":
        if abs(other.omega - self.omega) > 1e-12 * max(1.0, abs(self.omega)):
            raise ValueError("frequency mismatch")
        nh = max(self.n_h, other.n_h)
        a, b = self.padded(nh), other.padded(nh)
        return HarmonicOperator(self.omega, a.coeffs + sign * b.coeffs)

    def __add__(self, other: "HarmonicOperator") -> "HarmonicOperator":
        return self._binary(other, 1.0)

    def __sub__(self, other: "HarmonicOperator") -> "HarmonicOperator":
        return self._binary(other, -1.0)

    def __mul__(self, scalar: complex) -> "HarmonicOperator":
        return HarmonicOperator(self.omega, scalar * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "HarmonicOperator":
        return HarmonicOperator(self.omega, -self.coeffs)


def harmonic_multiply(
    a: HarmonicOperator, b: HarmonicOperator, truncate_to: int | None = None
) -> HarmonicOperator:
    """Product of two harmonic operators with harmonic cutoff.

    The coefficient at ``l`` is ``sum_{m+n=l} A_m B_n``; harmonics with
    ``|l| > truncate_to`` are dropped (closure of the truncated algebra).
    """
    if abs(a.omega - b.omega) > 1e-12 * max(1.0, abs(a.omega)):
        raise ValueError("frequency mismatch")
    full = a.n_h + b.n_h
    out = np.zeros((2 * full + 1, a.dim, a.dim), dtype=complex)
    for m in range(-a.n_h, a.n_h + 1):
        am = a.coeffs[a.n_h + m]
        if not am.any():
            continue
        lo, hi = m - b.n_h, m + b.n_h
        out[full + lo : full + hi + 1] += np.einsum(
            "ij,njk->nik", am, b.coeffs, optimize=True
        )
    prod = HarmonicOperator(a.omega, out)
    if truncate_to is not None and truncate_to < full:
        prod = prod.truncated(truncate_to)
    return prod


def harmonic_commutator(
    a: HarmonicOperator, b: HarmonicOperator, truncate_to: int | None = None
) -> HarmonicOperator:
    """``[A, B](t)`` as a harmonic operator, optionally truncated."""
    return harmonic_multiply(a, b, truncate_to) - harmonic_multiply(b, a, truncate_to)


def harmonic_time_derivative(
    x: HarmonicOperator, omega: float | None = None
) -> HarmonicOperator:
    """Time derivative: coefficient at ``l`` becomes ``i*l*omega*X_l``.

    ``omega`` overrides the frequency used in the derivative; chirped
    problems differentiate with the instantaneous frequency while the
    harmonic bookkeeping stays tied to the drive phase.
    """
    w = x.omega if omega is None else omega
    ells = np.arange(-x.n_h, x.n_h + 1)
    return HarmonicOperator(x.omega, (1j * w * ells)[:, None, None] * x.coeffs)


def evaluate_at(x: HarmonicOperator, t: float) -> np.ndarray:
    return x.evaluate(t)


def trace_pair(a: HarmonicOperator, b: HarmonicOperator) -> complex:
    """Period-averaged trace pairing ``(1/T) int Tr(A(t) B(t)) dt``.

    Equals the harmonic contraction ``sum_l Tr(A_l B_{-l})``.
    """
    nh = min(a.n_h, b.n_h)
    ac = a.coeffs[a.n_h - nh : a.n_h + nh + 1]
    bc = b.coeffs[b.n_h - nh : b.n_h + nh + 1][::-1]
    return complex(np.einsum("nij,nji->", ac, bc, optimize=True))


def trace_period_norm(g: HarmonicOperator) -> float:
    """``(1/T) int Tr(G(t)^2) dt`` for a Hermitian-valued ``G``.

    Returns ``sum_l Tr(G_l G_l^dagger) >= 0``.
    """
    if not g.is_hermitian_valued(tol=1e-10):
        raise ValueError("trace_period_norm requires a Hermitian-valued operator")
    val = np.einsum("nij,nij->", g.coeffs, np.conj(g.coeffs), optimize=True)
    return float(val.real)


def fit_harmonics(
    fn: Callable[[np.ndarray], np.ndarray],
    omega: float,
    n_h: int,
    n_samples: int | None = None,
) -> HarmonicOperator:
    """Fit harmonic coefficients of a periodic matrix-valued function.

    ``fn`` maps an array of phases ``phi`` to stacked matrices of shape
    ``(len(phi), dim, dim)``.  Uses a uniform-grid DFT, exact for
    band-limited inputs with fewer than ``n_samples`` harmonics.
    """
    m = n_samples if n_samples is not None else max(4 * n_h + 2, 64)
    phi = 2.0 * np.pi * np.arange(m) / m
    samples = np.asarray(fn(phi), dtype=complex)
    # coefficient at l: (1/M) sum_k f(phi_k) exp(-i l phi_k)
    spec = np.fft.fft(samples, axis=0) / m
    ells = np.arange(-n_h, n_h + 1)
    coeffs = spec[np.mod(ells, m)]
    return HarmonicOperator(omega, coeffs)
