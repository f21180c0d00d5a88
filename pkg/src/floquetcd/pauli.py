"""Pauli-string algebra for spin-1/2 chains.

Strings are kept symbolic (site/axis factors with complex weights) so that
commutators and period-averaged traces of chain operators cost O(#terms)
instead of O(4^L).  Strings compile to a permutation + phase pair acting on
the computational basis; dense matrices are materialized only on request.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .operators import HarmonicOperator

__all__ = [
    "PauliStringSpec",
    "pauli_compile",
    "PauliSum",
    "HarmonicPauliSum",
    "axis_sum",
    "zz_chain",
]

MAX_DENSE_SITES = 14

# single-site products: sigma^a sigma^b = table[(a,b)][1] * sigma^{table[(a,b)][0]}
_MUL: dict[tuple[str, str], tuple[str | None, complex]] = {
    ("x", "x"): (None, 1.0),
    ("y", "y"): (None, 1.0),
    ("z", "z"): (None, 1.0),
    ("x", "y"): ("z", 1.0j),
    ("y", "x"): ("z", -1.0j),
    ("y", "z"): ("x", 1.0j),
    ("z", "y"): ("x", -1.0j),
    ("z", "x"): ("y", 1.0j),
    ("x", "z"): ("y", -1.0j),
}

Key = tuple[tuple[int, str], ...]


@dataclass(frozen=True)
class PauliStringSpec:
    """A single Pauli string ``prod_j sigma_{site_j}^{axis_j}`` on ``length`` sites."""

    length: int
    factors: Key

    def __post_init__(self) -> None:
        sites = [s for s, _ in self.factors]
        if len(set(sites)) != len(sites):
            raise ValueError("duplicate sites in Pauli string")
        if any(s < 0 or s >= self.length for s in sites):
            raise ValueError("site index out of range")
        if any(a not in "xyz" for _, a in self.factors):
            raise ValueError("axes must be one of x, y, z")
        object.__setattr__(self, "factors", tuple(sorted(self.factors)))


def _string_action(length: int, factors: Key) -> tuple[int, np.ndarray]:
    """Compile a string to (flip mask, per-input-index phase).

    Site ``j`` occupies bit ``length - 1 - j`` (kron ordering, site 0
    leftmost).  The matrix acts as ``(M psi)[k] = phase[k ^ mask] *
    psi[k ^ mask]`` since XOR permutations are involutions.
    """
    dim = 1 << length
    mask = 0
    phase = np.ones(dim, dtype=complex)
    idx = np.arange(dim)
    for site, axis in factors:
        bit = 1 << (length - 1 - site)
        occupied = (idx & bit) != 0
        if axis == "x":
            mask ^= bit
        elif axis == "y":
            mask ^= bit
            phase *= np.where(occupied, -1.0j, 1.0j)
        else:
            phase *= np.where(occupied, -1.0, 1.0)
    return mask, phase


def pauli_compile(spec: PauliStringSpec, max_sites: int = MAX_DENSE_SITES) -> np.ndarray:
    """Dense ``2^L x 2^L`` matrix of a Pauli string (identity on other sites)."""
    if spec.length > max_sites:
        raise ValueError(f"L={spec.length} exceeds dense cap {max_sites}")
    dim = 1 << spec.length
    mask, phase = _string_action(spec.length, spec.factors)
    mat = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    mat[idx ^ mask, idx] = phase
    return mat


class PauliSum:
    """Linear combination of Pauli strings with complex weights."""

    __slots__ = ("length", "terms")

    def __init__(self, length: int, terms: Mapping[Key, complex] | None = None):
        self.length = length
        self.terms: dict[Key, complex] = dict(terms or {})

    @classmethod
    def from_string(cls, length: int, factors: Iterable[tuple[int, str]], coeff: complex = 1.0) -> "PauliSum":
        key = tuple(sorted(factors))
        return cls(length, {key: complex(coeff)})

    @classmethod
    def identity(cls, length: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(length, {(): complex(coeff)})

    def copy(self) -> "PauliSum":
        return PauliSum(self.length, self.terms)

    def __iter__(self) -> Iterator[tuple[Key, complex]]:
        return iter(self.terms.items())

    def __len__(self) -> int:
        return len(self.terms)

    def _check(self, other: "PauliSum") -> None:
        if other.length != self.length:
            raise ValueError("chain length mismatch")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) + v
        return PauliSum(self.length, out)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> "PauliSum":
        return PauliSum(self.length, {k: scalar * v for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "PauliSum":
        return (-1.0) * self

    def prune(self, tol: float = 0.0) -> "PauliSum":
        return PauliSum(self.length, {k: v for k, v in self.terms.items() if abs(v) > tol})

    def matmul(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        out: dict[Key, complex] = {}
        for ka, va in self.terms.items():
            da = dict(ka)
            for kb, vb in other.terms.items():
                coeff = va * vb
                factors = dict(da)
                for site, axis in kb:
                    if site in factors:
                        new_axis, ph = _MUL[(factors[site], axis)]
                        coeff *= ph
                        if new_axis is None:
                            del factors[site]
                        else:
                            factors[site] = new_axis
                    else:
                        factors[site] = axis
                key = tuple(sorted(factors.items()))
                out[key] = out.get(key, 0.0) + coeff
        return PauliSum(self.length, out).prune()

    def commutator(self, other: "PauliSum") -> "PauliSum":
        return self.matmul(other) - other.matmul(self)

    def dagger(self) -> "PauliSum":
        return PauliSum(self.length, {k: np.conj(v) for k, v in self.terms.items()})

    def trace_pair(self, other: "PauliSum") -> complex:
        """``Tr(A B)``; strings are orthogonal with ``Tr(s s) = 2^L``."""
        self._check(other)
        small, big = (self.terms, other.terms) if len(self) < len(other) else (other.terms, self.terms)
        acc = sum(v * big[k] for k, v in small.items() if k in big)
        return complex((1 << self.length) * acc)

    def to_dense(self) -> np.ndarray:
        dim = 1 << self.length
        mat = np.zeros((dim, dim), dtype=complex)
        idx = np.arange(dim)
        for key, coeff in self.terms.items():
            mask, phase = _string_action(self.length, key)
            mat[idx ^ mask, idx] += coeff * phase
        return mat

    def compiled(self) -> list[tuple[complex, int, np.ndarray]]:
        return [
            (coeff, *_string_action(self.length, key)) for key, coeff in self.terms.items()
        ]

    def apply(self, psi: np.ndarray, compiled=None) -> np.ndarray:
        """``(sum_s c_s sigma_s) @ psi`` via permutation/phase actions."""
        ops = compiled if compiled is not None else self.compiled()
        out = np.zeros_like(psi, dtype=complex)
        idx = np.arange(psi.shape[0])
        for coeff, mask, phase in ops:
            src = idx ^ mask
            out += coeff * phase[src] * psi[src]
        return out


def axis_sum(length: int, axis: str) -> PauliSum:
    """``sum_j sigma_j^axis``."""
    terms = {((j, axis),): 1.0 + 0.0j for j in range(length)}
    return PauliSum(length, terms)


def zz_chain(length: int, periodic: bool = True) -> PauliSum:
    """``sum_j sigma_j^z sigma_{j+1}^z`` with optional periodic closure."""
    terms: dict[Key, complex] = {}
    bonds = range(length) if periodic else range(length - 1)
    for j in bonds:
        key = tuple(sorted([(j, "z"), ((j + 1) % length, "z")]))
        terms[key] = terms.get(key, 0.0) + 1.0
    return PauliSum(length, terms)


class HarmonicPauliSum:
    """Fourier-harmonic-resolved Pauli sum: ``X(t) = sum_l X_l exp(i l omega t)``."""

    __slots__ = ("omega", "length", "blocks")

    def __init__(self, omega: float, length: int, blocks: Mapping[int, PauliSum] | None = None):
        self.omega = omega
        self.length = length
        self.blocks: dict[int, PauliSum] = {}
        for ell, ps in (blocks or {}).items():
            if len(ps):
                self.blocks[int(ell)] = ps

    @classmethod
    def from_terms(
        cls,
        omega: float,
        length: int,
        terms: Iterable[tuple[PauliSum, int, str]],
    ) -> "HarmonicPauliSum":
        blocks: dict[int, PauliSum] = {}

        def add(ell: int, ps: PauliSum) -> None:
            blocks[ell] = blocks[ell] + ps if ell in blocks else ps

        for ps, ell, flavor in terms:
            if flavor == "const":
                add(0, ps)
            elif flavor == "cos":
                add(ell, 0.5 * ps)
                add(-ell, 0.5 * ps)
            elif flavor == "sin":
                add(ell, -0.5j * ps)
                add(-ell, 0.5j * ps)
            elif flavor == "exp":
                add(ell, ps)
            else:
                raise ValueError(f"unknown flavor {flavor!r}")
        return cls(omega, length, blocks)

    @property
    def n_h(self) -> int:
        return max((abs(l) for l in self.blocks), default=0)

    def block(self, ell: int) -> PauliSum:
        return self.blocks.get(ell, PauliSum(self.length))

    def _check(self, other: "HarmonicPauliSum") -> None:
        if other.length != self.length:
            raise ValueError("chain length mismatch")
        if abs(other.omega - self.omega) > 1e-12 * max(1.0, abs(self.omega)):
            raise ValueError("frequency mismatch")

    def __add__(self, other: "HarmonicPauliSum") -> "HarmonicPauliSum":
        self._check(other)
        blocks = dict(self.blocks)
        for ell, ps in other.blocks.items():
            blocks[ell] = blocks[ell] + ps if ell in blocks else ps
        return HarmonicPauliSum(self.omega, self.length, blocks)

    def __sub__(self, other: "HarmonicPauliSum") -> "HarmonicPauliSum":
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> "HarmonicPauliSum":
        return HarmonicPauliSum(
            self.omega, self.length, {l: scalar * ps for l, ps in self.blocks.items()}
        )

    __rmul__ = __mul__

    def commutator(self, other: "HarmonicPauliSum", truncate_to: int | None = None) -> "HarmonicPauliSum":
        self._check(other)
        blocks: dict[int, PauliSum] = {}
        for la, pa in self.blocks.items():
            for lb, pb in other.blocks.items():
                ell = la + lb
                if truncate_to is not None and abs(ell) > truncate_to:
                    continue
                c = pa.commutator(pb)
                if len(c):
                    blocks[ell] = blocks[ell] + c if ell in blocks else c
        return HarmonicPauliSum(self.omega, self.length, blocks)

    def time_derivative(self, omega: float | None = None) -> "HarmonicPauliSum":
        w = self.omega if omega is None else omega
        return HarmonicPauliSum(
            self.omega,
            self.length,
            {l: (1j * w * l) * ps for l, ps in self.blocks.items() if l != 0},
        )

    def truncated(self, n_h: int) -> "HarmonicPauliSum":
        return HarmonicPauliSum(
            self.omega, self.length, {l: ps for l, ps in self.blocks.items() if abs(l) <= n_h}
        )

    def is_hermitian_valued(self, tol: float = 1e-12) -> bool:
        for ell, ps in self.blocks.items():
            other = self.block(-ell).dagger()
            diff = ps - other
            if any(abs(v) > tol for v in diff.terms.values()):
                return False
        return True

    def trace_pair(self, other: "HarmonicPauliSum") -> complex:
        """Period-averaged ``(1/T) int Tr(A(t)B(t)) dt``."""
        self._check(other)
        acc = 0.0 + 0.0j
        for ell, ps in self.blocks.items():
            q = other.blocks.get(-ell)
            if q is not None:
                acc += ps.trace_pair(q)
        return acc

    def evaluate_phase(self, phi: float) -> PauliSum:
        out = PauliSum(self.length)
        for ell, ps in self.blocks.items():
            out = out + np.exp(1j * ell * phi) * ps
        return out

    def compiled(self) -> dict[int, list]:
        return {ell: ps.compiled() for ell, ps in self.blocks.items()}

    def apply_phase(self, phi: float, psi: np.ndarray, compiled=None) -> np.ndarray:
        """Apply ``X(phi)`` to a state without materializing matrices."""
        comp = compiled if compiled is not None else self.compiled()
        out = np.zeros_like(psi, dtype=complex)
        for ell, ops in comp.items():
            contrib = self.blocks[ell].apply(psi, compiled=ops)
            out += np.exp(1j * ell * phi) * contrib
        return out

    def to_harmonic_operator(self, n_h: int | None = None) -> HarmonicOperator:
        nh = self.n_h if n_h is None else n_h
        dim = 1 << self.length
        coeffs = np.zeros((2 * nh + 1, dim, dim), dtype=complex)
        for ell, ps in self.blocks.items():
            if abs(ell) <= nh:
                coeffs[nh + ell] = ps.to_dense()
        return HarmonicOperator(self.omega, coeffs)
