import numpy as np
import pytest
from scipy.linalg import expm

from floquetcd.ife import (
    FrameExpansion,
    StaticFrameModel,
    ife_solution,
    lift_to_lab_frame,
    static_floquet_frame_agp,
    validate_frame_expansion,
)
from floquetcd.operators import SPIN, commutator, dagger, is_hermitian
from floquetcd.variational import AnsatzSpec, element

RNG = np.random.default_rng(13)


def linear_2ls_expansion(g, omega):
    return FrameExpansion.lowest_order(
        omega,
        hf=lambda lam: lam * SPIN["z"] + g * SPIN["x"],
        dhf=lambda lam: np.asarray(SPIN["z"]),
    )


def test_lowest_order_reproduces_textbook_coefficient():
    exp = linear_2ls_expansion(1.0, 100.0)
    ansatz = AnsatzSpec(elements=(element(SPIN["y"], 0, "const"),))
    for lam in (-2.0, 0.3, 1.5):
        chi = static_floquet_frame_agp(exp, lam, ansatz)
        assert chi[0] == pytest.approx(-1.0 / (lam**2 + 1.0), rel=1e-12)


def test_zero_hybridization_gives_zero():
    exp = linear_2ls_expansion(0.0, 100.0)
    ansatz = AnsatzSpec(elements=(element(SPIN["y"], 0, "const"),))
    chi = static_floquet_frame_agp(exp, 0.7, ansatz)
    assert abs(chi[0]) < 1e-14


def gell_mann_like(dim):
    """Traceless Hermitian basis of dim x dim matrices."""
    out = []
    for i in range(dim):
        for j in range(i + 1, dim):
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j] = m[j, i] = 1.0
            out.append(m)
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j] = -1.0j
            m[j, i] = 1.0j
            out.append(m)
    for k in range(1, dim):
        m = np.zeros((dim, dim), dtype=complex)
        m[:k, :k] = np.eye(k)
        m[k, k] = -k
        out.append(m / np.sqrt(k * (k + 1) / 2))
    return out


def spectral_gauge_potential(h, dh):
    """Exact static gauge potential from the eigen-decomposition."""
    evals, vecs = np.linalg.eigh(h)
    a = np.zeros_like(h)
    for n in range(len(evals)):
        for m in range(len(evals)):
            if n == m:
                continue
            a[n, m] = 1j * (vecs[:, n].conj() @ dh @ vecs[:, m]) / (evals[m] - evals[n])
    return vecs @ a @ dagger(vecs)


def test_complete_basis_matches_spectral_oracle():
    base = RNG.normal(size=(3, 3)) + 1j * RNG.normal(size=(3, 3))
    base = 0.5 * (base + base.conj().T)
    pert = RNG.normal(size=(3, 3)) + 1j * RNG.normal(size=(3, 3))
    pert = 0.5 * (pert + pert.conj().T)
    exp = FrameExpansion.lowest_order(
        10.0, hf=lambda lam: base + lam * pert, dhf=lambda lam: pert
    )
    ansatz = AnsatzSpec(elements=tuple(element(m, 0, "const") for m in gell_mann_like(3)))
    lam = 0.4
    chi = static_floquet_frame_agp(exp, lam, ansatz)
    x = sum(c * e.terms[0][0] for c, e in zip(chi, ansatz.elements))
    oracle = spectral_gauge_potential(base + lam * pert, pert)
    assert np.max(np.abs(x - oracle)) < 1e-8


# ---------------------------------------------------------------------------
# lab-frame lift
# ---------------------------------------------------------------------------


def random_kick(dim, scale, rng=RNG):
    k = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    k = 0.5 * (k + k.conj().T)
    return scale * k / np.max(np.abs(np.linalg.eigvalsh(k)))


def test_lift_order_zero_is_identity_map():
    exp = linear_2ls_expansion(1.0, 100.0)
    xf = np.asarray(SPIN["y"])
    assert np.allclose(lift_to_lab_frame(xf, exp, 0.3, 0.1), xf)


def test_lift_order_one_formula():
    k_mat = random_kick(2, 0.3)
    dk_mat = random_kick(2, 0.2)
    exp = FrameExpansion(
        order=1,
        omega=10.0,
        hf=lambda lam: np.asarray(SPIN["z"]),
        dhf=lambda lam: np.asarray(SPIN["z"]),
        k=lambda lam, t: k_mat * np.cos(10.0 * t),
        dk=lambda lam, t: dk_mat * np.cos(10.0 * t),
    )
    xf = np.asarray(SPIN["y"])
    t = 0.21
    got = lift_to_lab_frame(xf, exp, 0.0, t)
    kc, dkc = k_mat * np.cos(10.0 * t), dk_mat * np.cos(10.0 * t)
    expected = xf + 1j * commutator(kc, xf) + dkc
    assert np.max(np.abs(got - expected)) < 1e-12
    assert is_hermitian(got, tol=1e-12)


def test_high_order_lift_matches_exponential_conjugation():
    # the nested sums resum the exact conjugation and the phase-integrated
    # derivative term for a small kick
    dim = 3
    k_mat = random_kick(dim, 0.05)
    dk_mat = random_kick(dim, 0.05)
    xf = random_kick(dim, 1.0)
    exp = FrameExpansion(
        order=6,
        omega=5.0,
        hf=lambda lam: np.zeros((dim, dim), dtype=complex),
        dhf=lambda lam: np.zeros((dim, dim), dtype=complex),
        k=lambda lam, t: k_mat,
        dk=lambda lam, t: dk_mat,
    )
    got = lift_to_lab_frame(xf, exp, 0.0, 0.0, ad_cutoff=12)
    conj = expm(1j * k_mat) @ xf @ expm(-1j * k_mat)
    us = np.linspace(0, 1, 4001)
    integ = np.zeros_like(xf)
    for u in us:
        integ += expm(-1j * u * k_mat) @ dk_mat @ expm(1j * u * k_mat)
    integ /= len(us)
    assert np.max(np.abs(got - (conj + integ))) < 1e-6


def test_lift_preserves_hermiticity_at_every_order():
    k_mat = random_kick(2, 0.4)
    exp = FrameExpansion(
        order=2,
        omega=7.0,
        hf=lambda lam: np.asarray(SPIN["z"]),
        dhf=lambda lam: np.asarray(SPIN["z"]),
        k=lambda lam, t: k_mat * np.sin(7.0 * t),
        dk=lambda lam, t: 0.5 * k_mat * np.sin(7.0 * t),
    )
    xf = np.asarray(SPIN["y"])
    for order in (0, 1, 2, 4):
        for t in (0.0, 0.11, 0.5):
            assert is_hermitian(lift_to_lab_frame(xf, exp, 0.1, t, order=order), tol=1e-12)


def test_validate_frame_expansion():
    exp = linear_2ls_expansion(1.0, 10.0)
    validate_frame_expansion(exp, 0.5)
    bad = FrameExpansion(
        order=1,
        omega=10.0,
        hf=lambda lam: np.asarray(SPIN["z"]),
        dhf=lambda lam: np.asarray(SPIN["z"]),
        k=lambda lam, t: np.eye(2, dtype=complex),  # non-zero average
        dk=lambda lam, t: np.zeros((2, 2), dtype=complex),
    )
    with pytest.raises(ValueError):
        validate_frame_expansion(bad, 0.5)


def test_ife_solution_grid():
    exp = linear_2ls_expansion(1.0, 100.0)
    ansatz = AnsatzSpec(elements=(element(SPIN["y"], 0, "const"),))
    sol = ife_solution(exp, ansatz, (-5.0, 5.0), eps=1e-6)
    for lam in np.linspace(-4.9, 4.9, 21):
        assert sol.coefficients(lam)[0] == pytest.approx(-1 / (lam**2 + 1), abs=2e-6)
    with pytest.raises(ValueError):
        ife_solution(exp, AnsatzSpec(elements=(element(SPIN["y"], 1, "cos"),)), (-1, 1))
