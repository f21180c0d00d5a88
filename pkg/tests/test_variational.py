import numpy as np
import pytest

from floquetcd.models import (
    TfiCircular,
    TwoLevelCircular,
    TwoLevelLinear,
    circular2ls_analytic_agp,
)
from floquetcd.operators import SPIN, HarmonicOperator, trace_pair
from floquetcd.pauli import axis_sum
from floquetcd.variational import (
    AnsatzElement,
    AnsatzSpec,
    FixedFrequency,
    GroundStateNorm,
    TraceNorm,
    VariationalProblem,
    action_value,
    assemble_g,
    assemble_linear_system,
    element,
    pauli_element,
    residual_action,
    solve_lambda_grid,
    solve_system,
)

RNG = np.random.default_rng(21)


def linear_2ls_ansatz():
    """The four-parameter basis (y0, x1, y1, z1) used for the driven qubit."""
    return AnsatzSpec(
        elements=(
            element(SPIN["y"], 0, "const", label="y0"),
            element(SPIN["x"], 1, "sin", label="x1"),
            element(SPIN["y"], 1, "cos", label="y1"),
            element(SPIN["z"], 1, "sin", label="z1"),
        )
    )


def circular_pair_ansatz():
    return AnsatzSpec(
        elements=(
            element(SPIN["y"], 1, "cos", label="cos_sy"),
            element(SPIN["x"], 1, "sin", label="sin_sx"),
        )
    )


# ---------------------------------------------------------------------------
# g assembly
# ---------------------------------------------------------------------------


def test_g_of_identity_vanishes():
    m = TwoLevelLinear(g=1.0, amp=2.5, omega=10.0)
    h, _ = m.hamiltonian(0.5)
    g = assemble_g(h, element(np.eye(2), 0, "const"))
    assert g.max_coeff_norm() < 1e-14


def test_g_matches_dense_commutator_oracle():
    # static S_y element against the driven qubit at ten sample times
    m = TwoLevelLinear(g=1.0, amp=2.5, omega=10.0)
    lam = 0.7
    h, _ = m.hamiltonian(lam)
    g = assemble_g(h, element(SPIN["y"], 0, "const"))
    for t in np.linspace(0.0, h.period, 10, endpoint=False):
        ht = lam * SPIN["z"] + (1.0 + 2.5 * np.cos(10.0 * t)) * SPIN["x"]
        oracle = 1j * (ht @ SPIN["y"] - SPIN["y"] @ ht)
        assert np.max(np.abs(g.evaluate(t) - oracle)) < 1e-12


def test_g_is_hermitian_valued():
    m = TwoLevelLinear(g=1.0, amp=2.5, omega=10.0)
    h, _ = m.hamiltonian(0.3)
    for e in linear_2ls_ansatz().elements:
        assert assemble_g(h, e, n_h=1).is_hermitian_valued()


# ---------------------------------------------------------------------------
# linear system assembly: hand-derived truncated entries
# ---------------------------------------------------------------------------


def expected_truncated_matrix(lam, g, amp, omega):
    """Period-averaged pairings of the four g's with harmonics above 1 dropped.

    Derived by expanding the trig products by hand; overall scale 1/4
    relative to integer-normalized entries.
    """
    m = np.array(
        [
            [2 * lam**2 + 2 * g**2 + amp**2, 0.0, 2 * g * amp, -omega * amp],
            [0.0, omega**2 + lam**2, 2 * lam * omega, -lam * g],
            [2 * g * amp, 2 * lam * omega, lam**2 + g**2 + omega**2 + amp**2 / 2, -2 * g * omega],
            [-omega * amp, -lam * g, -2 * g * omega, g**2 + omega**2],
        ]
    )
    return m / 4.0


def test_assembled_system_matches_hand_expansion():
    g, amp, omega = 1.0, 2.5, 100.0
    model = TwoLevelLinear(g=g, amp=amp, omega=omega)
    for lam in (-2.3, 0.0, 1.7):
        prob = assemble_linear_system(model, lam, linear_2ls_ansatz())
        assert np.max(np.abs(prob.m - expected_truncated_matrix(lam, g, amp, omega))) < 1e-10
        # driving term +dH/dlam pairs to -(2g, 0, A, 0)/4
        assert np.allclose(prob.b, -np.array([2 * g, 0.0, amp, 0.0]) / 4.0, atol=1e-12)
        prob.validate()


def quadrature_action(model, lam, elements, chi, n_pts=4096):
    """Independent time-domain action: fine quadrature, no harmonic algebra."""
    h, dh = model.hamiltonian(lam)
    omega = h.omega
    period = 2 * np.pi / omega

    def x_and_dx(t):
        x = np.zeros((2, 2), dtype=complex)
        dx = np.zeros((2, 2), dtype=complex)
        for c, e in zip(chi, elements):
            for op, ell, flavor, w in e.terms:
                if flavor == "const":
                    f, df = 1.0, 0.0
                elif flavor == "cos":
                    f, df = np.cos(ell * omega * t), -ell * omega * np.sin(ell * omega * t)
                else:
                    f, df = np.sin(ell * omega * t), ell * omega * np.cos(ell * omega * t)
                x += c * w * f * op
                dx += c * w * df * op
        return x, dx

    acc = 0.0
    for t in np.linspace(0.0, period, n_pts, endpoint=False):
        ht, dht = h.evaluate(t), dh.evaluate(t)
        x, dx = x_and_dx(t)
        gmat = 1j * (ht @ x - x @ ht) + dx - dht
        acc += np.trace(gmat @ gmat).real
    return acc / n_pts


def test_untruncated_action_matches_time_quadrature():
    model = TwoLevelLinear(g=1.0, amp=2.5, omega=10.0)
    ansatz = AnsatzSpec(elements=linear_2ls_ansatz().elements, n_h=2)  # no truncation
    lam = 0.9
    prob = assemble_linear_system(model, lam, ansatz)
    chi = RNG.normal(size=4)
    s_assembled = chi @ prob.m @ chi - 2 * prob.b @ chi + prob.const
    s_quad = quadrature_action(model, lam, ansatz.elements, chi)
    assert s_assembled == pytest.approx(s_quad, rel=1e-10)


def test_zero_driving_term_gives_zero_solution():
    # frequency sweep of the circular model: coefficients carry no omega
    model = TwoLevelCircular(delta=1.0, amp=0.5, omega=2.0, sweep="omega")
    prob = assemble_linear_system(model, 2.0, circular_pair_ansatz())
    assert np.allclose(prob.b, 0.0, atol=1e-14)
    assert np.allclose(solve_system(prob), 0.0, atol=1e-12)


def test_static_limit_recovers_textbook_coefficient():
    model = TwoLevelLinear(g=1.0, amp=0.0, omega=50.0)
    ansatz = AnsatzSpec(elements=(element(SPIN["y"], 0, "const"),))
    for lam in (-1.2, 0.4, 3.0):
        prob = assemble_linear_system(model, lam, ansatz)
        chi = solve_system(prob)
        assert chi[0] == pytest.approx(-1.0 / (lam**2 + 1.0), rel=1e-12)


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------


def test_solve_identity_system():
    prob = VariationalProblem(
        m=np.eye(3), b=np.array([1.0, 0, 0]), const=0.0, norm_label="trace", chirp_label="none"
    )
    assert np.allclose(solve_system(prob), [1.0, 0, 0])


def test_solve_singular_minimal_norm():
    m = np.array([[1.0, 1.0], [1.0, 1.0]])
    prob = VariationalProblem(m=m, b=np.array([2.0, 2.0]), const=0.0, norm_label="trace", chirp_label="none")
    chi = solve_system(prob)
    assert np.allclose(chi, [1.0, 1.0])  # minimal-norm representative


def test_high_frequency_limit_solution():
    g, amp, omega = 1.0, 2.5, 100.0
    model = TwoLevelLinear(g=g, amp=amp, omega=omega)
    for lam in np.linspace(-5 * g, 5 * g, 11):
        chi = solve_system(assemble_linear_system(model, lam, linear_2ls_ansatz()))
        y0, x1, y1, z1 = chi
        ref = g / (lam**2 + g**2)
        assert y0 < 0  # drives toward the instantaneous eigenbasis
        assert abs(abs(y0) - ref) / ref < 0.05
        assert abs(z1 - (amp / omega) * y0) / abs(z1) < 0.10
        assert abs(x1) < 0.05 * abs(y0) and abs(y1) < 0.05 * abs(y0)


def test_photon_resonance_solution_antisymmetric_pattern():
    g, amp, omega = 1.0, 2.5, 100.0
    model = TwoLevelLinear(g=g, amp=amp, omega=omega)
    for lam in omega + np.array([-2.0, -0.5, 0.0, 0.5, 2.0]):
        chi = solve_system(assemble_linear_system(model, lam, linear_2ls_ansatz()))
        y0, x1, y1, z1 = chi
        eta = 2 * amp / (4 * (lam - omega) ** 2 + amp**2)
        assert abs(x1 + y1) < 0.05 * eta  # antisymmetric pair
        assert abs(abs(x1) - eta) / eta < 0.05
        assert abs(y0) < 0.05 * eta and abs(z1) < 0.05 * eta


def test_sign_flip_of_driving_term_flips_solution():
    model = TwoLevelLinear(g=1.0, amp=2.5, omega=100.0)
    prob = assemble_linear_system(model, 0.4, linear_2ls_ansatz())
    chi = solve_system(prob)
    flipped = VariationalProblem(
        m=prob.m, b=-prob.b, const=prob.const, norm_label="trace", chirp_label="none"
    )
    assert np.allclose(solve_system(flipped), -chi, atol=1e-14)


# ---------------------------------------------------------------------------
# action properties
# ---------------------------------------------------------------------------


def test_optimal_action_never_exceeds_zero_ansatz():
    model = TwoLevelLinear(g=1.0, amp=2.5, omega=100.0)
    for lam in (-1.0, 0.2, 99.0):
        prob = assemble_linear_system(model, lam, linear_2ls_ansatz())
        chi = solve_system(prob)
        assert residual_action(prob, chi) <= prob.const + 1e-12


def test_matrix_is_psd_across_models_and_norms():
    model = TwoLevelLinear(g=1.0, amp=2.5, omega=100.0)
    for lam in np.linspace(-5, 5, 7):
        prob = assemble_linear_system(model, lam, linear_2ls_ansatz())
        prob.validate()


def test_nested_ansatz_monotonicity():
    model = TwoLevelLinear(g=1.0, amp=2.5, omega=10.0)
    base_pool = [
        element(SPIN["y"], 0, "const"),
        element(SPIN["x"], 1, "sin"),
        element(SPIN["y"], 1, "cos"),
        element(SPIN["z"], 1, "sin"),
        element(SPIN["x"], 2, "sin"),
        element(SPIN["y"], 2, "cos"),
        element(SPIN["z"], 2, "sin"),
        element(SPIN["x"], 0, "const"),
        element(SPIN["z"], 0, "const"),
        element(SPIN["y"], 2, "sin"),
    ]
    lam = 0.8
    for trial in range(20):
        k = RNG.integers(1, len(base_pool) - 1)
        picks = RNG.permutation(len(base_pool))
        small = AnsatzSpec(elements=tuple(base_pool[i] for i in picks[:k]), n_h=3)
        big = AnsatzSpec(
            elements=tuple(base_pool[i] for i in picks[: k + RNG.integers(1, 3)]), n_h=3
        )
        ps = assemble_linear_system(model, lam, small)
        pb = assemble_linear_system(model, lam, big)
        s_small = residual_action(ps, solve_system(ps))
        s_big = residual_action(pb, solve_system(pb))
        assert s_big <= s_small + 1e-9 * abs(s_small)


def test_complete_basis_converges_to_oracle():
    from floquetcd.floquet import oracle_harmonics

    g, amp, omega = 1.0, 2.5, 100.0
    model = TwoLevelLinear(g=g, amp=amp, omega=omega)
    lam = 0.5
    family = lambda l: model.hamiltonian(l)[0]
    a_ref = oracle_harmonics(family, lam, n_h=8, dlam=1e-5)
    errs = []
    for n_h in (1, 2, 4, 8):
        elements = [
            element(SPIN[a], 0, "const", label=f"{a}0") for a in "xyz"
        ]
        for ell in range(1, n_h + 1):
            for a in "xyz":
                elements.append(element(SPIN[a], ell, "cos", label=f"{a}{ell}c"))
                elements.append(element(SPIN[a], ell, "sin", label=f"{a}{ell}s"))
        ansatz = AnsatzSpec(elements=tuple(elements), n_h=n_h)
        chi = solve_system(assemble_linear_system(model, lam, ansatz))
        x = HarmonicOperator.from_terms(
            omega,
            [(t[0], t[1], t[2]) for e in ansatz.elements for t in e.terms],
            n_h=n_h,
            weights=[c * t[3] for c, e in zip(chi, ansatz.elements) for t in e.terms],
        )
        ts = np.linspace(0, 2 * np.pi / omega, 17, endpoint=False)
        err = max(np.max(np.abs(x.evaluate(t) - a_ref.evaluate(t))) for t in ts)
        errs.append(err)
    assert all(errs[i + 1] <= errs[i] * (1 + 1e-9) for i in range(len(errs) - 1))
    assert errs[-1] < 1e-4


def test_action_value_matches_problem_quadratic_form():
    model = TwoLevelLinear(g=1.0, amp=2.5, omega=10.0)
    ansatz = AnsatzSpec(elements=linear_2ls_ansatz().elements, n_h=1)
    lam = 0.4
    prob = assemble_linear_system(model, lam, ansatz)
    chi = RNG.normal(size=4)
    x = HarmonicOperator.from_terms(
        10.0,
        [(t[0], t[1], t[2]) for e in ansatz.elements for t in e.terms],
        n_h=1,
        weights=[c * t[3] for c, e in zip(chi, ansatz.elements) for t in e.terms],
    )
    direct = action_value(model, lam, x, n_h=1)
    quad = chi @ prob.m @ chi - 2 * prob.b @ chi + prob.const
    assert direct == pytest.approx(quad, rel=1e-10)


# ---------------------------------------------------------------------------
# lambda grids
# ---------------------------------------------------------------------------


def test_circular_grid_reproduces_closed_forms():
    delta_range = (0.2, 3.8)
    amp, omega = 0.8, 2.0
    model = TwoLevelCircular(delta=1.0, amp=amp, omega=omega, sweep="delta")
    sol = solve_lambda_grid(model, circular_pair_ansatz(), delta_range, eps=1e-6)
    for lam in np.linspace(*delta_range, 50):
        denom = (lam - omega) ** 2 + amp**2
        chi = sol.coefficients(lam)
        # direct solves at the nodes are exact; spline error is below eps
        assert abs(chi[0] - (-amp / denom)) < 1e-6
        assert abs(chi[1] - (amp / denom)) < 1e-6
    for lam in sol.lambda_nodes:
        chi = solve_system(assemble_linear_system(model, lam, circular_pair_ansatz()))
        denom = (lam - omega) ** 2 + amp**2
        assert abs(chi[0] - (-amp / denom)) < 1e-10
        assert abs(chi[1] - (amp / denom)) < 1e-10


def test_constant_model_zero_solution_single_round():
    model = TwoLevelCircular(delta=1.0, amp=0.5, omega=2.0, sweep="omega")
    sol = solve_lambda_grid(model, circular_pair_ansatz(), (1.8, 2.2), eps=1e-8)
    assert len(sol.lambda_nodes) == 9
    assert np.max(np.abs(sol.coeffs)) < 1e-12


def test_grid_serialization_roundtrip(tmp_path):
    model = TwoLevelCircular(delta=1.0, amp=0.8, omega=2.0, sweep="delta")
    sol = solve_lambda_grid(model, circular_pair_ansatz(), (0.5, 1.5), eps=1e-5,
                            model_meta={"hash": "abc", "params": {"amp": 0.8}})
    path = tmp_path / "sol.json"
    sol.save(path)
    import json

    data = json.loads(path.read_text())
    assert data["model_hash"] == "abc"
    assert data["norm"] == "trace"
    assert len(data["lambda_nodes"]) == len(data["coefficients"])


# ---------------------------------------------------------------------------
# Pauli-backed assembly agrees with the dense route
# ---------------------------------------------------------------------------


def tfi_counterterm_element(length):
    return AnsatzElement(
        terms=(
            (axis_sum(length, "y"), 1, "cos", 1.0),
            (axis_sum(length, "x"), 1, "sin", -1.0),
        ),
        label="rotating_y",
    )


class _DenseTfi:
    """Dense view of the driven chain for the cross-check."""

    def __init__(self, model):
        self.model = model
        self.dim = model.dim

    def hamiltonian(self, lam):
        return self.model.hamiltonian(lam)


def test_pauli_assembly_matches_dense_assembly():
    model = TfiCircular(length=4)
    lam = 0.35
    e_p = AnsatzSpec(elements=(tfi_counterterm_element(4),))
    dense_elem = AnsatzElement(
        terms=(
            (axis_sum(4, "y").to_dense(), 1, "cos", 1.0),
            (axis_sum(4, "x").to_dense(), 1, "sin", -1.0),
        ),
        label="rotating_y",
    )
    e_d = AnsatzSpec(elements=(dense_elem,))
    p_pauli = assemble_linear_system(model, lam, e_p)
    p_dense = assemble_linear_system(_DenseTfi(model), lam, e_d)
    assert np.max(np.abs(p_pauli.m - p_dense.m)) < 1e-10 * max(1, np.max(np.abs(p_dense.m)))
    assert np.max(np.abs(p_pauli.b - p_dense.b)) < 1e-10 * max(1, np.max(np.abs(p_dense.b)))


def test_ground_state_norm_matches_dense_quadrature():
    model = TfiCircular(length=3)
    lam = 0.4
    L = 3
    from floquetcd.models import mfi_rotating_frame
    from floquetcd.protocols import ControlProtocol

    proto = model.protocol(t_ramp=5.0)
    nu = proto.nu(proto.time_of_lambda(lam))
    amp = model.amp(lam)
    hstat = mfi_rotating_frame(model, amp=amp, nu=nu).to_dense()
    evals, evecs = np.linalg.eigh(hstat)
    gs = evecs[:, 0]
    zdiag = model.sparse_parts()["z_diag"]

    def provider(lam_called):
        def psi_of_phi(phis):
            phases = np.exp(-0.5j * np.outer(phis, zdiag))
            return phases * gs[None, :]

        return psi_of_phi

    norm = GroundStateNorm(state_provider=provider)
    ansatz = AnsatzSpec(elements=(tfi_counterterm_element(L),))
    prob = assemble_linear_system(model, lam, ansatz, norm=norm)
    # dense quadrature oracle for the same pairing
    h, dh = model.hamiltonian(lam)
    elem_dense = AnsatzElement(
        terms=(
            (axis_sum(L, "y").to_dense(), 1, "cos", 1.0),
            (axis_sum(L, "x").to_dense(), 1, "sin", -1.0),
        ),
    )
    g = assemble_g(h, elem_dense, n_h=1)
    n_pts = 64
    acc_m = 0.0
    acc_b = 0.0
    dh_tr = dh.truncated(1)
    for phi in 2 * np.pi * np.arange(n_pts) / n_pts:
        psi = np.exp(-0.5j * phi * zdiag) * gs
        gv = g.evaluate_phase(phi) @ psi
        acc_m += np.real(np.vdot(gv, gv))
        acc_b += np.real(np.vdot(gv, dh_tr.evaluate_phase(phi) @ psi))
    assert prob.m[0, 0] == pytest.approx(acc_m / n_pts, rel=1e-9)
    assert prob.b[0] == pytest.approx(acc_b / n_pts, rel=1e-9)


def test_gram_independence_check():
    dup = AnsatzSpec(
        elements=(element(SPIN["y"], 0, "const"), element(SPIN["y"], 0, "const"))
    )
    with pytest.raises(ValueError):
        dup.validate(omega=1.0)
    linear_2ls_ansatz().validate(omega=1.0)
