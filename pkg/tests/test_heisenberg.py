import numpy as np
import pytest

from hybridprop import (ClassicalState, HeisenbergState, IntegratorSpec, MeanFieldState, UnsupportedModel,
                        build_oscillator_oscillator, build_spin_oscillator, hellmann_feynman_force,
                        heisenberg_backreaction_force, propagate_alternative, propagate_heisenberg,
                        propagate_meanfield)
from hybridprop.errors import RejectedInput
from hybridprop.heisenberg import HeisenbergStepper, heisenberg_rhs, operator_stack
from hybridprop.models import ClassicalHamiltonian, HybridModel
from hybridprop.operators import SIGMA_X, SIGMA_Y, SIGMA_Z, conjugate_by_unitary, expectation

from conftest import OSC, basis

C1 = ClassicalState([1.0], [0.0])


def run(model, psi, mode="unitary", dt=1e-3, T=10.0, c=C1, **kw):
    return propagate_heisenberg(model, HeisenbergState.start(model, psi, c, mode), IntegratorSpec(dt), T, **kw)


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_start_state_pictures_coincide(spin, osc):
    s = HeisenbergState.start(spin, basis(2), C1)
    assert np.array_equal(s.U, np.eye(2))
    s = HeisenbergState.start(osc, basis(32), C1, "operator", track_coordinates=True)
    assert s.heisenberg_ops.shape == (3, 32, 32)
    np.testing.assert_array_equal(s.heisenberg_ops[2], osc.coordinate_ops[0])
    with pytest.raises(RejectedInput):
        HeisenbergState.start(spin, basis(3), C1)
    with pytest.raises(RejectedInput):
        HeisenbergState("sideways", C1, basis(2), U=np.eye(2))


def test_force_at_t0_equals_hellmann_feynman(spin, osc):
    rng = np.random.default_rng(4)
    for model in (spin, osc):
        psi = rng.normal(size=model.dim) + 1j * rng.normal(size=model.dim)
        psi /= np.linalg.norm(psi)
        for mode in ("unitary", "operator"):
            s = HeisenbergState.start(model, psi, C1, mode)
            np.testing.assert_array_equal(heisenberg_backreaction_force(model, s),
                                          hellmann_feynman_force(model, psi, [1.0]))


def test_force_empty_coupling_is_zero():
    bare = HybridModel(SIGMA_Z, ClassicalHamiltonian([1.0], lambda Q: 0.0, lambda Q: 0 * Q))
    s = HeisenbergState.start(bare, basis(2), C1)
    assert np.all(heisenberg_backreaction_force(bare, s) == 0)


def test_conserved_coupling_force_is_constant():
    m = build_spin_oscillator(1.0, 0.0, 1.0, 1.0, 0.1)
    psi = np.array([0.8, 0.6])
    tr = run(m, psi, T=3.0, dense=True)
    f0 = hellmann_feynman_force(m, psi, [1.0])
    forces = np.array([heisenberg_backreaction_force(m, s) for s in tr.states])
    np.testing.assert_allclose(forces, np.broadcast_to(f0, forces.shape), atol=1e-12)


def test_operator_rhs_pauli_example():
    eps = 1.0
    m = HybridModel(eps / 2 * SIGMA_Z, ClassicalHamiltonian([1.0], lambda Q: 0.0, lambda Q: 0 * Q),
                    coordinate_ops=(SIGMA_X,))
    d = heisenberg_rhs(m, HeisenbergState.start(m, basis(2), C1, "operator", track_coordinates=True))
    np.testing.assert_allclose(d.dops[1], -(eps / m.hbar) * SIGMA_Y, atol=1e-15)


def test_operator_rhs_hamiltonian_is_stationary():
    m = build_spin_oscillator(1.0, 0.5, 1.0, 1.0, 0.0)
    d = heisenberg_rhs(m, HeisenbergState.start(m, basis(2), C1, "operator"))
    assert np.max(np.abs(d.dops[0])) <= 1e-15


@pytest.mark.parametrize("mode", ["unitary", "operator"])
@pytest.mark.parametrize("which", ["spin", "osc", "nonlinear"])
def test_reference_rhs_matches_kernel_path(mode, which, spin, osc):
    model = {"spin": spin, "osc": osc, "nonlinear": build_oscillator_oscillator(**OSC, nonlinear=True)}[which]
    rng = np.random.default_rng(9)
    psi = rng.normal(size=model.dim) + 1j * rng.normal(size=model.dim)
    psi /= np.linalg.norm(psi)
    c = ClassicalState([0.7], [-0.3])
    s = HeisenbergState.start(model, psi, c, mode)
    if mode == "unitary":
        s = HeisenbergState("unitary", c, psi, U=random_unitary(rng, model.dim))
    else:
        U = random_unitary(rng, model.dim)
        s = HeisenbergState("operator", c, psi,
                            heisenberg_ops=np.array([conjugate_by_unitary(A, U) for A in s.heisenberg_ops]))
    ref = heisenberg_rhs(model, s)
    stepper = HeisenbergStepper(model, s, 1e-3)
    dX, dQ, dP = stepper.derivative(stepper.y)
    np.testing.assert_allclose(dX, ref.dU if mode == "unitary" else ref.dops, atol=1e-12)
    np.testing.assert_allclose(dQ, ref.dQ, atol=1e-14)
    np.testing.assert_allclose(dP, ref.dP, atol=1e-12)


def test_decoupled_closed_form():
    m = build_spin_oscillator(1.0, 0.5, 1.0, 2.0, 0.0)
    for mode in ("unitary", "operator"):
        tr = run(m, basis(2), mode)
        assert np.max(np.abs(tr.Q[:, 0] - np.cos(2.0 * tr.t))) <= 1e-8
        assert tr.Q[0, 0] == 1.0 and tr.P[0, 0] == 0.0 and tr.t[0] == 0.0


def test_decoupled_propagator_is_bare_quantum_evolution():
    m = build_spin_oscillator(1.0, 0.5, 1.0, 1.0, 0.0)
    tr = run(m, basis(2), T=2.0)
    w, v = np.linalg.eigh(m.quantum_hamiltonian)
    exact = v @ np.diag(np.exp(-1j * w * 2.0)) @ v.conj().T
    assert np.max(np.abs(tr.final.U - exact)) <= 1e-12


def test_modes_agree_on_oscillator(osc):
    a, b = run(osc, basis(32), "unitary", T=5.0), run(osc, basis(32), "operator", T=5.0)
    assert np.max(np.abs(a.Q - b.Q)) <= 1e-8
    assert np.max(np.abs(a.interaction_energy - b.interaction_energy)) <= 1e-8


def test_isospectrality_proxy(spin, osc):
    for model in (spin, osc):
        tr = run(model, basis(model.dim), T=10.0, dense=True)
        A = model.coupling_stack[0]
        ref = np.trace(A), np.trace(A @ A)
        # scaled by |A|_F^2: RK4 is not exactly unitary and |tr(A E)| <= |A|_F |E|_F
        tol = 1e-8 * max(1.0, np.linalg.norm(A) ** 2)
        for s in tr.states[::500]:
            Ah = conjugate_by_unitary(A, s.U)
            assert abs(np.trace(Ah) - ref[0]) <= tol
            assert abs(np.trace(Ah @ Ah) - ref[1]) <= tol


def test_operator_mode_defect_stays_small(osc):
    tr = run(osc, basis(32), "operator")
    assert tr.metadata["diagnostic"] == "hermiticity_defect"
    assert tr.metadata["max_defect"] <= 1e-8 and tr.metadata["warnings"] == []


def test_accuracy_warning_recorded():
    m = build_oscillator_oscillator(32, 1.0, 1.0, 1.0, 1.0, 0.2)
    tr = run(m, basis(32), dt=0.05, T=1.0)
    assert tr.metadata["max_defect"] > 1e-6
    assert any("unitarity_defect" in w for w in tr.metadata["warnings"])


def test_alternative_requires_coordinates(spin):
    with pytest.raises(UnsupportedModel):
        propagate_alternative(spin, HeisenbergState.start(spin, basis(2), C1), IntegratorSpec(1e-3), 1.0)


def test_alternative_operator_mode_needs_tracked_coordinates(osc):
    with pytest.raises(RejectedInput):
        propagate_alternative(osc, HeisenbergState.start(osc, basis(32), C1, "operator"), IntegratorSpec(1e-3), 0.1)


@pytest.mark.parametrize("mode", ["unitary", "operator"])
def test_alternative_linear_coincides(osc, mode):
    init = HeisenbergState.start(osc, basis(32), C1, mode, track_coordinates=True)
    alt = propagate_alternative(osc, init, IntegratorSpec(1e-3), 5.0)
    ref = run(osc, basis(32), mode, T=5.0)
    assert np.max(np.abs(alt.Q - ref.Q)) <= 1e-8
    assert np.max(np.abs(alt.P - ref.P)) <= 1e-8


def test_alternative_zero_coupling_coincides():
    m = build_oscillator_oscillator(8, 0.5, 1.0, 1.0, 1.0, 0.0, nonlinear=True)
    psi = (basis(8) + basis(8, 1)) / np.sqrt(2)
    alt = propagate_alternative(m, HeisenbergState.start(m, psi, C1), IntegratorSpec(1e-2), 5.0)
    mf = propagate_meanfield(m, MeanFieldState(psi, C1), IntegratorSpec(1e-2), 5.0)
    assert np.max(np.abs(alt.Q - mf.Q)) <= 1e-14


def test_alternative_nonlinear_separates():
    m = build_oscillator_oscillator(**OSC, nonlinear=True)
    psi = (basis(32) + basis(32, 1)) / np.sqrt(2)
    alt = propagate_alternative(m, HeisenbergState.start(m, psi, C1), IntegratorSpec(1e-2), 10.0)
    ref = run(m, psi, dt=1e-2)
    assert np.max(np.abs(alt.Q - ref.Q)) > 1e-3


def test_picture_equivalence_along_run(spin):
    tr = run(spin, np.array([0.6, 0.8j]), T=5.0, dense=True)
    ket = tr.states[0].initial_ket
    for s in tr.states[::100]:
        h = np.vdot(ket, conjugate_by_unitary(SIGMA_Z, s.U) @ ket)
        psi = s.U @ ket
        assert abs(h - expectation(SIGMA_Z, psi)) <= 1e-12


def test_operator_stack_layout(osc):
    stack = operator_stack(osc, track_coordinates=True)
    np.testing.assert_array_equal(stack[0], osc.quantum_hamiltonian)
    np.testing.assert_array_equal(stack[1], osc.coupling_stack[0])
    assert operator_stack(osc).shape == (2, 32, 32)
