import numpy as np
import pytest

from hybridprop import (ClassicalState, DivergenceError, IntegratorSpec, MeanFieldState, build_oscillator_oscillator,
                        build_spin_oscillator, hellmann_feynman_force, propagate_meanfield)
from hybridprop.errors import RejectedInput
from hybridprop.meanfield import meanfield_energy_rate, meanfield_rhs
from hybridprop.models import ClassicalHamiltonian, HybridModel
from hybridprop.operators import SIGMA_Z, expectation

from conftest import SPIN, basis


def run(model, psi, Q0=1.0, P0=0.0, dt=1e-3, T=10.0, **kw):
    return propagate_meanfield(model, MeanFieldState(psi, ClassicalState([Q0], [P0])), IntegratorSpec(dt), T, **kw)


def test_force_examples(spin):
    assert hellmann_feynman_force(spin, basis(2), [0.3])[0] == pytest.approx(-0.1)
    assert hellmann_feynman_force(spin, np.array([1, 1]) / np.sqrt(2), [0.3])[0] == pytest.approx(0, abs=1e-16)
    bare = HybridModel(SIGMA_Z, ClassicalHamiltonian([1.0], lambda Q: 0.0, lambda Q: 0 * Q))
    assert np.all(hellmann_feynman_force(bare, basis(2), [1.0]) == 0)
    with pytest.raises(RejectedInput):
        hellmann_feynman_force(spin, basis(3), [1.0])


def test_rhs_examples():
    m = build_spin_oscillator(0.0, 0.0, 1.0, 1.0, 1.0)
    d = meanfield_rhs(m, MeanFieldState(basis(2), ClassicalState([1.0], [0.0])))
    assert d.dP[0] == pytest.approx(-2.0) and d.dQ[0] == 0
    m = build_spin_oscillator(1.0, 0.0, 2.0, 1.0, 0.0)
    d = meanfield_rhs(m, MeanFieldState(basis(2), ClassicalState([0.0], [3.0])))
    np.testing.assert_allclose(d.dpsi, 0.5 / 1j * basis(2))
    assert d.dQ[0] == pytest.approx(1.5) and d.dP[0] == 0


def test_decoupled_closed_form_oscillator():
    m = build_spin_oscillator(1.0, 0.5, 2.0, 1.5, 0.0)
    tr = run(m, basis(2), Q0=1.0, P0=0.4)
    exact = 1.0 * np.cos(1.5 * tr.t) + 0.4 / (2.0 * 1.5) * np.sin(1.5 * tr.t)
    assert np.max(np.abs(tr.Q[:, 0] - exact)) <= 1e-8
    assert tr.t[0] == 0 and tr.Q[0, 0] == 1.0 and tr.P[0, 0] == 0.4


def test_rk4_global_error_is_fourth_order():
    m = build_spin_oscillator(1.0, 0.5, 1.0, 1.0, 0.0)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        tr = run(m, basis(2), dt=dt, T=10.0)
        errs.append(np.max(np.abs(tr.Q[:, 0] - np.cos(tr.t))))
    for coarse, fine in zip(errs, errs[1:]):
        assert 13 <= coarse / fine <= 19


def test_frozen_rabi_oscillation():
    m = build_spin_oscillator(0.0, 1.0, 1.0, 1.0, 0.1)
    tr = run(m, basis(2), Q0=0.0, T=5.0, dense=True, freeze_classical=True)
    sz = np.array([expectation(SIGMA_Z, s.psi).real for s in tr.states])
    assert np.max(np.abs(sz - np.cos(tr.t))) <= 1e-9
    assert np.all(tr.Q == 0)


def test_stationary_state_only_rotates_phase():
    m = build_spin_oscillator(1.0, 0.0, 1.0, 1.0, 0.0)
    tr = run(m, basis(2, 1), T=2.0)
    assert abs(tr.final.psi[1] - np.exp(0.5j * 2.0)) <= 1e-12


def test_standard_run_conservation(spin, osc):
    for model in (spin, osc):
        tr = run(model, basis(model.dim))
        assert np.max(np.abs(tr.diagnostic - 1)) <= 1e-8
        assert np.max(np.abs(tr.total_energy - tr.total_energy[0])) <= 1e-7
        assert tr.metadata["scheme"] == "meanfield" and tr.metadata["diagnostic"] == "norm"


def test_energy_rate_with_classical_motion(spin):
    dt = 1e-3
    tr = run(spin, basis(2), T=3.0, dense=True)
    fd = (tr.interaction_energy[2:] - tr.interaction_energy[:-2]) / (2 * dt)
    exact = np.array([meanfield_energy_rate(spin, s.psi, s.classical) for s in tr.states[1:-1]])
    assert np.max(np.abs(fd - exact)) <= 1e-6


def test_epsilon_only_interaction_energy_tracks_classical_motion():
    m = build_spin_oscillator(1.0, 0.0, 1.0, 1.0, 0.1)
    tr = run(m, basis(2), T=2.0)
    # sigma_z conserved, so E_s = gamma Q <sigma_z> = 0.1 Q exactly in this case
    np.testing.assert_allclose(tr.interaction_energy, 0.1 * tr.Q[:, 0], atol=1e-14)


def test_stride_and_grid(spin):
    tr = propagate_meanfield(spin, MeanFieldState(basis(2), ClassicalState([1.0], [0.0])),
                             IntegratorSpec(1e-2, output_stride=10), 1.0)
    np.testing.assert_allclose(tr.t, np.linspace(0, 1, 11), atol=1e-15)


def test_rejects_bad_integrator_inputs(spin):
    init = MeanFieldState(basis(2), ClassicalState([1.0], [0.0]))
    with pytest.raises(RejectedInput):
        IntegratorSpec(0.0)
    with pytest.raises(RejectedInput):
        IntegratorSpec(1e-3, output_stride=0)
    with pytest.raises(RejectedInput):
        propagate_meanfield(spin, init, IntegratorSpec(1e-3), -1.0)
    with pytest.raises(RejectedInput):
        propagate_meanfield(spin, init, IntegratorSpec(1e-9), 1e3)


def test_divergence_reports_step_and_partial_trajectory():
    m = build_oscillator_oscillator(8, 1.0, 1.0, 1.0, 1.0, 0.2)
    with pytest.raises(DivergenceError) as err:
        run(m, basis(8), dt=3.0, T=3000.0)
    exc = err.value
    assert exc.step > 0 and exc.trajectory is not None
    assert exc.trajectory.metadata["diverged"] is True
    assert np.all(np.isfinite(exc.trajectory.Q))
