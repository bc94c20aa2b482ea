"""Mean-field (Ehrenfest) propagation.

The quantum state obeys the Schrodinger equation with the instantaneous
classical configuration, and the classical coordinates feel the
Hellmann-Feynman force ``-sum_k f_k'(Q) <psi|A_k|psi>``. All of
``(psi, Q, P)`` is stepped jointly with RK4; ``psi`` is never renormalized.
"""

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import RejectedInput
from .integrate import Recorder, dtypes, n_steps, rk4
from .models import ClassicalState

__all__ = ["MeanFieldState", "MeanFieldDerivative", "MeanFieldStepper", "hellmann_feynman_force",
           "meanfield_rhs", "meanfield_energy_rate", "propagate_meanfield"]

MeanFieldDerivative = namedtuple("MeanFieldDerivative", "dpsi dQ dP")


@dataclass(frozen=True)
class MeanFieldState:
    psi: np.ndarray
    classical: ClassicalState
    time: float = 0.0


def _check(model, psi, Q):
    if np.shape(psi) != (model.dim,):
        raise RejectedInput(f"state of shape {np.shape(psi)} does not match model dim {model.dim}")
    if np.shape(Q) != (model.n_classical,):
        raise RejectedInput(f"Q of shape {np.shape(Q)} does not match {model.n_classical} classical coordinates")


def hellmann_feynman_force(model, psi, Q):
    """``-sum_k (df_k/dQ) Re<psi|A_k|psi>``."""
    psi = np.asarray(psi)
    Q = np.atleast_1d(np.asarray(Q, dtype=float))
    _check(model, psi, Q)
    if not model.coupling:
        return np.zeros(model.n_classical)
    expval = np.array([np.vdot(psi, A @ psi).real for A in model.coupling_stack])
    return -model.coupling_gradients(Q).T @ expval


def meanfield_rhs(model, s):
    """Right-hand side of the mean-field equations at state ``s`` (reference path, no kernels)."""
    Q, P = s.classical.Q, s.classical.P
    _check(model, s.psi, Q)
    dpsi = model.generator(Q) @ s.psi / (1j * model.hbar)
    dQ = P / model.classical.masses
    dP = hellmann_feynman_force(model, s.psi, Q) - model.classical.potential_gradient(Q)
    return MeanFieldDerivative(dpsi, dQ, dP)


def meanfield_energy_rate(model, psi, c):
    """Exact ``d/dt <psi|H_i(Q)|psi>`` along the full mean-field flow.

    The commutator term ``<[H_i, H_q]> / i hbar`` plus the classical-motion term
    ``sum_k (f_k'(Q) . dQ/dt) <A_k>``.
    """
    Q, P = c.Q, c.P
    Hi = model.interaction_operator(Q)
    Hq = model.quantum_hamiltonian
    quantum = (np.vdot(psi, (Hi @ Hq - Hq @ Hi) @ psi) / (1j * model.hbar)).real
    if not model.coupling:
        return float(quantum)
    expval = np.array([np.vdot(psi, A @ psi).real for A in model.coupling_stack])
    qdot = P / model.classical.masses
    return float(quantum + (model.coupling_gradients(Q) @ qdot) @ expval)


class MeanFieldStepper:
    """Holds ``(psi, Q, P)`` in working precision and advances it by RK4 steps."""

    def __init__(self, model, psi, classical, dt, precision="double", freeze_classical=False, backend=None):
        _check(model, psi, classical.Q)
        self.kernels = kernels if backend is None else kernels.load_backend(backend)
        cdt, rdt = dtypes(precision)
        self.model = model
        self.cdtype, self.rdtype = cdt, rdt
        self.h = rdt(dt)
        self.freeze = freeze_classical
        self.hq = np.array(model.quantum_hamiltonian, dtype=cdt, order="C")
        self.ops = np.array(model.coupling_stack, dtype=cdt, order="C")
        self.obs = np.array(np.concatenate([self.hq[None], self.ops]), dtype=cdt, order="C")
        self.inv_mass = 1 / np.asarray(model.classical.masses, dtype=rdt)
        self.y = [np.array(psi, dtype=cdt), np.array(classical.Q, dtype=rdt), np.array(classical.P, dtype=rdt)]

    def derivative(self, y):
        psi, Q, P = y
        model = self.model
        coeffs = model.coupling_coefficients(Q)
        dpsi, expval = self.kernels.meanfield_derivative(self.hq, self.ops, coeffs.astype(self.cdtype), psi, model.hbar)
        if self.freeze:
            zero = np.zeros_like(Q)
            return [dpsi, zero, zero]
        force = -(model.coupling_gradients(Q).T @ expval.real) if len(coeffs) else 0
        return [dpsi, P * self.inv_mass, force - model.classical.potential_gradient(Q)]

    def step(self):
        self.y = rk4(self.derivative, self.y, self.h)

    def observables(self):
        """``(E_interaction, norm, total_energy)`` at the current state."""
        psi, Q, P = self.y
        ev = ((self.obs @ psi) @ psi.conj()).real
        E = self.model.coupling_coefficients(Q) @ ev[1:] if self.model.coupling else self.rdtype(0)
        norm = np.sqrt((psi.conj() @ psi).real)
        total = ev[0] + E + self.model.classical.energy(Q, P)
        return E, norm, total

    def state(self, t):
        psi, Q, P = self.y
        return MeanFieldState(psi.copy(), ClassicalState(Q.copy(), P.copy()), t)


def propagate_meanfield(model, init, spec, T, precision="double", dense=False, freeze_classical=False):
    """Integrate the mean-field equations from ``init`` up to time ``T``.

    Rows are recorded every ``spec.output_stride`` steps, starting at ``t = 0``.
    ``dense`` stores a ``MeanFieldState`` per row and ``freeze_classical``
    holds ``Q, P`` fixed. Raises DivergenceError on non-finite values.
    """
    n = n_steps(T, spec.dt)
    stepper = MeanFieldStepper(model, init.psi, init.classical, spec.dt, precision, freeze_classical)
    rec = Recorder(stepper.rdtype, dense, {
        "scheme": "meanfield", "diagnostic": "norm", "precision": precision, "dt": spec.dt,
        "output_stride": spec.output_stride, "frozen_classical": freeze_classical,
        "backend": kernels.BACKEND, "model": model.name,
    })
    t0 = init.time
    for i in range(n + 1):
        if i % spec.output_stride == 0:
            t = t0 + i * spec.dt
            with np.errstate(over="ignore", invalid="ignore"):  # non-finite rows are caught by rec.add
                E, norm, total = stepper.observables()
            rec.add(t, stepper.y[1], stepper.y[2], E, norm, total, stepper.state(t) if dense else None, step=i)
        if i == n:
            break
        stepper.step()
        rec.check_finite(i + 1, *stepper.y)
    return rec.build(final=stepper.state(t0 + n * spec.dt))
