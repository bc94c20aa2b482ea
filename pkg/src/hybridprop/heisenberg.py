"""Quasiclassical-bracket (Heisenberg-picture) propagation.

The state ket stays at its initial value ``|t0>`` and the operators evolve.
Two interchangeable representations are offered:

``unitary``
    evolve the propagator ``U`` with ``dU/dt = H(Q) U / i hbar`` and form the
    Heisenberg operators as ``U^dagger A U``;
``operator``
    evolve the Heisenberg operators themselves,
    ``dX/dt = [X, H_h(t)]_qc / i hbar`` with
    ``H_h(t) = H_q,h(t) + sum_k f_k(Q) A_k,h(t)``.

The classical backreaction is ``-sum_k f_k'(Q) <t0|A_k,h(t)|t0>``.
``propagate_alternative`` swaps it for ``-d/dQ [H_i(Q, <t0|q_h(t)|t0>)]``,
i.e. the coupling with each coordinate operator replaced by its expectation.
"""

from collections import namedtuple
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .bracket import HybridObservable, ObservableTerm, heisenberg_rhs_from_bracket
from .errors import RejectedInput, UnsupportedModel
from .integrate import Recorder, dtypes, n_steps, rk4
from .models import ClassicalState
from .operators import conjugate_by_unitary

__all__ = ["MODES", "HeisenbergState", "HeisenbergDerivative", "HeisenbergStepper", "heisenberg_backreaction_force",
           "heisenberg_rhs", "propagate_heisenberg", "propagate_alternative", "ACCURACY_WARN"]

MODES = ("unitary", "operator")
ACCURACY_WARN = 1e-6

HeisenbergDerivative = namedtuple("HeisenbergDerivative", "dU dops dQ dP")


def operator_stack(model, track_coordinates=False):
    """Schrodinger-picture operators evolved in operator mode: ``[H_q, A_1..A_K(, q_1..)]``."""
    mats = [model.quantum_hamiltonian, *model.coupling_stack]
    if track_coordinates:
        mats.extend(model.coordinate_ops)
    return np.array(mats, dtype=complex)


@dataclass(frozen=True)
class HeisenbergState:
    """``heisenberg_ops`` (operator mode) is stacked as ``[H_q,h, A_1,h, .., A_K,h, q_1,h, ..]``;
    the coordinate operators are present only when tracked."""

    mode: str
    classical: ClassicalState
    initial_ket: np.ndarray
    U: Optional[np.ndarray] = None
    heisenberg_ops: Optional[np.ndarray] = None
    time: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise RejectedInput(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "unitary" and self.U is None:
            raise RejectedInput("unitary mode needs U")
        if self.mode == "operator" and self.heisenberg_ops is None:
            raise RejectedInput("operator mode needs heisenberg_ops")

    @classmethod
    def start(cls, model, ket, classical, mode="unitary", track_coordinates=False, time=0.0):
        """Pictures coincide at ``t0``: ``U = I`` and the operators are the Schrodinger ones."""
        ket = np.asarray(ket)
        if ket.shape != (model.dim,):
            raise RejectedInput(f"ket of shape {ket.shape} does not match model dim {model.dim}")
        if mode == "unitary":
            return cls(mode, classical, ket, U=np.eye(model.dim, dtype=complex), time=time)
        return cls(mode, classical, ket, heisenberg_ops=operator_stack(model, track_coordinates), time=time)

    def coupling_heisenberg(self, model):
        """``(K, N, N)`` array of Heisenberg-picture coupling operators ``A_k,h(t)``."""
        if self.mode == "unitary":
            return np.array([conjugate_by_unitary(A, self.U) for A in model.coupling_stack]).reshape(
                model.coupling_stack.shape)
        return self.heisenberg_ops[1:1 + len(model.coupling)]


def heisenberg_backreaction_force(model, s):
    """``-sum_k (df_k/dQ)(Q_h) <t0|A_k,h(t)|t0>``."""
    if s.initial_ket.shape != (model.dim,) or s.classical.dim != model.n_classical:
        raise RejectedInput("state does not match model dimensions")
    if not model.coupling:
        return np.zeros(model.n_classical)
    ket = s.initial_ket
    expval = np.array([np.vdot(ket, A @ ket).real for A in s.coupling_heisenberg(model)])
    return -model.coupling_gradients(s.classical.Q).T @ expval


def heisenberg_rhs(model, s):
    """Right-hand side of the Heisenberg-like equations (reference path, no kernels).

    In operator mode each evolved operator is differentiated through
    ``heisenberg_rhs_from_bracket``. Heisenberg operators carry constant
    coefficients, so the Poisson part of the bracket vanishes.
    """
    Q, P = s.classical.Q, s.classical.P
    dQ = P / model.classical.masses
    dP = heisenberg_backreaction_force(model, s) - model.classical.potential_gradient(Q)
    if s.mode == "unitary":
        return HeisenbergDerivative(model.generator(Q) @ s.U / (1j * model.hbar), None, dQ, dP)
    xs = s.heisenberg_ops
    terms = [ObservableTerm.constant(xs[0])]
    for k, term in enumerate(model.coupling):
        terms.append(ObservableTerm(
            coefficient=lambda Q, P, f=term.coefficient: f(Q),
            grad_Q=lambda Q, P, g=term.gradient: g(Q),
            grad_P=lambda Q, P: np.zeros_like(Q),
            operator=xs[1 + k],
        ))
    H = HybridObservable.of(*terms)
    dops = np.array([heisenberg_rhs_from_bracket(HybridObservable.constant(X), H, s.classical, model.hbar)
                     for X in xs])
    return HeisenbergDerivative(None, dops, dQ, dP)


class HeisenbergStepper:
    """Working-precision state ``[U or ops, Q, P]`` advanced by RK4 steps.

    ``backreaction`` is ``"expectation"`` (the quasiclassical scheme) or
    ``"alternative"`` (coupling evaluated at the coordinate expectations).
    """

    def __init__(self, model, init, dt, precision="double", freeze_classical=False, backreaction="expectation",
                 backend=None):
        self.kernels = kernels if backend is None else kernels.load_backend(backend)
        cdt, rdt = dtypes(precision)
        self.model, self.mode = model, init.mode
        self.cdtype, self.rdtype = cdt, rdt
        self.h = rdt(dt)
        self.freeze = freeze_classical
        self.alternative = backreaction == "alternative"
        self.K = len(model.coupling)
        self.hq = np.array(model.quantum_hamiltonian, dtype=cdt, order="C")
        self.ops = np.array(model.coupling_stack, dtype=cdt, order="C")
        self.ket = np.array(init.initial_ket, dtype=cdt, order="C")
        self.inv_mass = 1 / np.asarray(model.classical.masses, dtype=rdt)
        if self.alternative:
            if not model.coordinate_ops:
                raise UnsupportedModel(f"model {model.name!r} declares no coordinate operators")
            if any(t.classical_form is None for t in model.coupling):
                raise UnsupportedModel("every coupling term needs a classical_form for the alternative scheme")
            self.coord = np.array(np.array(model.coordinate_ops), dtype=cdt, order="C")
        # expectation stack used at output rows (unitary mode): [H_q, A_1..A_K, q_1..]
        obs = [self.hq[None], self.ops] + ([self.coord] if self.alternative else [])
        self.obs = np.array(np.concatenate(obs), dtype=cdt, order="C")
        if init.mode == "unitary":
            quantum = np.array(init.U, dtype=cdt)
        else:
            quantum = np.array(init.heisenberg_ops, dtype=cdt, order="C")
            need = 1 + self.K + (len(model.coordinate_ops) if self.alternative else 0)
            if quantum.shape[0] < need:
                raise RejectedInput(f"operator stack has {quantum.shape[0]} entries, scheme needs {need}")
            self.n_tracked = quantum.shape[0]
        self.y = [quantum, np.array(init.classical.Q, dtype=rdt), np.array(init.classical.P, dtype=rdt)]

    def _force(self, Q, expval):
        """Backreaction from coupling expectations (or coordinate expectations, alternative)."""
        grads = self.model.coupling_gradients(Q)
        if self.alternative:
            g = np.array([t.classical_form(expval) for t in self.model.coupling], dtype=self.rdtype)
            return -(grads.T @ g)
        return -(grads.T @ expval)

    def derivative(self, y):
        X, Q, P = y
        model = self.model
        coeffs = model.coupling_coefficients(Q).astype(self.cdtype)
        if self.mode == "unitary":
            dX, ev = self.kernels.unitary_derivative(self.hq, self.ops, coeffs, X, self.ket, model.hbar,
                                                self.coord if self.alternative else None)
            ev = ev.real
        else:
            dX, ev = self.kernels.operator_derivative(X, self.K, coeffs, self.ket, model.hbar)
            ev = ev.real[1 + self.K:] if self.alternative else ev.real[1:1 + self.K]
        if self.freeze:
            zero = np.zeros_like(Q)
            return [dX, zero, zero]
        force = self._force(Q, ev) if self.K else 0
        return [dX, P * self.inv_mass, force - model.classical.potential_gradient(Q)]

    def step(self):
        self.y = rk4(self.derivative, self.y, self.h)

    def expectations(self):
        """Real ``<t0|O_h|t0>`` for ``O`` in ``[H_q, A_1..A_K(, q..)]``."""
        X = self.y[0]
        if self.mode == "unitary":
            return self.kernels.conjugated_expectations(X, self.obs, self.ket).real
        ev = np.einsum("i,kij,j->k", self.ket.conj(), X, self.ket).real
        return ev if self.alternative else ev[:1 + self.K]

    def defect(self):
        X = self.y[0]
        if self.mode == "unitary":
            return np.max(np.abs(X.conj().T @ X - np.eye(X.shape[0])))
        herm = np.max(np.abs(X - np.conj(np.swapaxes(X, 1, 2))))
        trace = np.max(np.abs(np.trace(X, axis1=1, axis2=2) - self.trace0))
        return max(herm, trace)

    def observables(self):
        """``(E_interaction, defect, total_energy)`` at the current state."""
        Q, P = self.y[1], self.y[2]
        ev = self.expectations()
        coeffs = self.model.coupling_coefficients(Q)
        if self.alternative:
            qbar = ev[1 + self.K:]
            E = sum(f * t.classical_form(qbar) for f, t in zip(coeffs, self.model.coupling))
        else:
            E = coeffs @ ev[1:1 + self.K] if self.K else self.rdtype(0)
        total = ev[0] + E + self.model.classical.energy(Q, P)
        return E, self.defect(), total

    def state(self, t):
        X, Q, P = self.y
        c = ClassicalState(Q.copy(), P.copy())
        if self.mode == "unitary":
            return HeisenbergState("unitary", c, self.ket.copy(), U=X.copy(), time=t)
        return HeisenbergState("operator", c, self.ket.copy(), heisenberg_ops=X.copy(), time=t)


def _propagate(model, init, spec, T, precision, dense, freeze_classical, backreaction, scheme):
    n = n_steps(T, spec.dt)
    stepper = HeisenbergStepper(model, init, spec.dt, precision, freeze_classical, backreaction)
    if init.mode == "operator":
        stepper.trace0 = np.trace(stepper.y[0], axis1=1, axis2=2)
    diag = "unitarity_defect" if init.mode == "unitary" else "hermiticity_defect"
    rec = Recorder(stepper.rdtype, dense, {
        "scheme": scheme, "mode": init.mode, "diagnostic": diag, "precision": precision, "dt": spec.dt,
        "output_stride": spec.output_stride, "frozen_classical": freeze_classical,
        "backend": kernels.BACKEND, "model": model.name, "warnings": [],
    })
    worst = 0.0
    t0 = init.time
    for i in range(n + 1):
        if i % spec.output_stride == 0:
            t = t0 + i * spec.dt
            with np.errstate(over="ignore", invalid="ignore"):  # non-finite rows are caught by rec.add
                E, defect, total = stepper.observables()
            worst = max(worst, float(defect))
            rec.add(t, stepper.y[1], stepper.y[2], E, defect, total, stepper.state(t) if dense else None, step=i)
        if i == n:
            break
        stepper.step()
        rec.check_finite(i + 1, *stepper.y)
    if worst > ACCURACY_WARN:
        rec.metadata["warnings"].append(f"{diag} reached {worst:.3e} (> {ACCURACY_WARN:.0e})")
    rec.metadata["max_defect"] = worst
    return rec.build(final=stepper.state(t0 + n * spec.dt))


def propagate_heisenberg(model, init, spec, T, precision="double", dense=False, freeze_classical=False):
    """Integrate the quasiclassical-bracket equations from ``init`` up to ``T``.

    ``init.mode`` chooses the representation. Rows record ``Q_h, P_h``,
    ``E_h = sum_k f_k(Q_h) <t0|A_k,h|t0>``, the unitarity (or Hermiticity and
    trace) defect, and ``<t0|H_q,h + H_i,h|t0> + T(P_h) + V(Q_h)``. Defects
    above ``ACCURACY_WARN`` are noted in ``metadata["warnings"]``.
    """
    return _propagate(model, init, spec, T, precision, dense, freeze_classical, "expectation", "heisenberg")


def propagate_alternative(model, init, spec, T, precision="double", dense=False, freeze_classical=False):
    """Heisenberg propagation with the backreaction ``-d/dQ H_i(Q, <t0|q_h|t0>)``.

    Needs a model with coordinate operators; in operator mode the stack must
    track them (``HeisenbergState.start(..., track_coordinates=True)``).
    """
    if not model.coordinate_ops:
        raise UnsupportedModel(f"model {model.name!r} declares no coordinate operators")
    return _propagate(model, init, spec, T, precision, dense, freeze_classical, "alternative", "alternative")
