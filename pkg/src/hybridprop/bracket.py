"""Quasiclassical bracket ``[A, B]_qc = [A, B] + i hbar {A, B}`` on hybrid observables.

A hybrid observable is a finite sum ``sum_j g_j(Q, P) B_j`` of phase-space
functions times matrices. In the Poisson part the operator product is taken
left to right (A's operator, then B's), which is unambiguous whenever the
operator parts of the two arguments commute. Every built-in model stays in
that class.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import RejectedInput
from .models import _check_gradient
from .operators import as_operator

__all__ = ["ObservableTerm", "HybridObservable", "evaluate", "qc_bracket", "heisenberg_rhs_from_bracket"]


def _zero_grad(Q, P):
    return np.zeros_like(np.asarray(Q, dtype=float))


@dataclass(frozen=True)
class ObservableTerm:
    coefficient: Callable
    grad_Q: Callable
    grad_P: Callable
    operator: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "operator", as_operator(self.operator))

    @classmethod
    def constant(cls, operator, value=1.0):
        """Term with a phase-space independent coefficient."""
        return cls(lambda Q, P: value, _zero_grad, _zero_grad, operator)


@dataclass(frozen=True)
class HybridObservable:
    terms: tuple
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if term.operator.shape != (self.dim, self.dim):
                raise RejectedInput(f"term operator of shape {term.operator.shape} in a dim-{self.dim} observable")

    @classmethod
    def of(cls, *terms, dim=None):
        if dim is None:
            if not terms:
                raise RejectedInput("dim is required for an empty observable")
            dim = terms[0].operator.shape[0]
        return cls(terms, dim)

    @classmethod
    def constant(cls, operator):
        return cls.of(ObservableTerm.constant(operator))

    def validate(self, M=1, seed=0, n_points=10):
        """Check analytic Q and P gradients of every coefficient by central differences."""
        rng = np.random.default_rng(seed)
        for j, t in enumerate(self.terms):
            P0 = rng.uniform(-2, 2, size=M)
            Q0 = rng.uniform(-2, 2, size=M)
            _check_gradient(lambda Q: t.coefficient(Q, P0), lambda Q: t.grad_Q(Q, P0), M, rng, f"term {j} dQ", n_points)
            _check_gradient(lambda P: t.coefficient(Q0, P), lambda P: t.grad_P(Q0, P), M, rng, f"term {j} dP", n_points)
        return self


def _check_pair(A, B):
    if A.dim != B.dim:
        raise RejectedInput(f"dimension mismatch: {A.dim} vs {B.dim}")


def evaluate(obs, c):
    """Matrix ``sum_j g_j(Q, P) B_j`` at classical state ``c``."""
    out = np.zeros((obs.dim, obs.dim), dtype=complex)
    for t in obs.terms:
        out = out + t.coefficient(c.Q, c.P) * t.operator
    return out


def qc_bracket(A, B, c, hbar=1.0):
    _check_pair(A, B)
    a, b = evaluate(A, c), evaluate(B, c)
    result = a @ b - b @ a
    for ta in A.terms:
        dqa, dpa = np.atleast_1d(ta.grad_Q(c.Q, c.P)), np.atleast_1d(ta.grad_P(c.Q, c.P))
        for tb in B.terms:
            dqb, dpb = np.atleast_1d(tb.grad_Q(c.Q, c.P)), np.atleast_1d(tb.grad_P(c.Q, c.P))
            poisson = float(np.dot(dqa, dpb) - np.dot(dpa, dqb))
            if poisson != 0.0:
                result = result + 1j * hbar * poisson * (ta.operator @ tb.operator)
    return result


def heisenberg_rhs_from_bracket(A, H, c, hbar=1.0):
    """Time derivative ``(1 / i hbar) [A, H]_qc`` of an observable."""
    return qc_bracket(A, H, c, hbar) / (1j * hbar)
