"""Dense matrix algebra for finite-dimensional observables and states.

Operators are plain complex ``numpy`` arrays of shape ``(N, N)`` and states
are complex vectors of shape ``(N,)``. The ``as_operator`` and ``as_state``
constructors validate the invariants once and hand back read-only copies, so
the hot paths never re-check them.
"""

import numpy as np

from .errors import InvariantViolation, RejectedInput

__all__ = [
    "HERMITIAN_TOL",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "IDENTITY_2",
    "as_operator",
    "as_state",
    "normalize",
    "hermitian_defect",
    "unitarity_defect",
    "commutator",
    "expectation",
    "conjugate_by_unitary",
    "annihilation",
    "ground_state",
]

HERMITIAN_TOL = 1e-12


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


SIGMA_X = _frozen(np.array([[0, 1], [1, 0]], dtype=complex))
SIGMA_Y = _frozen(np.array([[0, -1j], [1j, 0]], dtype=complex))
SIGMA_Z = _frozen(np.array([[1, 0], [0, -1]], dtype=complex))
IDENTITY_2 = _frozen(np.eye(2, dtype=complex))


def _square(A, name="operator"):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise RejectedInput(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    return A


def _same_dim(A, B):
    if A.shape[0] != B.shape[0]:
        raise RejectedInput(f"dimension mismatch: {A.shape[0]} vs {B.shape[0]}")


def hermitian_defect(A):
    """Largest entry of ``|A - A^dagger|``."""
    A = _square(A)
    return float(np.max(np.abs(A - A.conj().T)))


def unitarity_defect(U):
    """Largest entry of ``|U^dagger U - I|``."""
    U = _square(U)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def as_operator(A, hermitian=False, tol=HERMITIAN_TOL):
    """Return a read-only complex copy of ``A``, optionally checking Hermiticity."""
    A = _square(A)
    if not np.all(np.isfinite(A)):
        raise RejectedInput("operator has non-finite entries")
    if hermitian:
        defect = hermitian_defect(A)
        if defect > tol:
            raise InvariantViolation(f"operator not Hermitian: defect {defect:.3e} > {tol:.1e}")
    dtype = np.clongdouble if A.dtype in (np.longdouble, np.clongdouble) else complex
    return _frozen(A.astype(dtype))


def as_state(psi, tol=HERMITIAN_TOL):
    """Return a read-only complex copy of ``psi`` after checking its norm is 1."""
    psi = np.asarray(psi)
    if psi.ndim != 1 or psi.shape[0] == 0:
        raise RejectedInput(f"state must be a non-empty vector, got shape {psi.shape}")
    norm2 = float(np.sum(np.abs(psi) ** 2))
    if abs(norm2 - 1.0) > tol:
        raise InvariantViolation(f"state not normalized: |psi|^2 = {norm2!r}")
    dtype = np.clongdouble if psi.dtype in (np.longdouble, np.clongdouble) else complex
    return _frozen(psi.astype(dtype))


def normalize(psi):
    """Scale ``psi`` to unit norm. Returns ``(state, relative_change)``."""
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0 or not np.isfinite(norm):
        raise RejectedInput("cannot normalize a zero or non-finite vector")
    return as_state(psi / norm), abs(norm - 1.0)


def commutator(A, B):
    """``AB - BA``."""
    A, B = _square(A), _square(B)
    _same_dim(A, B)
    return A @ B - B @ A


def expectation(A, psi):
    """``<psi|A|psi>`` as a complex scalar."""
    A = _square(A)
    psi = np.asarray(psi)
    if psi.shape != (A.shape[0],):
        raise RejectedInput(f"state of shape {psi.shape} does not match operator of dim {A.shape[0]}")
    return complex(np.vdot(psi, A @ psi)) if A.dtype == complex else (psi.conj() @ (A @ psi))


def conjugate_by_unitary(A, U, tol=1e-8):
    """Heisenberg-picture image ``U^dagger A U``.

    Raises InvariantViolation when ``U`` is further than ``tol`` from unitary.
    """
    A, U = _square(A), _square(U, "propagator")
    _same_dim(A, U)
    defect = unitarity_defect(U)
    if defect > tol:
        raise InvariantViolation(f"propagator not unitary: defect {defect:.3e} > {tol:.1e}")
    return U.conj().T @ A @ U


def annihilation(N):
    """Truncated Fock-space lowering operator, ``a|n> = sqrt(n)|n-1>``."""
    if N < 1:
        raise RejectedInput("Fock truncation must be at least 1")
    return np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1).astype(complex)


def ground_state(H, tol=1e-12, max_iter=10_000):
    """Lowest eigenvector of Hermitian ``H`` by shifted inverse-power iteration.

    The shift sits one unit below the Gershgorin lower bound, which keeps the
    shifted matrix positive definite. The iteration starts from basis vector 0
    and stops once the eigen-residual ``|H x - <H> x|`` drops below
    ``tol * max(1, |H|)``. The phase is fixed so the largest component is real
    and positive.
    """
    H = as_operator(H, hermitian=True)
    n = H.shape[0]
    radius = np.sum(np.abs(H), axis=1) - np.abs(np.diag(H))
    shift = float(np.min(np.diag(H).real - radius)) - 1.0
    scale = max(1.0, float(np.max(np.abs(H))))
    shifted = H - shift * np.eye(n)
    x = np.zeros(n, dtype=complex)
    x[0] = 1.0
    for _ in range(max_iter):
        x = np.linalg.solve(shifted, x)
        x /= np.linalg.norm(x)
        Hx = H @ x
        if np.linalg.norm(Hx - np.vdot(x, Hx) * x) <= tol * scale:
            break
    else:
        raise InvariantViolation(f"inverse iteration did not converge in {max_iter} steps")
    k = int(np.argmax(np.abs(x)))
    x *= abs(x[k]) / x[k]
    return as_state(x / np.linalg.norm(x))
