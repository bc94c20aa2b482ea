"""Pure-numpy stage kernels (fallback when the compiled extension is absent).

Every function takes arrays of one complex dtype (complex128 or clongdouble),
C-contiguous, and returns freshly allocated results. Expectation values come
back complex; callers take the real part.
"""

import numpy as np


def _rate(dtype, hbar):
    # -1/(i hbar) in the working dtype; a Python complex would round to double
    dtype = np.dtype(dtype)
    return dtype.type(-1j) / np.finfo(dtype).dtype.type(hbar)


def meanfield_derivative(hq, ops, coeffs, psi, hbar):
    """``d psi/dt = (H_q + sum_k c_k A_k) psi / i hbar`` and ``<psi|A_k|psi>``."""
    hpsi = hq @ psi
    apsi = ops @ psi
    expval = apsi @ psi.conj()
    if len(coeffs):
        hpsi = hpsi + coeffs @ apsi
    return hpsi * _rate(psi.dtype, hbar), expval


def unitary_derivative(hq, ops, coeffs, U, ket, hbar, obs=None):
    """``dU/dt = H U / i hbar`` with ``H = H_q + sum_k c_k A_k``.

    Also returns ``<ket|U^dagger O U|ket>`` for each ``O`` in ``obs``
    (defaults to the coupling operators ``ops``).
    """
    H = hq + np.tensordot(coeffs, ops, axes=1) if len(coeffs) else hq
    return (H @ U) * _rate(U.dtype, hbar), conjugated_expectations(U, ops if obs is None else obs, ket)


def operator_derivative(xs, n_coupling, coeffs, ket, hbar):
    """Heisenberg equations ``dX_j/dt = [X_j, H_h] / i hbar`` for a stack of operators.

    ``xs[0]`` is the evolved quantum Hamiltonian and ``xs[1:1+n_coupling]``
    the evolved coupling operators; ``H_h = xs[0] + sum_k c_k xs[1+k]``.
    """
    H = xs[0]
    if n_coupling:
        H = H + np.tensordot(coeffs, xs[1:1 + n_coupling], axes=1)
    dxs = (xs @ H - H @ xs) * _rate(xs.dtype, hbar)
    expval = np.einsum("i,kij,j->k", ket.conj(), xs, ket)
    return dxs, expval


def conjugated_expectations(U, ops, ket):
    """``<ket|U^dagger A_k U|ket>`` for each ``A_k`` in ``ops``, via the full conjugation."""
    heis = U.conj().T @ ops @ U
    return np.einsum("i,kij,j->k", ket.conj(), heis, ket)
