"""Hybrid Hamiltonians ``H_q + H_c(P, Q) + sum_k f_k(Q) A_k`` as data.

Two canonical models are built in (a driven two-level system on a classical
oscillator and a truncated quantum oscillator on a classical oscillator), and
``load_model`` binds either from a JSON document.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvariantViolation, RejectedInput
from .operators import SIGMA_X, SIGMA_Z, annihilation, as_operator

__all__ = [
    "ClassicalState",
    "ClassicalHamiltonian",
    "CouplingTerm",
    "HybridModel",
    "build_spin_oscillator",
    "build_oscillator_oscillator",
    "total_meanfield_energy",
    "load_model",
    "ModelConfigError",
]

GRADIENT_STEP = 1e-5
GRADIENT_RTOL = 1e-6


class ModelConfigError(RejectedInput):
    """Model config failed validation; ``path`` names the offending key."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ClassicalState:
    Q: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        Q = np.atleast_1d(np.asarray(self.Q, dtype=_real_dtype(self.Q)))
        P = np.atleast_1d(np.asarray(self.P, dtype=_real_dtype(self.P)))
        if Q.ndim != 1 or Q.shape != P.shape:
            raise RejectedInput(f"Q and P must be 1-d of equal length, got {Q.shape} and {P.shape}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "P", P)

    @property
    def dim(self):
        return self.Q.shape[0]


def _real_dtype(x):
    return np.longdouble if np.asarray(x).dtype == np.longdouble else float


def _check_gradient(fn, grad, M, rng, what, n_points=10):
    for _ in range(n_points):
        Q = rng.uniform(-2.0, 2.0, size=M)
        analytic = np.asarray(grad(Q), dtype=float)
        numeric = np.empty(M)
        for j in range(M):
            e = np.zeros(M)
            e[j] = GRADIENT_STEP
            numeric[j] = (fn(Q + e) - fn(Q - e)) / (2 * GRADIENT_STEP)
        scale = max(1.0, float(np.max(np.abs(analytic))))
        err = float(np.max(np.abs(analytic - numeric)))
        if err > GRADIENT_RTOL * scale:
            raise InvariantViolation(f"{what}: analytic gradient disagrees with central difference by {err:.2e} at Q={Q}")


@dataclass(frozen=True)
class ClassicalHamiltonian:
    """``H_c = sum_j P_j^2 / 2 m_j + V(Q)``."""

    masses: np.ndarray
    potential: Callable
    potential_gradient: Callable

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if m.ndim != 1 or np.any(m <= 0) or not np.all(np.isfinite(m)):
            raise RejectedInput("masses must be a vector of positive finite numbers")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @property
    def dim(self):
        return self.masses.shape[0]

    def kinetic(self, P):
        return np.sum(P * P / (2 * self.masses))

    def energy(self, Q, P):
        return self.kinetic(P) + self.potential(Q)


@dataclass(frozen=True)
class CouplingTerm:
    """One term ``f(Q) * A`` of the interaction Hamiltonian.

    ``classical_form`` optionally gives the operator part as a scalar
    function of the expectations of the model's coordinate operators
    (``q`` for ``A = q``, ``q**2`` for ``A = q^2``). Only the alternative
    backreaction scheme needs it.
    """

    coefficient: Callable
    gradient: Callable
    operator: np.ndarray
    classical_form: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "operator", as_operator(self.operator, hermitian=True))


@dataclass(frozen=True)
class HybridModel:
    quantum_hamiltonian: np.ndarray
    classical: ClassicalHamiltonian
    coupling: tuple = ()
    coordinate_ops: tuple = ()
    hbar: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        Hq = as_operator(self.quantum_hamiltonian, hermitian=True)
        object.__setattr__(self, "quantum_hamiltonian", Hq)
        object.__setattr__(self, "coupling", tuple(self.coupling))
        ops = tuple(as_operator(q, hermitian=True) for q in self.coordinate_ops)
        object.__setattr__(self, "coordinate_ops", ops)
        if not (self.hbar > 0):
            raise RejectedInput("hbar must be positive")
        N = Hq.shape[0]
        for k, term in enumerate(self.coupling):
            if term.operator.shape != (N, N):
                raise RejectedInput(f"coupling term {k} has dim {term.operator.shape[0]}, model has {N}")
        for q in ops:
            if q.shape != (N, N):
                raise RejectedInput("coordinate operator dimension does not match the model")
        stack = np.array([t.operator for t in self.coupling], dtype=complex).reshape(len(self.coupling), N, N)
        stack.setflags(write=False)
        object.__setattr__(self, "_coupling_stack", stack)

    @property
    def dim(self):
        return self.quantum_hamiltonian.shape[0]

    @property
    def n_classical(self):
        return self.classical.dim

    @property
    def coupling_stack(self):
        """Operator parts stacked into a ``(K, N, N)`` array."""
        return self._coupling_stack

    def coupling_coefficients(self, Q):
        return np.array([t.coefficient(Q) for t in self.coupling], dtype=Q.dtype)

    def coupling_gradients(self, Q):
        """``(K, M)`` array of ``df_k/dQ``."""
        if not self.coupling:
            return np.zeros((0, self.n_classical), dtype=Q.dtype)
        return np.array([t.gradient(Q) for t in self.coupling], dtype=Q.dtype)

    def interaction_operator(self, Q):
        H = np.zeros((self.dim, self.dim), dtype=complex)
        for t in self.coupling:
            H = H + t.coefficient(Q) * t.operator
        return H

    def generator(self, Q):
        """Full quantum generator ``H_q + H_i(Q)`` at classical configuration ``Q``."""
        return self.quantum_hamiltonian + self.interaction_operator(Q)

    def validate(self, seed=0, n_points=10):
        """Check analytic gradients against central differences at random ``Q``."""
        rng = np.random.default_rng(seed)
        M = self.n_classical
        _check_gradient(self.classical.potential, self.classical.potential_gradient, M, rng, "potential", n_points)
        for k, t in enumerate(self.coupling):
            _check_gradient(t.coefficient, t.gradient, M, rng, f"coupling term {k}", n_points)
        return self


def _harmonic(mass, omega):
    k = mass * omega**2
    return ClassicalHamiltonian(
        masses=[mass],
        potential=lambda Q: 0.5 * k * Q[0] * Q[0],
        potential_gradient=lambda Q: k * Q,
    )


def _linear_coefficient(strength):
    return dict(
        coefficient=lambda Q: strength * Q[0],
        gradient=lambda Q: strength + 0 * Q,
    )


def build_spin_oscillator(epsilon, delta, mass, omega, gamma, hbar=1.0):
    """Two-level system ``(eps/2) sz + (delta/2) sx`` coupled by ``gamma Q sz``
    to a classical harmonic oscillator."""
    if not mass > 0 or not omega > 0:
        raise RejectedInput("mass and omega must be positive")
    Hq = 0.5 * epsilon * SIGMA_Z + 0.5 * delta * SIGMA_X
    coupling = (CouplingTerm(operator=SIGMA_Z, **_linear_coefficient(gamma)),)
    return HybridModel(
        quantum_hamiltonian=Hq,
        classical=_harmonic(mass, omega),
        coupling=coupling,
        hbar=hbar,
        name="spin_oscillator",
        params=dict(epsilon=epsilon, delta=delta, mass=mass, omega=omega, gamma=gamma, hbar=hbar),
    )


def build_oscillator_oscillator(N, omega_q, mass_q, mass_c, omega_c, lam, nonlinear=False, hbar=1.0):
    """Truncated quantum oscillator coupled to a classical one.

    The coupling is ``lam Q q`` or, with ``nonlinear``, ``lam Q q^2``, where
    ``q = sqrt(hbar / 2 m_q w_q) (a + a^dagger)`` in the lowest ``N`` Fock
    states. The ``q^2`` operator is the square of the truncated ``q`` matrix.
    """
    if int(N) != N or N < 4:
        raise RejectedInput("N must be an integer >= 4")
    if not (omega_q > 0 and mass_q > 0 and mass_c > 0 and omega_c > 0):
        raise RejectedInput("masses and frequencies must be positive")
    N = int(N)
    a = annihilation(N)
    q = np.sqrt(hbar / (2 * mass_q * omega_q)) * (a + a.conj().T)
    Hq = hbar * omega_q * np.diag(np.arange(N) + 0.5).astype(complex)
    if nonlinear:
        term = CouplingTerm(operator=q @ q, classical_form=lambda qbar: qbar[0] ** 2, **_linear_coefficient(lam))
    else:
        term = CouplingTerm(operator=q, classical_form=lambda qbar: qbar[0], **_linear_coefficient(lam))
    return HybridModel(
        quantum_hamiltonian=Hq,
        classical=_harmonic(mass_c, omega_c),
        coupling=(term,),
        coordinate_ops=(q,),
        hbar=hbar,
        name="oscillator_oscillator",
        params=dict(N=N, omega_q=omega_q, mass_q=mass_q, mass_c=mass_c, omega_c=omega_c,
                    lambda_=lam, nonlinear=bool(nonlinear), hbar=hbar),
    )


def total_meanfield_energy(model, psi, c):
    """``<psi|H_q + H_i(Q)|psi> + T(P) + V(Q)``."""
    psi = np.asarray(psi)
    if psi.shape != (model.dim,):
        raise RejectedInput(f"state of shape {psi.shape} does not match model dim {model.dim}")
    if c.dim != model.n_classical:
        raise RejectedInput(f"classical state has {c.dim} coordinates, model has {model.n_classical}")
    quantum = np.vdot(psi, model.generator(c.Q) @ psi).real
    return float(quantum + model.classical.energy(c.Q, c.P))


_SCHEMAS = {
    "spin_oscillator": {
        "required": ("epsilon", "delta", "mass", "omega", "gamma"),
        "optional": {"hbar": 1.0},
        "positive": ("mass", "omega", "hbar"),
    },
    "oscillator_oscillator": {
        "required": ("N", "omega_q", "mass_q", "mass_c", "omega_c", "lambda"),
        "optional": {"nonlinear": False, "hbar": 1.0},
        "positive": ("omega_q", "mass_q", "mass_c", "omega_c", "hbar"),
    },
}


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ModelConfigError(f"expected a finite number, got {value!r}", path)
    return float(value)


def load_model(config):
    """Build a model from a JSON string or an already-parsed mapping."""
    if isinstance(config, (str, bytes)):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as exc:
            raise ModelConfigError(f"invalid JSON ({exc})") from None
    if not isinstance(config, dict):
        raise ModelConfigError("config must be a JSON object")
    if "model" not in config:
        raise ModelConfigError("missing required key", "$.model")
    name = config["model"]
    if name not in _SCHEMAS:
        raise ModelConfigError(f"unknown model {name!r}; expected one of {sorted(_SCHEMAS)}", "$.model")
    schema = _SCHEMAS[name]
    allowed = {"model", *schema["required"], *schema["optional"]}
    for key in config:
        if key not in allowed:
            raise ModelConfigError(f"unknown key for model {name!r}", f"$.{key}")
    for key in schema["required"]:
        if key not in config:
            raise ModelConfigError("missing required key", f"$.{key}")
    values = dict(schema["optional"])
    values.update({k: v for k, v in config.items() if k != "model"})
    for key, value in values.items():
        if key == "nonlinear":
            if not isinstance(value, bool):
                raise ModelConfigError(f"expected true or false, got {value!r}", "$.nonlinear")
            continue
        if key == "N":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ModelConfigError(f"expected an integer, got {value!r}", "$.N")
            if value < 4:
                raise ModelConfigError("must be >= 4", "$.N")
            continue
        values[key] = _number(value, f"$.{key}")
        if key in schema["positive"] and values[key] <= 0:
            raise ModelConfigError("must be positive", f"$.{key}")
    if name == "spin_oscillator":
        model = build_spin_oscillator(values["epsilon"], values["delta"], values["mass"], values["omega"],
                                      values["gamma"], hbar=values["hbar"])
    else:
        model = build_oscillator_oscillator(values["N"], values["omega_q"], values["mass_q"], values["mass_c"],
                                            values["omega_c"], values["lambda"], nonlinear=values["nonlinear"],
                                            hbar=values["hbar"])
    return model.validate()
