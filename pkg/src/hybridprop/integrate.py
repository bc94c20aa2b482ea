"""Fixed-step RK4 machinery and the trajectory record shared by all schemes."""

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DivergenceError, RejectedInput

__all__ = ["IntegratorSpec", "Trajectory", "Recorder", "PRECISIONS", "dtypes", "n_steps", "rk4",
           "write_trajectory_csv", "read_trajectory_csv", "MAX_STEPS"]

MAX_STEPS = 10**8

# name -> (complex dtype, real dtype)
PRECISIONS = {
    "double": (np.complex128, np.float64),
    "extended": (np.clongdouble, np.longdouble),
}


def dtypes(precision):
    try:
        return PRECISIONS[precision]
    except KeyError:
        raise RejectedInput(f"unknown precision {precision!r}; expected one of {sorted(PRECISIONS)}") from None


@dataclass(frozen=True)
class IntegratorSpec:
    dt: float
    output_stride: int = 1
    method: str = "rk4"

    def __post_init__(self):
        if self.method != "rk4":
            raise RejectedInput(f"unsupported integrator {self.method!r}; only 'rk4' is available")
        if not (self.dt > 0) or not math.isfinite(self.dt):
            raise RejectedInput("dt must be positive and finite")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise RejectedInput("output_stride must be a positive integer")


def n_steps(T, dt):
    if not (T > 0):
        raise RejectedInput("T must be positive")
    n = int(round(T / dt))
    if n < 1:
        raise RejectedInput(f"T={T} is shorter than one step of dt={dt}")
    if n > MAX_STEPS:
        raise RejectedInput(f"T/dt = {n} exceeds the cap of {MAX_STEPS} steps")
    return n


def _axpy(y, k, h):
    return [a + h * b for a, b in zip(y, k)]


def rk4(f, y, h):
    """One classical fourth-order Runge-Kutta step for a list of arrays."""
    k1 = f(y)
    k2 = f(_axpy(y, k1, h / 2))
    k3 = f(_axpy(y, k2, h / 2))
    k4 = f(_axpy(y, k3, h))
    return [a + (h / 6) * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]


@dataclass
class Trajectory:
    """Time series sampled every ``output_stride`` steps.

    ``diagnostic`` holds the scheme's conservation diagnostic, named in
    ``metadata["diagnostic"]``: the state norm for mean-field runs, the
    unitarity defect (unitary mode) or Hermiticity/trace defect (operator
    mode) for Heisenberg runs. ``states`` is filled only for dense runs.
    """

    t: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    interaction_energy: np.ndarray
    diagnostic: np.ndarray
    total_energy: np.ndarray
    metadata: dict = field(default_factory=dict)
    states: Optional[list] = None
    final: object = None

    def __len__(self):
        return self.t.shape[0]

    @property
    def dt_out(self):
        return float(self.t[1] - self.t[0]) if len(self) > 1 else float("nan")

    def columns(self):
        M = self.Q.shape[1]
        return (["t"] + [f"Q_{j + 1}" for j in range(M)] + [f"P_{j + 1}" for j in range(M)]
                + ["E_interaction", "norm_or_unitarity_defect", "total_energy"])

    def table(self):
        return np.column_stack([self.t, self.Q, self.P, self.interaction_energy, self.diagnostic, self.total_energy])


class Recorder:
    def __init__(self, real_dtype, dense, metadata):
        self.rows = []
        self.states = [] if dense else None
        self.real_dtype = real_dtype
        self.metadata = metadata

    def add(self, t, Q, P, E, diag, total, state=None, step=0):
        """Append a row; a non-finite row is dropped and raises DivergenceError."""
        if not np.isfinite(np.sum(Q) + np.sum(P) + E + diag + total):
            self._diverge(step)
        self.rows.append((t, Q.copy(), P.copy(), E, diag, total))
        if self.states is not None:
            self.states.append(state)

    def check_finite(self, step, *arrays):
        for a in arrays:
            if not np.isfinite(a.sum()):
                self._diverge(step)

    def _diverge(self, step):
        raise DivergenceError(f"{self.metadata.get('scheme', 'propagation')} diverged at step {step}",
                              step, self.build(diverged_at=step), self.metadata.get("scheme"))

    def build(self, final=None, diverged_at=None):
        rd = self.real_dtype
        if self.rows:
            t, Q, P, E, d, tot = zip(*self.rows)
            arrays = [np.array(t, dtype=rd), np.array(Q, dtype=rd), np.array(P, dtype=rd),
                      np.array(E, dtype=rd), np.array(d, dtype=rd), np.array(tot, dtype=rd)]
        else:
            arrays = [np.zeros(0, rd), np.zeros((0, 1), rd), np.zeros((0, 1), rd)] + [np.zeros(0, rd)] * 3
        meta = dict(self.metadata)
        if diverged_at is not None:
            meta["diverged"] = True
            meta["diverged_at_step"] = int(diverged_at)
        return Trajectory(*arrays, metadata=meta, states=self.states, final=final)


def write_trajectory_csv(traj, dest):
    """Write ``traj`` as CSV with a header row; floats use 17 significant digits."""
    close = False
    if not hasattr(dest, "write"):
        dest = open(dest, "w", newline="")
        close = True
    try:
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(traj.columns())
        for row in traj.table():
            writer.writerow([format(float(x), ".17g") for x in row])
    finally:
        if close:
            dest.close()


def read_trajectory_csv(source):
    """Load a trajectory CSV back into a ``Trajectory`` (no states or metadata)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    data = np.array([[float(x) for x in row] for row in reader if row], dtype=float).reshape(-1, len(header))
    M = sum(1 for h in header if h.startswith("Q_"))
    if header != ["t"] + [f"Q_{j + 1}" for j in range(M)] + [f"P_{j + 1}" for j in range(M)] + \
            ["E_interaction", "norm_or_unitarity_defect", "total_energy"]:
        raise RejectedInput(f"unexpected trajectory header {header}")
    return Trajectory(t=data[:, 0], Q=data[:, 1:1 + M], P=data[:, 1 + M:1 + 2 * M],
                      interaction_energy=data[:, 1 + 2 * M], diagnostic=data[:, 2 + 2 * M],
                      total_energy=data[:, 3 + 2 * M])
