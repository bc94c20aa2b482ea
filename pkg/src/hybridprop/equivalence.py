"""Numerical checks that the mean-field and quasiclassical-bracket schemes agree.

The two schemes are run from identical initial data with identical RK4
discretizations. Their trajectories agree up to the discretization residual,
which must vanish at fourth order as ``dt -> 0``.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .errors import DivergenceError, RejectedInput
from .heisenberg import HeisenbergState, HeisenbergStepper, propagate_heisenberg
from .integrate import IntegratorSpec, PRECISIONS
from .meanfield import MeanFieldState, MeanFieldStepper, propagate_meanfield
from .models import ClassicalState, build_oscillator_oscillator
from .operators import as_state

__all__ = ["DeviationReport", "ConvergenceReport", "BenchmarkRow", "BenchmarkReport", "deviation",
           "compare_schemes", "convergence_study", "energy_rate_check", "benchmark_schemes"]


@dataclass(frozen=True)
class DeviationReport:
    """Max-over-grid deviations; ``time_of_max`` is when the largest of the three occurs."""

    max_abs_delta_Q: float
    max_abs_delta_P: float
    max_abs_delta_E: float
    time_of_max: float
    grid_points: int

    def as_dict(self):
        return asdict(self)


def deviation(a, b):
    """Compare two trajectories recorded on the same grid."""
    if len(a) != len(b) or not np.array_equal(a.t, b.t):
        raise RejectedInput("trajectories are not on the same time grid")
    dQ = np.max(np.abs(a.Q - b.Q), axis=1)
    dP = np.max(np.abs(a.P - b.P), axis=1)
    dE = np.abs(a.interaction_energy - b.interaction_energy)
    worst = np.argmax(np.maximum(np.maximum(dQ, dP), dE))
    return DeviationReport(float(dQ.max()), float(dP.max()), float(dE.max()), float(a.t[worst]), len(a))


def compare_schemes(model, init_psi, init_classical, spec, T, mode="operator", precision="double", threads=1):
    """Run both schemes from ``(init_psi, init_classical)`` and report their deviation.

    ``mode`` picks the Heisenberg representation. In ``"unitary"`` mode the
    RK4 stages of ``U`` applied to ``|t0>`` reproduce the mean-field stages
    exactly, so the deviation is pure rounding. ``"operator"`` integrates the
    operator equations themselves and exposes the true discretization
    residual. ``threads > 1`` runs the two propagations concurrently.
    """
    psi = as_state(init_psi)
    mf_init = MeanFieldState(psi, init_classical)
    h_init = HeisenbergState.start(model, psi, init_classical, mode)

    def run_mf():
        return propagate_meanfield(model, mf_init, spec, T, precision=precision)

    def run_h():
        return propagate_heisenberg(model, h_init, spec, T, precision=precision)

    def labelled(fn, label):
        try:
            return fn()
        except DivergenceError as exc:
            raise DivergenceError(f"[{label}] {exc}", exc.step, exc.trajectory, label) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fa = pool.submit(labelled, run_mf, "meanfield")
            fb = pool.submit(labelled, run_h, "heisenberg")
            a, b = fa.result(), fb.result()
    else:
        a, b = labelled(run_mf, "meanfield"), labelled(run_h, "heisenberg")
    return deviation(a, b)


@dataclass
class ConvergenceReport:
    entries: list
    slopes: dict
    monotone: bool
    floor: float
    findings: list = field(default_factory=list)

    def as_dict(self):
        return {
            "entries": [{"dt": dt, **rep.as_dict()} for dt, rep in self.entries],
            "slopes": self.slopes,
            "monotone": self.monotone,
            "floor": self.floor,
            "findings": list(self.findings),
        }


_QUANTITIES = {"Q": "max_abs_delta_Q", "P": "max_abs_delta_P", "E": "max_abs_delta_E"}


def convergence_study(model, init_psi, init_classical, dt_list, T, mode="operator", precision="double",
                      output_time_step=None, floor=None):
    """Scheme deviation as a function of step size.

    Every run records on the same time grid (``output_time_step``, by default
    the largest ``dt``), so all ``dt`` must divide it. Deviations at or below
    ``floor`` (default ``1000 * eps`` of the working precision) count as
    rounding noise and are left out of the log-log slope fit. Non-monotone
    behaviour is reported in ``findings`` rather than raised.
    """
    dt_list = [float(dt) for dt in dt_list]
    if len(dt_list) < 3:
        raise RejectedInput("convergence_study needs at least three step sizes")
    if any(dt <= 0 for dt in dt_list) or any(a <= b for a, b in zip(dt_list, dt_list[1:])):
        raise RejectedInput("dt_list must be positive and strictly descending")
    grid = output_time_step or dt_list[0]
    if floor is None:
        floor = 1000 * float(np.finfo(PRECISIONS[precision][1]).eps)
    entries = []
    for dt in dt_list:
        stride = round(grid / dt)
        if stride < 1 or abs(stride * dt - grid) > 1e-9 * grid:
            raise RejectedInput(f"dt={dt} does not divide the output grid spacing {grid}")
        rep = compare_schemes(model, init_psi, init_classical, IntegratorSpec(dt, stride), T, mode, precision)
        entries.append((dt, rep))
    findings, slopes, monotone = [], {}, True
    for name, attr in _QUANTITIES.items():
        devs = [getattr(rep, attr) for _, rep in entries]
        for i in range(1, len(devs)):
            slack = 1.1 if i == len(devs) - 1 else 1.0
            if devs[i] > slack * devs[i - 1] and devs[i] > floor:
                monotone = False
                findings.append(f"{name}: deviation grew from {devs[i - 1]:.3e} to {devs[i]:.3e} at dt={dt_list[i]}")
        usable = [(dt, d) for dt, d in zip(dt_list, devs) if d > floor]
        if len(usable) >= 2:
            x, y = np.log([u[0] for u in usable]), np.log([u[1] for u in usable])
            slopes[name] = float(np.polyfit(x, y, 1)[0])
            if not 3.5 <= slopes[name] <= 4.5:
                findings.append(f"{name}: fitted order {slopes[name]:.2f} outside [3.5, 4.5]")
        else:
            slopes[name] = None
            findings.append(f"{name}: deviations at rounding floor ({floor:.1e}); slope fit skipped")
    return ConvergenceReport(entries, slopes, monotone, floor, findings)


def _commutator_rate(Hi, Hq, ket, hbar):
    C = Hi @ Hq - Hq @ Hi
    return ((ket.conj() @ (C @ ket)) / (1j * hbar)).real


def energy_rate_check(model, traj):
    """Largest gap between the finite-difference ``dE/dt`` and ``<[H_i, H_q]> / i hbar``.

    Needs a dense trajectory run with frozen classical coordinates. The
    centered difference is taken on the recorded grid and compared with the
    commutator at each interior point; the gap scales as the grid spacing
    squared.
    """
    meta = traj.metadata
    if traj.states is None:
        raise RejectedInput("energy_rate_check needs a dense trajectory (dense=True)")
    if not meta.get("frozen_classical"):
        raise RejectedInput("energy_rate_check needs a frozen-classical trajectory")
    if meta.get("scheme") not in ("meanfield", "heisenberg"):
        raise RejectedInput(f"unsupported scheme {meta.get('scheme')!r}")
    if len(traj) < 3:
        raise RejectedInput("need at least three grid points")
    hbar = model.hbar
    Hq = model.quantum_hamiltonian
    rates = []
    for s in traj.states:
        Q = s.classical.Q
        if meta["scheme"] == "meanfield":
            rates.append(_commutator_rate(model.interaction_operator(Q), Hq, s.psi, hbar))
        elif s.mode == "unitary":
            U, Ud = s.U, s.U.conj().T
            Hi_h = Ud @ model.interaction_operator(Q) @ U
            Hq_h = Ud @ Hq @ U
            rates.append(_commutator_rate(Hi_h, Hq_h, s.initial_ket, hbar))
        else:
            xs = s.heisenberg_ops
            coeffs = model.coupling_coefficients(Q)
            Hi_h = np.tensordot(coeffs, xs[1:1 + len(coeffs)], axes=1) if len(coeffs) else np.zeros_like(xs[0])
            rates.append(_commutator_rate(Hi_h, xs[0], s.initial_ket, hbar))
    rates = np.array(rates)
    E, t = traj.interaction_energy, traj.t
    fd = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    return float(np.max(np.abs(fd - rates[1:-1])))


@dataclass(frozen=True)
class BenchmarkRow:
    N: int
    meanfield_step_seconds: float
    heisenberg_step_seconds: float
    ratio: float
    meanfield_total_seconds: float
    heisenberg_total_seconds: float


@dataclass
class BenchmarkReport:
    rows: list
    steps: int
    repeats: int
    mode: str
    backend: str
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {"steps": self.steps, "repeats": self.repeats, "mode": self.mode, "backend": self.backend,
                "notes": list(self.notes), "rows": [asdict(r) for r in self.rows]}

    def ratios(self):
        return [r.ratio for r in self.rows]


def _time_blocks(stepper, steps, repeats, warmup):
    """Wall time of each of ``repeats`` consecutive blocks that together make up ``steps`` steps."""
    for _ in range(warmup):
        stepper.step()
    sizes = [steps // repeats + (1 if i < steps % repeats else 0) for i in range(repeats)]
    times = []
    for size in sizes:
        start = time.perf_counter()
        for _ in range(size):
            stepper.step()
        times.append(time.perf_counter() - start)
    return np.array(times), np.array(sizes)


def benchmark_schemes(N_list, steps, repeats=5, mode="unitary", lam=0.2, warmup=100, backend=None, model_kwargs=None):
    """Median per-step wall time of both schemes on oscillator-oscillator models of size ``N``.

    A mean-field step costs matrix-vector products (``O(N^2)``) while a
    Heisenberg step costs matrix-matrix products (``O(N^3)``). For each scheme
    the ``steps`` steps run as ``repeats`` consecutive timed blocks after
    ``warmup`` discarded steps; the per-step time is the median over blocks.
    Everything runs sequentially. If a step is too fast to time reliably
    (under 100 ns) the step count is doubled until it is not, and a note is
    added.
    """
    N_list = [int(n) for n in N_list]
    if not N_list:
        raise RejectedInput("N_list must not be empty")
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise RejectedInput("N_list must be strictly ascending")
    if steps < 1:
        raise RejectedInput("steps must be positive")
    if repeats < 1 or repeats > steps:
        raise RejectedInput("repeats must be between 1 and steps")
    kw = dict(omega_q=0.5, mass_q=1.0, mass_c=1.0, omega_c=1.0)
    kw.update(model_kwargs or {})
    notes, rows = [], []
    if steps < 1000:
        notes.append(f"steps={steps} is below the recommended minimum of 1000")
    c = ClassicalState([1.0], [0.0])
    for N in N_list:
        model = build_oscillator_oscillator(N, lam=lam, **kw)
        ket = np.zeros(N, dtype=complex)
        ket[0] = 1.0
        n = steps
        while True:
            mf = MeanFieldStepper(model, ket, c, 1e-3, backend=backend)
            hs = HeisenbergStepper(model, HeisenbergState.start(model, ket, c, mode), 1e-3, backend=backend)
            mf_times, sizes = _time_blocks(mf, n, repeats, warmup)
            h_times, _ = _time_blocks(hs, n, repeats, warmup)
            if min(mf_times.min(), h_times.min()) / sizes.max() >= 1e-7:
                break
            n *= 2
            notes.append(f"N={N}: per-step time under 100 ns, steps increased to {n}")
        mf_step = float(np.median(mf_times / sizes))
        h_step = float(np.median(h_times / sizes))
        rows.append(BenchmarkRow(N, mf_step, h_step, h_step / mf_step, float(mf_times.sum()), float(h_times.sum())))
    return BenchmarkReport(rows, steps, repeats, mode, backend or kernels.BACKEND, notes)
