"""Command-line front end.

    hybridprop run --model spin.json --scheme compare --dt 1e-3 --T 10 --out dev.json

Exit status: 0 on success, 1 on usage or input errors, 2 on numerical
divergence (partial output is written and flagged in its metadata).
"""

import argparse
import csv
import json
import logging
import os
import sys
import tempfile

import numpy as np

from .equivalence import benchmark_schemes, compare_schemes, convergence_study, energy_rate_check
from .errors import DivergenceError, HybridPropError
from .heisenberg import HeisenbergState, propagate_alternative, propagate_heisenberg
from .integrate import IntegratorSpec, write_trajectory_csv
from .meanfield import MeanFieldState, propagate_meanfield
from .models import ClassicalState, load_model
from .operators import as_state, ground_state, normalize

log = logging.getLogger("hybridprop")

SCHEMES = ("meanfield", "heisenberg-unitary", "heisenberg-operator", "alternative", "compare", "bench", "check")

CONFIG_HELP = """\
model config (JSON object):
  {"model": "spin_oscillator", "epsilon": 1.0, "delta": 0.5,
   "mass": 1.0, "omega": 1.0, "gamma": 0.1, "hbar": 1.0}
  {"model": "oscillator_oscillator", "N": 32, "omega_q": 0.5, "mass_q": 1.0,
   "mass_c": 1.0, "omega_c": 1.0, "lambda": 0.2, "nonlinear": false, "hbar": 1.0}
  "hbar" and "nonlinear" are optional; unknown keys are rejected.

outputs:
  meanfield, heisenberg-*, alternative
      trajectory CSV, columns
      t,Q_1..Q_M,P_1..P_M,E_interaction,norm_or_unitarity_defect,total_energy
      plus OUT.meta.json (and OUT.states.npz with --dense)
  compare   deviation report JSON (convergence report with --dt-list)
  bench     benchmark table, CSV if OUT ends in .csv, else JSON
  check     conservation and energy-rate report JSON

environment:
  HYBRIDPROP_THREADS     concurrent trajectory tasks for compare (default 1)
  HYBRIDPROP_PURE_PYTHON set to 1 to disable the compiled kernels
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    parser = _Parser(prog="hybridprop", description="Quantum-classical hybrid propagation.",
                     epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="run")
    sub.required = True
    run = sub.add_parser("run", help="run a scheme, comparison, benchmark or check", epilog=CONFIG_HELP,
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("--model", required=True, help="model config file (JSON)")
    run.add_argument("--scheme", required=True, choices=SCHEMES)
    run.add_argument("--dt", type=float, default=1e-3)
    run.add_argument("--T", type=float, default=10.0)
    run.add_argument("--stride", type=int, default=1, help="output stride in steps")
    run.add_argument("--init", default="0",
                     help='initial quantum state: basis index, "ground", or comma-separated complex amplitudes')
    run.add_argument("--Q0", type=_floats, default=[1.0], help="initial classical coordinates")
    run.add_argument("--P0", type=_floats, default=[0.0], help="initial classical momenta")
    run.add_argument("--out", required=True, help="output path")
    run.add_argument("--dense", action="store_true", help="also store the full state at every output row")
    run.add_argument("--precision", choices=("double", "extended"), default="double")
    run.add_argument("--mode", choices=("unitary", "operator"), default=None,
                     help="Heisenberg representation for compare/alternative/bench")
    run.add_argument("--freeze-classical", action="store_true", help="hold Q and P fixed")
    run.add_argument("--dt-list", type=_floats, default=None, help="compare: run a convergence study instead")
    run.add_argument("--N", type=_ints, default=[8, 32, 128], help="bench: basis sizes")
    run.add_argument("--steps", type=int, default=2000, help="bench: steps per scheme and size")
    run.add_argument("--repeats", type=int, default=5, help="bench: timed blocks")
    return parser


def _atomic_write(path, write):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, doc):
    _atomic_write(path, lambda fh: (json.dump(doc, fh, indent=2, sort_keys=True), fh.write("\n")))


def _initial_state(model, spec):
    spec = spec.strip()
    if spec == "ground":
        return ground_state(model.quantum_hamiltonian)
    if spec.lstrip("-").isdigit():
        k = int(spec)
        if not 0 <= k < model.dim:
            raise UsageError(f"--init basis index {k} out of range for dim {model.dim}")
        psi = np.zeros(model.dim, dtype=complex)
        psi[k] = 1.0
        return as_state(psi)
    try:
        amps = [complex(x.replace(" ", "")) for x in spec.split(",")]
    except ValueError:
        raise UsageError(f"--init: cannot parse {spec!r}") from None
    if len(amps) != model.dim:
        raise UsageError(f"--init has {len(amps)} amplitudes, model dim is {model.dim}")
    psi, change = normalize(amps)
    if change > 1e-9:
        log.warning("initial amplitudes renormalized (norm changed by %.3e)", change)
    return psi


def _save_states(path, traj):
    arrays = {"t": traj.t.astype(float), "Q": traj.Q.astype(float), "P": traj.P.astype(float)}
    first = traj.states[0]
    if hasattr(first, "psi"):
        arrays["psi"] = np.array([s.psi for s in traj.states], dtype=complex)
    elif first.mode == "unitary":
        arrays["U"] = np.array([s.U for s in traj.states], dtype=complex)
    else:
        arrays["heisenberg_ops"] = np.array([s.heisenberg_ops for s in traj.states], dtype=complex)
    tmp = path + ".tmp.npz"
    np.savez(tmp, **arrays)
    os.replace(tmp, path)


def _jsonable(meta):
    return {k: (v if isinstance(v, (str, bool, int, float, list, type(None))) else str(v)) for k, v in meta.items()}


def _write_trajectory(args, traj):
    _atomic_write(args.out, lambda fh: write_trajectory_csv(traj, fh))
    meta = dict(traj.metadata)
    meta.setdefault("diverged", False)
    _write_json(args.out + ".meta.json", _jsonable(meta))
    if args.dense and traj.states:
        _save_states(args.out + ".states.npz", traj)


def _run_trajectory(args, model, psi, c, spec):
    if args.scheme == "meanfield":
        return propagate_meanfield(model, MeanFieldState(psi, c), spec, args.T, args.precision, args.dense,
                                   args.freeze_classical)
    if args.scheme == "alternative":
        mode = args.mode or "unitary"
        init = HeisenbergState.start(model, psi, c, mode, track_coordinates=True)
        return propagate_alternative(model, init, spec, args.T, args.precision, args.dense, args.freeze_classical)
    mode = args.scheme.split("-")[1]
    init = HeisenbergState.start(model, psi, c, mode)
    return propagate_heisenberg(model, init, spec, args.T, args.precision, args.dense, args.freeze_classical)


def _run_check(args, model, psi, c, spec):
    mf = propagate_meanfield(model, MeanFieldState(psi, c), spec, args.T, args.precision)
    hu = propagate_heisenberg(model, HeisenbergState.start(model, psi, c, "unitary"), spec, args.T, args.precision)
    frozen_mf = propagate_meanfield(model, MeanFieldState(psi, c), spec, args.T, args.precision,
                                    dense=True, freeze_classical=True)
    frozen_h = propagate_heisenberg(model, HeisenbergState.start(model, psi, c, "unitary"), spec, args.T,
                                    args.precision, dense=True, freeze_classical=True)
    return {
        "norm_drift": float(np.max(np.abs(mf.diagnostic - 1))),
        "meanfield_energy_drift": float(np.max(np.abs(mf.total_energy - mf.total_energy[0]))),
        "heisenberg_energy_drift": float(np.max(np.abs(hu.total_energy - hu.total_energy[0]))),
        "unitarity_defect": float(np.max(hu.diagnostic)),
        "energy_rate_residual_meanfield": energy_rate_check(model, frozen_mf),
        "energy_rate_residual_heisenberg": energy_rate_check(model, frozen_h),
        "dt": args.dt,
        "T": args.T,
    }


def _run_bench(args, cfg):
    if cfg.get("model") != "oscillator_oscillator":
        raise UsageError("bench needs an oscillator_oscillator model config")
    kw = {k: cfg[k] for k in ("omega_q", "mass_q", "mass_c", "omega_c", "nonlinear", "hbar") if k in cfg}
    report = benchmark_schemes(args.N, args.steps, repeats=args.repeats, mode=args.mode or "unitary",
                               lam=cfg["lambda"], model_kwargs=kw)
    if args.out.endswith(".csv"):
        fields = ["N", "meanfield_step_seconds", "heisenberg_step_seconds", "ratio",
                  "meanfield_total_seconds", "heisenberg_total_seconds"]

        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(fields)
            for row in report.rows:
                w.writerow([getattr(row, f) if f == "N" else format(getattr(row, f), ".6g") for f in fields])

        _atomic_write(args.out, write)
        for note in report.notes:
            log.warning("%s", note)
    else:
        _write_json(args.out, report.as_dict())


def run(args):
    try:
        with open(args.model) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read model config {args.model!r}: {exc.strerror}") from None
    model = load_model(text)
    if args.scheme == "bench":
        if args.steps < 1:
            raise UsageError("--steps must be positive")
        return _run_bench(args, json.loads(text))
    if args.stride < 1:
        raise UsageError("--stride must be >= 1")
    spec = IntegratorSpec(args.dt, args.stride)
    psi = _initial_state(model, args.init)
    c = ClassicalState(args.Q0, args.P0)
    if c.dim != model.n_classical:
        raise UsageError(f"--Q0/--P0 need {model.n_classical} values")
    if args.scheme == "compare":
        mode = args.mode or "operator"
        if args.dt_list:
            report = convergence_study(model, psi, c, args.dt_list, args.T, mode, args.precision)
        else:
            threads = max(1, int(os.environ.get("HYBRIDPROP_THREADS", "1") or 1))
            report = compare_schemes(model, psi, c, spec, args.T, mode, args.precision, threads=threads)
        _write_json(args.out, report.as_dict())
    elif args.scheme == "check":
        _write_json(args.out, _run_check(args, model, psi, c, spec))
    else:
        _write_trajectory(args, _run_trajectory(args, model, psi, c, spec))


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run(args)
    except DivergenceError as exc:
        print(f"hybridprop: divergence: {exc}", file=sys.stderr)
        if exc.trajectory is not None and args.scheme not in ("compare", "bench", "check"):
            _write_trajectory(args, exc.trajectory)
        elif args.scheme == "compare":
            _write_json(args.out, {"diverged": True, "scheme": exc.scheme, "step": exc.step})
        return 2
    except (UsageError, HybridPropError) as exc:
        print(f"hybridprop: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
