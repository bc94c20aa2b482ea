"""Per-step cost of the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--N 8,32,128] [--steps 500] [--precision double]

Prints one row per (precision, N, stepper) with the median per-step time
under each backend and the speed-up of the compiled one.
"""

import argparse
import time

import numpy as np

from hybridprop import ClassicalState, HeisenbergState, build_oscillator_oscillator
from hybridprop.heisenberg import HeisenbergStepper
from hybridprop.meanfield import MeanFieldStepper

try:
    from hybridprop import _ckernels  # noqa: F401
    BACKENDS = ("python", "cython")
except ImportError:
    BACKENDS = ("python",)


def steppers(N, precision, backend):
    model = build_oscillator_oscillator(N, 0.5, 1.0, 1.0, 1.0, 0.2)
    ket = np.zeros(N, dtype=complex)
    ket[0] = 1.0
    c = ClassicalState([1.0], [0.0])
    yield "meanfield", MeanFieldStepper(model, ket, c, 1e-3, precision, backend=backend)
    for mode in ("unitary", "operator"):
        init = HeisenbergState.start(model, ket, c, mode)
        yield f"heisenberg-{mode}", HeisenbergStepper(model, init, 1e-3, precision, backend=backend)


def per_step(stepper, steps, blocks=5):
    for _ in range(min(steps, 20)):
        stepper.step()
    size = max(1, steps // blocks)
    times = []
    for _ in range(blocks):
        start = time.perf_counter()
        for _ in range(size):
            stepper.step()
        times.append((time.perf_counter() - start) / size)
    return float(np.median(times))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", default="8,32,128", type=lambda s: [int(x) for x in s.split(",")])
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--precision", choices=("double", "extended", "both"), default="both")
    args = ap.parse_args(argv)
    precisions = ("double", "extended") if args.precision == "both" else (args.precision,)
    print(f"{'precision':>9} {'N':>4} {'stepper':>20} " + " ".join(f"{b + ' [us]':>14}" for b in BACKENDS)
          + (f" {'speed-up':>9}" if len(BACKENDS) == 2 else ""))
    for precision in precisions:
        for N in args.N:
            # extended precision has no BLAS path; keep the largest sizes short
            steps = args.steps if precision == "double" or N <= 32 else max(10, args.steps // 20)
            timings = {b: dict((name, per_step(s, steps)) for name, s in steppers(N, precision, b)) for b in BACKENDS}
            for name in timings[BACKENDS[0]]:
                cells = [timings[b][name] * 1e6 for b in BACKENDS]
                line = f"{precision:>9} {N:>4} {name:>20} " + " ".join(f"{x:14.1f}" for x in cells)
                if len(BACKENDS) == 2:
                    line += f" {cells[0] / cells[1]:9.2f}"
                print(line, flush=True)


if __name__ == "__main__":
    main()
