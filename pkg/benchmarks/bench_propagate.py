"""Time the compiled and numpy propagation kernels on the same workload.

Usage::

    python3 benchmarks/bench_propagate.py --n 500 --steps 200 --repeat 3
"""
import argparse
import time

import numpy as np

from tclham import _kernels
from tclham.model import ModelParams, build_model
from tclham.propagator import default_step


def _time_kernel(kernel, model, steps, repeat):
    C = model.couplings.entries
    e1 = np.ascontiguousarray(model.lower_energies)
    e2 = np.ascontiguousarray(model.upper_energies)
    dt = default_step(model)
    best = np.inf
    final = None
    for _ in range(repeat):
        a = np.full(model.N1, 1 / np.sqrt(model.N1), dtype=complex)
        b = np.zeros(model.N2, dtype=complex)
        start = time.perf_counter()
        kernel(C, e1, e2, model.params.coupling_strength, a, b, 0.0, dt, steps)
        best = min(best, time.perf_counter() - start)
        final = np.concatenate([a, b])
    return best, final


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500, help="levels per band")
    ap.add_argument("--steps", type=int, default=200, help="RK4 steps per timing")
    ap.add_argument("--repeat", type=int, default=3, help="timings per kernel (best is reported)")
    args = ap.parse_args(argv)

    model = build_model(ModelParams(args.n, args.n, 0.5, 5e-4), 0)
    t_py, psi_py = _time_kernel(_kernels.rk4_bright_py, model, args.steps, args.repeat)
    print(f"numpy    {t_py / args.steps * 1e3:8.3f} ms/step")
    if _kernels.rk4_bright_compiled is None:
        print("compiled kernel not built; run `python3 setup.py build_ext --inplace`")
        return 0
    t_cy, psi_cy = _time_kernel(_kernels.rk4_bright_compiled, model, args.steps, args.repeat)
    print(f"compiled {t_cy / args.steps * 1e3:8.3f} ms/step")
    print(f"speedup  {t_py / t_cy:8.2f}x")
    print(f"max |difference| {np.abs(psi_py - psi_cy).max():.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
