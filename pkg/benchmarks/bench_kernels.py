"""Compare the compiled and pure-Python integration kernels.

Usage: python3 benchmarks/bench_kernels.py [--n 10 50 100] [--repeat 3]

Times one forward sweep plus one adjoint sweep of the single-excitation
dynamics on a disordered ensemble with a random pulse, and checks that both
backends produce the same fidelity and gradient.
"""

import argparse
import time

import numpy as np

from tcsr import kernels
from tcsr.core import Pulse, SqrtScaled, SystemConfig, arrow_problem
from tcsr.engine import HorizonPolicy, gradient, run_forward


def _run(problem, pulse, policy, backend):
    saved = kernels.forward, kernels.adjoint
    kernels.forward, kernels.adjoint = backend
    try:
        t0 = time.perf_counter()
        fwd = run_forward(problem, pulse, policy, rtol=1e-9)
        t1 = time.perf_counter()
        g = gradient(problem, fwd, pulse.n_segments, rtol=1e-9)
        t2 = time.perf_counter()
    finally:
        kernels.forward, kernels.adjoint = saved
    return fwd.cost, g, t1 - t0, t2 - t1


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[10, 50, 100])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; only the Python backend is available")
        return 1
    policy = HorizonPolicy(max_time=60.0, residual_cutoff=1e-8)
    rng = np.random.default_rng(0)
    print(f"{'N':>5} {'backend':>8} {'forward s':>10} {'adjoint s':>10} {'speedup':>8} "
          f"{'|dF|':>9} {'|dgrad|':>9}")
    for n in args.n:
        cfg = SystemConfig(rng.uniform(-5, 5, n), SqrtScaled(1.0), 1.0, 0.5)
        pulse = Pulse(10.0, rng.normal(0, 1, 100))
        prob = arrow_problem(cfg)
        best = {}
        for name, be in (("cython", cy), ("python", py)):
            runs = [_run(prob, pulse, policy, be) for _ in range(args.repeat)]
            f, g = runs[0][0], runs[0][1]
            best[name] = (f, g, min(r[2] for r in runs), min(r[3] for r in runs))
        fc, gc, tfc, tac = best["cython"]
        fp, gp, tfp, tap = best["python"]
        speed = (tfp + tap) / (tfc + tac)
        df, dg = abs(fc - fp), float(np.max(np.abs(gc - gp)))
        print(f"{n:>5} {'cython':>8} {tfc:>10.4f} {tac:>10.4f} {speed:>8.1f} {df:>9.1e} {dg:>9.1e}")
        print(f"{n:>5} {'python':>8} {tfp:>10.4f} {tap:>10.4f} {1.0:>8.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
