"""Time the compiled and pure-Python integration kernels on the fig1 potential.

    python benchmarks/bench_kernels.py [--repeat N] [--refine R]
"""

import argparse
import time

import numpy as np

from ccsusy import kernels
from ccsusy.models import figure_preset
from ccsusy.oracle import IntegrationConfig, integrate_regular, extract_jost
from ccsusy.susy import U0Parametrization, transform


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--refine", type=float, default=4.0)
    ap.add_argument("--energy", type=float, default=15.0)
    args = ap.parse_args(argv)

    preset = figure_preset("fig1")
    res = transform(preset.spec, U0Parametrization(preset.u0))
    channels = preset.spec.channels
    base = IntegrationConfig.for_transform(res, 20.0, refine=args.refine)
    available = kernels.backends()
    print(f"steps={int(np.ceil(base.r_max / base.step))} r_max={base.r_max:g} "
          f"backends={', '.join(available)} default={kernels.BACKEND}")
    print(f"{'method':8s} {'backend':8s} {'seconds':>10s} {'speedup':>8s} {'max |dF|':>10s}")
    for method in ("rk4", "numerov"):
        cfg = IntegrationConfig(base.r_max, base.step, method)
        times, jost = {}, {}
        for name, pair in available.items():
            run = lambda: integrate_regular(res.potential, args.energy, channels, cfg, backend=pair)
            times[name], trace = best_time(run, args.repeat)
            jost[name] = extract_jost(trace, channels)
        ref = times["python"]
        for name in available:
            dev = np.abs(jost[name] - jost["python"]).max()
            print(f"{method:8s} {name:8s} {times[name]:10.5f} {ref / times[name]:8.2f} {dev:10.2e}")


if __name__ == "__main__":
    main()
