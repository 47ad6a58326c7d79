"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--count N] [--cells C] [--repeat R]

Times counter-based uniform generation, inverse-CDF cell draws and a full
vacuum ensemble, checks that both backends return identical bits, and prints
one line per measurement.
"""
import argparse
import time

import numpy as np

from wigsim import _kernels
from wigsim import measurement, phase_space, sampler, states
from wigsim.discretization import select_parameters


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=1_000_000)
    ap.add_argument("--cells", type=int, default=253 * 253)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    names = sorted(_kernels.BACKENDS)
    if "compiled" not in names:
        print("compiled backend not built; timing the numpy fallback only")
    key = _kernels.stream_key(2024, 0)
    rng = np.random.default_rng(0)
    cdf = np.cumsum(rng.random(args.cells))

    w = states.make_evaluator(states.vacuum())
    spec = measurement.GaussianMeasurementSpec((0.25 * np.eye(2),))
    amap = phase_space.identity(1)
    params = select_parameters(0.05, 0.25, [w], spec, amap, "practical", delta=0.05, area=160.0)
    config = sampler.RunConfig([w], amap, spec, params, args.count, seed=2024)

    results = {}
    for name in names:
        be = _kernels.get_backend(name)
        t_u, u = best_of(lambda: be.uniforms(key, 0, args.count), args.repeat)
        t_d, d = best_of(lambda: be.draw_cells(cdf, key, 0, args.count), args.repeat)
        sim = sampler.Simulator(config, backend=be)
        t_e, ens = best_of(lambda: sim.run_ensemble(), max(1, args.repeat // 2))
        results[name] = (u, d, ens.outcomes)
        print(f"{name:>9}  uniforms {args.count / t_u / 1e6:8.1f} M/s   "
              f"draw_cells {args.count / t_d / 1e6:8.1f} M/s   "
              f"ensemble {args.count / t_e / 1e6:6.2f} M traj/s")

    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        same = all(np.array_equal(x, y) for x, y in zip(a, b))
        print(f"bit-identical outputs: {same}")


if __name__ == "__main__":
    main()
