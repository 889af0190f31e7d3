"""Time the numba and numpy backends on SOM training and Monte-Carlo forecasting.

    python3 benchmarks/bench_kernels.py [--repeat 3]

The first call includes numba compilation unless the on-disk cache is
warm; it is reported separately and excluded from the steady-state timings. Both backends consume identical uniforms, so the
script also checks that their outputs agree.
"""

import argparse
import time

import numpy as np

from doublevq import _kernels, datasets, dvq, som
from doublevq.series import LagSpec, build_regressors
from doublevq.som import SomConfig


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    series = datasets.generate(datasets.GeneratorConfig("mackey_glass", 5000, 7))
    spec = LagSpec(1, (0, 1, 2, 3, 5, 6))
    data = build_regressors(series.values, spec).vectors
    cfg = SomConfig(k=60, seed=0)
    model = dvq.fit(series, spec, SomConfig(40), SomConfig(20), seed=0)

    cases = {
        "som.train (4994 x 7, k=60, 50 epochs)": lambda: som.train(data, cfg).prototypes,
        "monte_carlo (1000 paths x 100 steps)":
            lambda: dvq.monte_carlo(model, series, 100, 1000, master_seed=0).paths,
    }
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    print(f"{'case':42s} {'backend':8s} {'first call':>11s} {'best':>9s}")
    for name, fn in cases.items():
        outputs = {}
        for backend in backends:
            with _kernels.use_backend(backend):
                t0 = time.perf_counter()
                fn()
                first = time.perf_counter() - t0
                best, outputs[backend] = best_of(fn, args.repeat)
            print(f"{name:42s} {backend:8s} {first:10.3f}s {best:8.3f}s")
        if len(outputs) == 2:
            agree = np.allclose(outputs["numpy"], outputs["numba"], rtol=1e-9, atol=1e-12)
            print(f"{'':42s} outputs agree: {agree}")


if __name__ == "__main__":
    main()
