"""Wall-clock comparison of the compiled and pure-Python event loops.

    python benchmarks/bench_kernel.py [--measure-time 220] [--repeat 3]

Both backends run identical configurations; the script also checks that they
return the same results.
"""

import argparse
import time

import numpy as np

from dcfdelay.params import bundled_profile
from dcfdelay.sim import SimConfig, available_backends, run_simulation

CASES = [
    ("n=5 lambda=5", dict(rates=(5.0,) * 5)),
    ("n=5 lambda=13", dict(rates=(13.0,) * 5)),
    ("n=10 lambda=3", dict(rates=(3.0,) * 10)),
    ("saturated n=20", dict(rates=(0.0,) * 20, saturated=True)),
]


def best_of(cfg, backend, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        m = run_simulation(cfg, backend=backend)
        times.append(time.perf_counter() - start)
    return min(times), m


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--measure-time", type=float, default=220.0, help="virtual seconds per run")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    params = bundled_profile()
    print(f"backends: {', '.join(backends)}; {args.measure_time:g} s virtual time; best of {args.repeat}")
    print(f"{'case':<18}" + "".join(f"{b + ' [s]':>14}" for b in backends) + ("   speedup  identical" if len(backends) == 2 else ""))
    for label, kw in CASES:
        rates = kw.pop("rates")
        cfg = SimConfig(rates, mac_phy=params, measure_time=args.measure_time, warmup_time=0.0, seed=1, **kw)
        kw["rates"] = rates
        results = {b: best_of(cfg, b, args.repeat) for b in backends}
        line = f"{label:<18}" + "".join(f"{results[b][0]:14.4f}" for b in backends)
        if len(backends) == 2:
            (tc, mc), (tp, mp) = results["cython"], results["python"]
            same = np.array_equal(mc.delays, mp.delays) and mc.successes == mp.successes
            line += f"{tp / tc:9.1f}x  {same}"
        print(line)


if __name__ == "__main__":
    main()
