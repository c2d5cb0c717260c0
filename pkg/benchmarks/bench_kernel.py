"""Compare the compiled and pure-Python slot loops.

Both kernels consume identical random streams, so the benchmark also checks
that their counters agree before reporting throughput in slots per second.

    python benchmarks/bench_kernel.py --horizon 200000 --repeat 3
"""

import argparse
import time

from fdwlan.geometry import GeometryConfig
from fdwlan.simulator import SimConfig, available_kernels, run

CASES = [(1, 1), (10, 5), (50, 5), (200, 5)]


def best_time(cfg, kernel, repeat):
    best, result = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = run(cfg, kernel=kernel)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--horizon", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--regime", default="FD", choices=("FD", "HD"))
    args = ap.parse_args(argv)

    if "compiled" not in available_kernels():
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")

    print(f"{'n':>5} {'M':>3} {'python s':>10} {'compiled s':>11} {'speedup':>8} "
          f"{'compiled slots/s':>17} identical")
    for n, M in CASES:
        cfg = SimConfig(GeometryConfig(1.0, M, n), regime=args.regime, horizon=args.horizon,
                        seed=1, topology_mode="sampled")
        t_py, r_py = best_time(cfg, "python", args.repeat)
        t_c, r_c = best_time(cfg, "compiled", args.repeat)
        same = r_py.counters == r_c.counters and r_py.tau_hat.tobytes() == r_c.tau_hat.tobytes()
        print(f"{n:>5} {M:>3} {t_py:>10.3f} {t_c:>11.4f} {t_py / t_c:>7.1f}x "
              f"{args.horizon / t_c:>17,.0f} {same}")


if __name__ == "__main__":
    main()
