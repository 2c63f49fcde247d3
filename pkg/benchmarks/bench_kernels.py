"""Compare the compiled and numpy FIM kernels (and the per-radar reference path).

    python benchmarks/bench_kernels.py [--draws 1000 5000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from msrbounds import kernels
from msrbounds.bounds import network_bound
from msrbounds.config import ScenarioConfig
from msrbounds.geometry import TargetState, node_positions
from msrbounds.scenario import effective_priors, point_priors, sample_targets


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--draws", type=int, nargs="+", default=[1000, 10000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--reference-draws", type=int, default=200)
    args = ap.parse_args()

    base = ScenarioConfig()
    nodes = base.nodes()
    pos = node_positions(nodes)
    w, b = base.waveform(), base.link_budget()
    pri = effective_priors(base, point_priors(base))

    print(f"backends available: {', '.join(kernels.available_backends())} (default {kernels.BACKEND})")
    print(f"{'draws':>8} {'backend':>10} {'fim [s]':>10} {'fim+inv [s]':>12} {'us/draw':>9}")
    for m in args.draws:
        p, v = sample_targets(base, m)
        ref = None
        for be in kernels.available_backends():
            t_fim = best_of(lambda: kernels.fused_fim(pos, p, v, w, b, pri, backend=be), args.repeat)
            t_all = best_of(lambda: kernels.batch_bounds(pos, p, v, w, b, pri, backend=be), args.repeat)
            res = kernels.batch_bounds(pos, p, v, w, b, pri, backend=be)
            if ref is None:
                ref = res.peb
            else:
                dev = float(np.max(np.abs(res.peb / ref - 1)))
                assert dev < 1e-9, f"{be} disagrees with the first backend ({dev:.2e})"
            print(f"{m:>8} {be:>10} {t_fim:>10.4f} {t_all:>12.4f} {1e6 * t_all / m:>9.2f}")

    m = args.reference_draws
    p, v = sample_targets(base, m)
    t_ref = best_of(
        lambda: [network_bound(nodes, TargetState(p[k], v[k]), w, b, pri) for k in range(m)], 1
    )
    print(f"{m:>8} {'reference':>10} {'':>10} {t_ref:>12.4f} {1e6 * t_ref / m:>9.2f}")


if __name__ == "__main__":
    main()
