"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--frames N] [--repeat R]

Prints one line per (kernel, backend) with the best wall time of R runs and
the speed-up of the compiled build.
"""

import argparse
import time

import numpy as np

from bpcodes import _fallback, codes
from bpcodes.channel import ChannelSpec, llr, transmit
from bpcodes.decoder import EdgeGraph, row_active

try:
    from bpcodes import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

EPS = 1e-7


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(code, frames, T):
    H = code.H.astype(np.float64)
    g = EdgeGraph.from_matrix(code.H)
    act = row_active(H)
    spec = ChannelSpec("awgn", 4.0, rate=code.rate)
    lam = np.ascontiguousarray(-llr(transmit(np.ones(code.n), spec, np.random.default_rng(0), batch=frames)))
    out = np.empty_like(lam)
    gH = np.empty_like(H)
    return {
        "edge sum-product": lambda m: m.edge_bp(lam, g.row_ptr, g.edge_var, g.var_ptr, g.var_edge, T, False,
                                                EPS, np.inf, out, None),
        "edge min-sum": lambda m: m.edge_bp(lam, g.row_ptr, g.edge_var, g.var_ptr, g.var_edge, T, True,
                                            EPS, np.inf, out, None),
        "tensor forward": lambda m: m.tensor_bp(lam, H, T, EPS, np.inf, act, out, None),
        "tensor gradient": lambda m: m.tensor_bp_grad(lam, H, T, EPS, np.inf, act, False, gH),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--code", default="ldpc_32_16")
    ap.add_argument("--frames", type=int, default=2000)
    ap.add_argument("--iters", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    code = codes.load_code(args.code)
    print(f"code {args.code} (n={code.n}, m={code.H.shape[0]}), {args.frames} frames, T={args.iters}")
    print(f"{'kernel':<18} {'python [s]':>11} {'cython [s]':>11} {'speed-up':>9}")
    for name, run in cases(code, args.frames, args.iters).items():
        t_py = best_of(lambda: run(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:<18} {t_py:>11.4f} {'n/a':>11} {'n/a':>9}")
            continue
        t_cy = best_of(lambda: run(_kernels), args.repeat)
        print(f"{name:<18} {t_py:>11.4f} {t_cy:>11.4f} {t_py / t_cy:>8.1f}x")


if __name__ == "__main__":
    main()
