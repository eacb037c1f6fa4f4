"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends run the same inputs; the script also checks that their
results agree before reporting speedups.
"""
import argparse
import math
import timeit

import numpy as np

from settrack import kernels
from settrack.bench import bench_scenario
from settrack.models import log_clutter, loglik_matrix


def _cases(rng):
    hung = [rng.random((n, n)) for n in (4, 8, 16) for _ in range(20)]
    murty = [rng.random((n, n)) for n in (5, 7) for _ in range(10)]
    sc = bench_scenario(0, n_frames=300)
    joint = []
    for f, O in zip(sc.frames, sc.detections):
        if min(len(f.states), len(O)) >= 2:
            joint.append((loglik_matrix(f.states, O, sc.params), log_clutter(O, sc.params), sc.params))
    return hung, murty, joint


def _run(impl, hung, murty, joint):
    a = [kernels.hungarian(c, impl=impl)[0] for c in hung]
    b = [len(kernels.murty(c, max_log_ratio=math.log(100.0), impl=impl)) for c in murty]
    c = [kernels.joint_loglik(L, lq, p.false_rate * p.dt, p.miss_rate * p.dt, p.assign_threshold,
                              p.fm_threshold, prio_shift=math.log(p.arena_area), impl=impl)[0]
         for L, lq, p in joint]
    return a, b, c


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    hung, murty, joint = _cases(np.random.default_rng(0))
    names = kernels.available_backends()
    results = {n: _run(kernels.get_backend(n), hung, murty, joint) for n in names}
    if len(names) == 2:
        assert results["python"] == results["cython"], "backends disagree"
    print(f"{'kernel':12s}" + "".join(f"{n:>12s}" for n in names) + ("    speedup" if len(names) == 2 else ""))
    groups = {
        "hungarian": lambda impl: [kernels.hungarian(c, impl=impl) for c in hung],
        "murty": lambda impl: [kernels.murty(c, max_log_ratio=math.log(100.0), impl=impl) for c in murty],
        "joint": lambda impl: _run(impl, [], [], joint),
    }
    for g, fn in groups.items():
        t = {n: min(timeit.repeat(lambda: fn(kernels.get_backend(n)), number=1, repeat=args.repeat))
             for n in names}
        line = f"{g:12s}" + "".join(f"{t[n] * 1e3:10.1f}ms" for n in names)
        if len(names) == 2:
            line += f"    {t['python'] / t['cython']:6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
