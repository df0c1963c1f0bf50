#!/usr/bin/env python3
"""Benchmark the compiled epipolar kernels against the numpy fallback.

Times the two hot kernels on a realistic per-pair workload (4096
correspondences) and a full alignment run on a synthetic scene under each
implementation. Run from the repo root:

    python3 benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time

import numpy as np

from epialign import kernels


def time_fn(fn, repeats=200):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels():
    rng = np.random.default_rng(0)
    F = rng.normal(size=(3, 3))
    F /= np.linalg.norm(F)
    k = 4096
    xi = rng.uniform(0, 4000, size=(k, 2))
    xj = rng.uniform(0, 3000, size=(k, 2))
    w = rng.uniform(0.1, 2.0, size=k)

    impls = kernels.implementations()
    print(f"per-pair kernels, {k} correspondences, geometric mode")
    print(f"{'impl':<10} {'residuals':>12} {'accumulate':>12}")
    rows = {}
    for name, impl in impls.items():
        t_res = time_fn(lambda: impl.pair_residuals(F, xi, xj, kernels.MODE_GEOMETRIC))
        t_acc = time_fn(lambda: impl.pair_accumulate(F, xi, xj, w, kernels.MODE_GEOMETRIC))
        rows[name] = (t_res, t_acc)
        print(f"{name:<10} {t_res * 1e6:>10.1f}us {t_acc * 1e6:>10.1f}us")
    if "compiled" in rows and "numpy" in rows:
        print(f"{'speedup':<10} {rows['numpy'][0] / rows['compiled'][0]:>11.1f}x "
              f"{rows['numpy'][1] / rows['compiled'][1]:>11.1f}x")


def bench_align():
    script = (
        "import time, numpy as np\n"
        "from epialign import synth, aligner, kernels\n"
        "from epialign.pairing import select_pairs, MatchSet\n"
        "cfg = synth.SynthConfig(n_cameras=20, n_points=800, seed=3,\n"
        "                        rot_sigma_deg=0.8, trans_sigma_frac=0.002)\n"
        "scene = synth.generate(cfg)\n"
        "rig, matches, _ = synth.perturb(scene.rig, scene.matches, cfg)\n"
        "sel = select_pairs(rig, 60.0).as_set()\n"
        "kept = MatchSet(tuple(p for p in matches.pairs\n"
        "                      if (p.frame_i, p.frame_j) in sel))\n"
        "t0 = time.perf_counter()\n"
        "aligner.align(rig, kept)\n"
        "print(f'{kernels.active_impl}: {time.perf_counter() - t0:.2f} s')\n"
    )
    print("\nfull 300-iteration alignment, 20 cameras")
    for mode in ("auto", "pure"):
        env = dict(os.environ, EPIALIGN_KERNEL=mode)
        out = subprocess.run([sys.executable, "-c", script], env=env,
                             capture_output=True, text=True)
        sys.stdout.write(out.stdout or out.stderr)


if __name__ == "__main__":
    bench_kernels()
    bench_align()
