"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--json PATH]

Also times one full LABOR-* layer on a power-law graph under each backend
by rerunning this script in a child process with LABOR_PURE_PYTHON set.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from labor._kernels import backends


def kernel_cases(rng):
    nseg, maxdeg = 2000, 60
    deg = rng.integers(1, maxdeg, nseg)
    seg_ptr = np.r_[0, np.cumsum(deg)].astype(np.int64)
    m = int(seg_ptr[-1])
    pi = rng.uniform(0.01, 1.0, m)
    k = rng.integers(1, 20, nseg)
    target = (deg**2 / k).astype(float)
    sat = deg <= k
    keys = rng.random(m)
    ids = rng.integers(0, 10**6, m)
    idx = rng.integers(0, m // 4, m)
    a = np.arange(1_000_000)
    return {
        "hash_uniform (1e6)": lambda mod: mod.hash_uniform(7, 1, 99, a, 0),
        "solve_scale_segments": lambda mod: mod.solve_scale_segments(seg_ptr, pi, None, target, sat),
        "solve_scale_segments weighted": lambda mod: mod.solve_scale_segments(seg_ptr, pi, pi * 2, target * 2, sat),
        "scatter_max": lambda mod: mod.scatter_max(idx, keys, m // 4),
        "bottom_k_segments": lambda mod: mod.bottom_k_segments(seg_ptr, keys, ids, k),
    }


LAYER_SNIPPET = """
import timeit, numpy as np, labor
g = labor.power_law(20000, 2.1, 15, seed=1)
seeds = np.random.default_rng(0).choice(g.num_vertices, 1000, replace=False)
cfg = labor.config_from_string('LABOR-*:10')
fn = lambda: labor.sample_multilayer(g, seeds, [10, 10, 10], cfg, labor.VariateKey(1))
fn()
print(min(timeit.repeat(fn, number=1, repeat={repeat})))
"""


def time_layer(pure: bool, repeat: int) -> float:
    env = dict(os.environ, LABOR_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run(
        [sys.executable, "-c", LAYER_SNIPPET.format(repeat=repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    mods = backends()
    if "cython" not in mods:
        print("compiled extension not built; only the fallback is available", file=sys.stderr)
    cases = kernel_cases(np.random.default_rng(0))
    results = {}
    print(f"{'kernel':32s}" + "".join(f"{name:>12s}" for name in mods) + "     speedup")
    for label, fn in cases.items():
        row = {}
        for name, mod in mods.items():
            fn(mod)
            row[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        results[label] = row
        speed = row["pure"] / row["cython"] if "cython" in row else float("nan")
        print(f"{label:32s}" + "".join(f"{row[n] * 1e3:10.2f}ms" for n in mods) + f"  {speed:9.1f}x")

    row = {"pure": time_layer(True, args.repeat)}
    if "cython" in mods:
        row["cython"] = time_layer(False, args.repeat)
    results["3-layer LABOR-* batch (20k-vertex power law)"] = row
    speed = row["pure"] / row["cython"] if "cython" in row else float("nan")
    print(f"{'3-layer LABOR-* batch':32s}" + "".join(f"{row[n] * 1e3:10.2f}ms" for n in mods) + f"  {speed:9.1f}x")

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
