"""Compare the compiled kernels with the pure-numpy fallback.

Each configuration runs in a fresh interpreter so that ``EGAI_DISABLE_NUMBA``
takes effect at import time. Usage::

    python3 benchmarks/bench_kernels.py [--T 500] [--repeat 50]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from egai import _accel
from egai.procedures import run_batch
from egai.simharness import GaussianConfig, replication_rng, simulate_stream

T, repeat = int(sys.argv[1]), int(sys.argv[2])
_, _, e, p = simulate_stream(GaussianConfig(T=T, pi1=0.2), replication_rng(0, 0))
res = {"numba": _accel.NUMBA_ENABLED}
for name in ["e-lord", "e-saffron", "mem-e-lord", "ps-rai", "e-lond", "lord++", "saffron"]:
    v = p if name in ("ps-rai", "lord++", "saffron") else e
    t0 = time.perf_counter()
    run_batch(name, None, v)
    first = time.perf_counter() - t0
    t0 = time.perf_counter()
    for _ in range(repeat):
        run_batch(name, None, v)
    res[name] = {"first_s": first, "per_run_s": (time.perf_counter() - t0) / repeat}
t0 = time.perf_counter()
for r in range(repeat):
    simulate_stream(GaussianConfig(T=T, pi1=0.2), replication_rng(1, r))
res["gaussian stream"] = {"first_s": float("nan"), "per_run_s": (time.perf_counter() - t0) / repeat}
json.dump(res, sys.stdout)
"""


def measure(disable, T, repeat):
    env = {**os.environ, "EGAI_DISABLE_NUMBA": "1" if disable else "0"}
    out = subprocess.run([sys.executable, "-c", WORKER, str(T), str(repeat)],
                         capture_output=True, text=True, env=env, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args(argv)
    fast = measure(False, args.T, args.repeat)
    slow = measure(True, args.T, args.repeat)
    if not fast.pop("numba"):
        print("numba is not importable; both columns use the fallback")
    slow.pop("numba")
    print(f"T={args.T}, {args.repeat} repeats; times per run in milliseconds")
    print(f"{'kernel':<18}{'numba':>10}{'numpy':>10}{'speedup':>10}{'1st call':>10}")
    for name in fast:
        a, b = fast[name]["per_run_s"] * 1e3, slow[name]["per_run_s"] * 1e3
        print(f"{name:<18}{a:>10.4f}{b:>10.3f}{b / a:>10.1f}{fast[name]['first_s'] * 1e3:>10.1f}")


if __name__ == "__main__":
    main()
