"""Trials per second of the sampling kernels, compiled vs plain Python.

Each backend runs in its own interpreter because the switch is read at
import time. Both must produce the same log weights for the same trials.

    python benchmarks/bench_kernels.py [--quick]
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from sistables import backend
from sistables.margins import make_regular, make_two_heavy
from sistables.sampler import SamplerConfig, trial_log_weights

cases = json.loads(sys.argv[1])
out = []
for name, kind, args, trials in cases:
    M = make_regular(*args) if kind == "regular" else make_two_heavy(*args)
    cfg = SamplerConfig(seed=7, ordering="descending_sum")
    trial_log_weights(M, cfg, 0, 2)  # compile / warm up
    t = time.perf_counter()
    logw, _ = trial_log_weights(M, cfg, 0, trials)
    dt = time.perf_counter() - t
    out.append({"name": name, "trials": trials, "seconds": dt, "logw": logw[:50].tolist()})
print(json.dumps({"backend": backend(), "results": out}))
"""

CASES = [
    ("regular(10,3)", "regular", [10, 3]),
    ("regular(20,4)", "regular", [20, 4]),
    ("two-heavy(40,24,32)", "two-heavy", [40, 24, 32]),
    ("two-heavy(80,48,64)", "two-heavy", [80, 48, 64]),
]


def run(disable: bool, trials: int) -> dict:
    env = dict(os.environ, SISTABLES_DISABLE_NUMBA="1" if disable else "0")
    cases = [(n, k, a, trials) for n, k, a in CASES]
    proc = subprocess.run([sys.executable, "-c", WORKER, json.dumps(cases)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="fewer trials")
    ap.add_argument("--trials", type=int, default=None)
    args = ap.parse_args()
    n_py = args.trials or (20 if args.quick else 200)
    n_jit = max(n_py, 2000 if args.quick else 20000)

    t = time.perf_counter()
    jit = run(False, n_jit)
    py = run(True, n_py)
    print(f"backends: {jit['backend']} vs {py['backend']}  (total {time.perf_counter() - t:.1f}s)")
    print(f"{'instance':<22}{'numba trials/s':>16}{'python trials/s':>17}{'speedup':>10}  same")
    ok = True
    for a, b in zip(jit["results"], py["results"]):
        ra = a["trials"] / a["seconds"]
        rb = b["trials"] / b["seconds"]
        k = min(len(a["logw"]), len(b["logw"]))
        same = all(abs(x - y) <= 1e-9 * max(1.0, abs(x)) for x, y in zip(a["logw"][:k],
                                                                          b["logw"][:k]))
        ok &= same
        print(f"{a['name']:<22}{ra:>16.0f}{rb:>17.1f}{ra / rb:>10.0f}  {same}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
