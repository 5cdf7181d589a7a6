"""Micro-benchmark of the compiled kernels against the pure NumPy twins.

Times the three hot paths (fused RLS update, Sherman-Morrison update, and the
rejection scan) plus a full PEPS trajectory on each available backend, and
checks on the way that both backends walk the random stream identically.

Usage:
    python benchmarks/bench_backends.py
    python benchmarks/bench_backends.py --d 12 --steps 3000 --json out.json
"""
import argparse
import json
import sys
import time

import numpy as np

from linbai import kernels
from linbai.instances import make_soare
from linbai.rng import strategy_stream
from linbai.strategies import make_strategy


def _time_loop(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        n = fn()
        best = min(best, (time.perf_counter() - t0) / n)
    return best


def bench_rls(backend, d, steps, repeats):
    rng = np.random.default_rng(1)
    xs = rng.standard_normal((steps, d))
    ys = rng.standard_normal(steps)

    def run():
        v = np.eye(d)
        vinv = np.eye(d)
        s = np.zeros(d)
        theta = np.zeros(d)
        for x, y in zip(xs, ys):
            backend.rls_update(v, vinv, s, theta, x, float(y))
        return steps

    return _time_loop(run, repeats)


def bench_sm(backend, d, steps, repeats):
    rng = np.random.default_rng(2)
    xs = rng.standard_normal((steps, d))

    def run():
        v = np.eye(d)
        vinv = np.eye(d)
        for x in xs:
            backend.sm_update(v, vinv, x)
        return steps

    return _time_loop(run, repeats)


def bench_scan(backend, d, steps, repeats):
    targets = np.eye(d)
    mean = np.full(d, 0.1)
    mean[0] = 0.4
    chol = 0.5 * np.eye(d)

    def run():
        rng = np.random.default_rng(3)
        for _ in range(steps):
            backend.scan_explicit(rng, mean, chol, targets, 0, 64, kernels.DEFAULT_BATCH)
        return steps

    return _time_loop(run, repeats)


def bench_peps(backend_name, steps, repeats):
    inst = make_soare(0.3)
    kernels.use_backend(backend_name)
    best = np.inf
    for _ in range(repeats):
        strat = make_strategy(inst, {"strategy": "peps"}, steps)
        rng = strategy_stream(7, "bench", 0)
        t0 = time.perf_counter()
        for _ in range(steps):
            strat.step(rng)
        best = min(best, (time.perf_counter() - t0) / steps)
    return best


def check_parity(d, steps):
    """Both backends must make identical decisions from identical streams."""
    names = kernels.available_backends()
    if len(names) < 2:
        return "single backend; skipped"
    draws = {}
    for name in names:
        backend = kernels._BACKENDS[name]
        rng = np.random.default_rng(11)
        targets = np.eye(d)
        mean = np.zeros(d)
        chol = np.eye(d)
        used = [backend.scan_explicit(rng, mean, chol, targets, 0, 32,
                                      kernels.DEFAULT_BATCH)[1]
                for _ in range(steps)]
        draws[name] = used
    vals = list(draws.values())
    if any(v != vals[0] for v in vals[1:]):
        raise AssertionError("backends disagree on rejection-draw counts")
    return f"{steps} scans, draw counts identical"


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--d", type=int, default=8, help="dimension (default 8)")
    parser.add_argument("--steps", type=int, default=2000, help="inner loop length")
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats, best-of")
    parser.add_argument("--json", help="also dump the table to this JSON file")
    args = parser.parse_args(argv)

    names = kernels.available_backends()
    print(f"backends: {', '.join(names)}   d={args.d} steps={args.steps} "
          f"best-of-{args.repeats}")
    print(f"parity:   {check_parity(args.d, 200)}")

    table = {}
    rows = [
        ("rls_update", lambda b: bench_rls(b, args.d, args.steps, args.repeats)),
        ("sm_update", lambda b: bench_sm(b, args.d, args.steps, args.repeats)),
        ("scan_explicit", lambda b: bench_scan(b, args.d, args.steps, args.repeats)),
    ]
    header = f"{'kernel':<16}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, fn in rows:
        per = {n: fn(kernels._BACKENDS[n]) for n in names}
        table[label] = {n: per[n] * 1e6 for n in names}
        line = f"{label:<16}" + "".join(f"{per[n] * 1e6:>10.2f}us" for n in names)
        if len(names) == 2:
            line += f"{per['python'] / per['cython']:>9.1f}x"
        print(line)

    per = {n: bench_peps(n, args.steps, max(2, args.repeats // 2)) for n in names}
    kernels.use_backend("cython" if "cython" in names else "python")
    table["peps_step"] = {n: per[n] * 1e6 for n in names}
    line = f"{'peps_step':<16}" + "".join(f"{per[n] * 1e6:>10.2f}us" for n in names)
    if len(names) == 2:
        line += f"{per['python'] / per['cython']:>9.1f}x"
    print(line)

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"d": args.d, "steps": args.steps, "us_per_op": table}, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.json}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
