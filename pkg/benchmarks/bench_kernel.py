"""Compare the compiled kernel against the pure-Python engine.

Runs each scenario on every available backend, reports the best-of-N wall
time, the speed-up, and whether the two traces are bit-identical.

    python3 benchmarks/bench_kernel.py --repeat 5
"""
import argparse
import json
import time

import numpy as np

from neurospike import _backend, lif

SCENARIOS = {
    "fig3-nominal": lambda t_end: lif.fig3_nominal(t_end=t_end),
    "fig3-noisy-asym": lambda t_end: lif.fig3_noisy_asym(seed=1, t_end=t_end),
    "certified": lambda t_end: lif.certified_scenario(t_end=t_end),
}


def best_time(sc, backend, repeat):
    best, trace = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        trace = lif.simulate_scenario(sc, backend)
        best = min(best, time.perf_counter() - t0)
    return best, trace


def identical(a, b):
    return (np.array_equal(a.t, b.t) and np.array_equal(a.j, b.j) and np.array_equal(a.q, b.q)
            and a.jumps == b.jumps)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--t-end", type=float, default=15.0)
    p.add_argument("--json", action="store_true", help="print results as JSON")
    args = p.parse_args(argv)

    backends = _backend.available_backends()
    rows = []
    for name, make in SCENARIOS.items():
        sc = make(args.t_end)
        res = {b: best_time(sc, b, args.repeat) for b in backends}
        row = {"scenario": name, "samples": len(res[backends[0]][1]), "jumps": len(res[backends[0]][1].jumps)}
        row.update({f"{b}_s": res[b][0] for b in backends})
        if "compiled" in res:
            row["speedup"] = res["python"][0] / res["compiled"][0]
            row["bit_identical"] = identical(res["compiled"][1], res["python"][1])
        rows.append(row)

    if args.json:
        print(json.dumps(rows, indent=2))
        return
    if "compiled" not in backends:
        print("compiled kernel not built; timing the Python engine only")
    for r in rows:
        extra = (f"  compiled {r['compiled_s'] * 1e3:8.2f} ms  speed-up {r['speedup']:6.1f}x  "
                 f"identical={r['bit_identical']}") if "compiled_s" in r else ""
        print(f"{r['scenario']:16s} {r['samples']:6d} samples {r['jumps']:4d} jumps  "
              f"python {r['python_s'] * 1e3:8.2f} ms{extra}")


if __name__ == "__main__":
    main()
