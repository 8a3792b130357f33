"""Time the python and compiled kernel backends on representative inputs.

Usage::

    python3 benchmarks/bench_kernels.py [--N 4096] [--repeat 7] [--json out.json]

Each kernel is also checked for agreement between backends before timing.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from krflab.cohomology import KahlerClass
from krflab.kernels import available_backends
from krflab.metric_space import OFFSETS, FiberLattice
from krflab.profile import init_profile


def _cases(N, n_sources):
    p = init_profile(KahlerClass(2, 3.0, 1.0), N=N)
    phi_old = np.ascontiguousarray(p.phi)
    # monotone perturbation that keeps both pinned ends
    phi = phi_old + 1e-3 * (phi_old - p.a) * (p.b - phi_old) / (p.b - p.a)
    args = (phi, phi_old, p.h, 1e-4, p.m)
    lat = FiberLattice(p)
    w, hopf = lat.weights, lat.hopf
    src = np.linspace(0, lat.n_rho * lat.n_theta - 1, n_sources).astype(np.int64)
    return {
        "be_residual": args,
        "be_newton_direction": args,
        "grid_dijkstra": (w, hopf, OFFSETS, lat.n_theta, src),
    }


def _agree(name, a, b):
    if name == "be_newton_direction":
        a, b = a[0], b[0]
    return bool(np.allclose(a, b, rtol=1e-10, atol=1e-12))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=4096)
    ap.add_argument("--sources", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; timing the python backend only", file=sys.stderr)
    cases = _cases(args.N, args.sources)
    rows = []
    for name, kargs in cases.items():
        ref = getattr(backends["python"], name)(*kargs)
        row = {"kernel": name}
        for bname, mod in backends.items():
            fn = getattr(mod, name)
            if bname != "python":
                row["agree"] = _agree(name, ref, fn(*kargs))
            timer = timeit.Timer(lambda: fn(*kargs))
            number, _ = timer.autorange()
            best = min(timer.repeat(repeat=args.repeat, number=number)) / number
            row[f"{bname}_us"] = best * 1e6
        if "compiled_us" in row:
            row["speedup"] = row["python_us"] / row["compiled_us"]
        rows.append(row)

    print(f"{'kernel':<22}{'python (us)':>14}{'compiled (us)':>16}{'speedup':>10}  agree")
    for r in rows:
        print(f"{r['kernel']:<22}{r['python_us']:>14.1f}{r.get('compiled_us', float('nan')):>16.1f}"
              f"{r.get('speedup', float('nan')):>10.2f}  {r.get('agree', '-')}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"N": args.N, "sources": args.sources, "results": rows}, fh, indent=2)
    return 0 if all(r.get("agree", True) for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
