"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from measure_forge import kernels
from measure_forge.dictionaries import FourierDictionary


def cases(rng):
    d = FourierDictionary(33)
    atoms = d.atom_matrix(d.make_grid(10_000))
    g = np.ascontiguousarray(rng.normal(size=66))
    proj = rng.normal(size=200)
    sub_atoms = np.ascontiguousarray(atoms[rng.choice(10_000, 30, replace=False)])
    y = rng.normal(size=66)
    return {
        "lmo_scan n=1e4 m=33": lambda k: k.lmo_scan(atoms, g, 1e-12),
        "project_capped_simplex n=200": lambda k: k.project_capped_simplex(proj, 1.0),
        "dual_subgradient |T|=30 it=2e4": lambda k: k.dual_subgradient(sub_atoms, y, 1.0, 1.0,
                                                                       20_000),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = kernels.available()
    table = cases(np.random.default_rng(0))
    print(f"{'kernel':<34}" + "".join(f"{b:>14}" for b in backends) + "   speedup")
    for name, fn in table.items():
        times = []
        for b in backends:
            k = kernels.get(b)
            number = 1 if "subgradient" in name else 50
            best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
            times.append(best)
        speedup = f"{times[-1] / times[0]:8.1f}x" if len(times) > 1 else "       -"
        print(f"{name:<34}" + "".join(f"{t * 1e3:12.3f}ms" for t in times) + "  " + speedup)


if __name__ == "__main__":
    main()
