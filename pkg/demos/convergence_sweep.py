"""Convergence of both model problems as the lower-order coefficient shrinks.

With a dominant higher-order term the energy error decays like h; once that
term is tiny the discrete problem behaves like its reduced limit and the rate
climbs towards h^2. Pass --levels 4 for a longer sweep.
"""

import argparse

from ncfem import bench

parser = argparse.ArgumentParser()
parser.add_argument("--levels", type=int, default=3)
args = parser.parse_args()

for problem in ("quadcurl", "brinkman"):
    for weight in (1.0, 1e-2, 1e-6):
        records = bench.run(bench.RunConfig(problem, 2, args.levels, weight, 1.0))
        rates = bench.eoc([r.err_triple for r in records])
        shown = " ".join("-" if e is None else f"{e:.2f}" for e in rates)
        print(f"{problem:9s} weight={weight:<6g} energy errors "
              f"{' '.join(f'{r.err_triple:.2e}' for r in records)}  rates {shown}")
