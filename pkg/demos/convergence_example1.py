"""
Convergence on the smooth 2D example
====================================

u = curl(sin^3(pi x) sin^3(pi y)) on the unit square. The script refines
a structured mesh, prints the error table and writes a CSV next to it.
Pass the order as the first argument (default 2).
"""

import sys

from quadcurl.harness import RunConfig, rate_table, run_example, run_interpolation

m = int(sys.argv[1]) if len(sys.argv) > 1 else 2
levels = (8, 16, 32) if m < 4 else (8, 16)

config = RunConfig("ex1", m, levels)
result = run_example(config, out=f"example1_m{m}.csv")
print(rate_table(result.records))

# the same study for the interpolant alone, without the solver
print("\ninterpolant energy errors")
for h, err in run_interpolation(config):
    print(f"  h={h:.4f}  {err:.4e}")
