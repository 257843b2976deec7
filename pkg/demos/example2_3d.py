"""
The 3D sine example
===================

u = (sin(pi y) sin(pi z), sin(pi z) sin(pi x), sin(pi x) sin(pi y)) on
the unit cube, Kuhn-split into tetrahedra. The finest level takes a
couple of minutes on one core.
"""

from quadcurl.harness import RunConfig, rate_table, run_example

result = run_example(RunConfig("ex2", 2, (2, 4, 8)), out="example2_m2.csv")
print(rate_table(result.records))
