"""
The reconstruction stability constant
=====================================

Lambda_m measures how well the patch barycenters control polynomials on
the element. It depends on the patch threshold #S but should not grow
under refinement.
"""

from quadcurl.harness import lambda_csv, run_lambda_study

for m, sizes in ((2, (6, 9, 12, 16)), (3, (10, 15, 20, 30))):
    rows = run_lambda_study(2, m, (10, 20, 40), sizes)
    print(f"m = {m}")
    print(lambda_csv(rows))
