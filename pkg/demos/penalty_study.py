"""
Sensitivity to the penalty parameter
====================================

The penalty must be large enough for coercivity, but a larger value also
stiffens the system. This script scans eta on one mesh, reports whether
the matrix is positive definite and how the errors respond.
"""

from quadcurl.analysis import error_L2, error_energy
from quadcurl.assembly import assemble_matrix, assemble_rhs, local_forms
from quadcurl.mesh import build_unit_square_mesh
from quadcurl.problems import Example1
from quadcurl.reconstruction import build_reconstruction
from quadcurl.solver import solve

m, n = 2, 16
exact = Example1()
op = build_reconstruction(build_unit_square_mesh(n), m)
forms = local_forms(op.mesh, m)  # shared by every eta

print(f"{'eta':>8} {'SPD':>5} {'L2':>11} {'energy':>11}")
for eta in (0.4, 4.0, 10.0, 40.0, 160.0, 640.0):
    system = assemble_matrix(op, eta, forms=forms)
    spd = system.check_spd()
    if not spd:
        print(f"{eta:8.1f} {'no':>5}")
        continue
    system = system.with_rhs(assemble_rhs(op, exact.f, exact.g1, exact.g2, eta))
    u_h = op.apply(solve(system).x)
    print(f"{eta:8.1f} {'yes':>5} {error_L2(u_h, exact):11.4e} {error_energy(u_h, exact):11.4e}")
