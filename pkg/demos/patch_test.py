"""
Polynomial patch test
=====================

Manufacture data from a random quadratic vector field, solve on a coarse
mesh and compare. The reconstructed space contains every global
polynomial of degree m, so the discrete solution should match the exact
field up to round-off.
"""

import numpy as np

from quadcurl.assembly import assemble
from quadcurl.analysis import error_L2, error_energy
from quadcurl.mesh import build_unit_square_mesh
from quadcurl.problems import PolynomialSolution
from quadcurl.reconstruction import build_reconstruction
from quadcurl.solver import solve

m = 2
exact = PolynomialSolution.random(2, m, rng=0)

# the mesh and the reconstruction: one unknown per element and component
mesh = build_unit_square_mesh(4)
op = build_reconstruction(mesh, m)
print(mesh.summary())

# assemble with the default penalty and solve
system = assemble(op, exact)
report = solve(system)
u_h = op.apply(report.x)

print("relative residual:", report.residual)
print("L2 error:         ", error_L2(u_h, exact))
print("energy error:     ", error_energy(u_h, exact))

# barycenter values are the unknowns, so they should be the exact values
print("max nodal error:  ", np.abs(report.x - exact(mesh.element_barycenters).ravel()).max())
