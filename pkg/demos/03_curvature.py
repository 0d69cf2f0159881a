"""
Curvature of a perturbed metric
===============================

The holomorphic sectional curvature of a flat metric is zero; a potential
perturbation makes it change sign, so the sign-gated estimates are
skipped for such a metric.
"""
from torus_ma import ProblemData, TorusGrid
from torus_ma.testbeds import CosineMode, CosinePotential

for n in (1, 2):
    grid = TorusGrid(n, 16)
    freq = (1, 0) * n
    phi = CosinePotential([CosineMode(0.01, freq, 0.0)], n)
    ks = ProblemData.from_metric(grid, phi.grid_metric(grid)).kappa()
    print(f"n = {n}: sup H = {ks.sup_H:+.4f}, inf H = {ks.inf_H:+.4f}, "
          f"class = {ks.classification}, kappa = {ks.kappa_const:+.4f}")

flat = ProblemData.from_metric(TorusGrid(1, 8), TorusGrid(1, 8).identity()).kappa()
print("flat:", flat.classification, flat.sup_H)
