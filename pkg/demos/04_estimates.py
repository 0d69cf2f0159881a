"""
Checking the estimates numerically
==================================

Every checker returns a record with a margin (positive means the bound
holds with room to spare) and a status.  Checks whose curvature hypothesis
fails are reported as skipped, never as passed.  The Schwarz check uses
``kappa = -sup H`` unless told otherwise, which always meets its hypothesis.
"""
import numpy as np

from torus_ma import ProblemData, TorusGrid, solve_at_t
from torus_ma.estimates import (EstimateReport, synthetic_state, check_cheng_yau, check_max_u,
                                check_newton_maclaurin, check_schwarz, random_cheng_yau_pair)
from torus_ma.testbeds import CosineMode, CosinePotential

grid = TorusGrid(1, 32)
phi = CosinePotential([CosineMode(0.02, (1, 0), 0.0)], 1)
p = ProblemData.from_metric(grid, phi.grid_metric(grid))
s = solve_at_t(p, 0.5)

report = EstimateReport()
report.add(check_schwarz(s))
# asking for kappa = 1 on a metric with positive curvature somewhere is skipped
report.add(check_schwarz(s, kappa_const=1.0))
report.add(check_max_u(s))
report.add(check_newton_maclaurin(s))

# randomized (v, phi) pairs with Delta v >= -phi built in
for seed in range(5):
    v, f, g = random_cheng_yau_pair(grid, seed)
    report.add(check_cheng_yau(grid, v, f, g))

print(report.to_csv())
print(report.counts())

# a hand-made violation: shifting u past the bound C breaks the maximum principle check
good = check_max_u(s)
bad = check_max_u(synthetic_state(p, s.t, s.u + good.worst_margin + 0.5, s.omega_t))
print("shifted u:", bad.status, f"margin {bad.worst_margin:.3f}")
