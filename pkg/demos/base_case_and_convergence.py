"""
The zero-frequency base case and second-order convergence
=========================================================

At omega = 0 with a = I the solutions for boundary data 1, x, y are the data
themselves, so the constraint field is identically one. Away from zero the
solver is checked against a closed form (1-D) and a manufactured solution (2-D).
"""

import math

import numpy as np

from freqcover.coeffexpr import CoeffSet, parse
from freqcover.grid import build_grid, build_inner_mask
from freqcover.search import FieldSource
from freqcover.solver import Reference, convergence_study

# %%
# Base case on a 64 x 64 grid
grid = build_grid(2, (0, 1), 64)
unit = CoeffSet.from_strings("1", dim=2)
source = FieldSource(grid, unit, ["1", "x", "y"], build_inner_mask(grid, 0.1))
theta, flagged = source.field(0.0)
print("max |theta - 1| at omega = 0:", np.max(np.abs(theta.values - 1)))

# %%
# 1-D closed form: u(x) = cos(wx) + (1 - cos w)/sin w * sin(wx) for u(0) = u(1) = 1
w = math.pi / 2
exact = lambda x: np.cos(w * x) + (1 - np.cos(w)) / np.sin(w) * np.sin(w * x)
for lv in convergence_study(CoeffSet.from_strings("1", dim=1), w, Reference(exact, bc="1"), [32, 64, 128]):
    print(f"1-D n={lv.n:4d}  error={lv.max_error:.3e}  order={lv.observed_order}")

# %%
# 2-D manufactured solution sin(pi x) sin(pi y) at omega = 1
ref = Reference(parse("sin(pi*x)*sin(pi*y)"), source=parse("(2*pi^2 - 1)*sin(pi*x)*sin(pi*y)"))
for lv in convergence_study(unit, 1.0, ref, [32, 64, 128]):
    print(f"2-D n={lv.n:4d}  error={lv.max_error:.3e}  order={lv.observed_order}")
