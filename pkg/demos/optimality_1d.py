"""
One frequency is never enough in 1-D, two almost always are
============================================================

In one dimension theta = u1 * W where W is a nonzero Wronskian, so the zeros of
theta are exactly those of u1. Every u1 on [5, 20] vanishes somewhere in
[0.1, 0.9]; a second frequency moves the zeros and covers them.
"""

from freqcover.completeness import FrequencyBand
from freqcover.config import config_from_dict
from freqcover.grid import build_grid, build_inner_mask
from freqcover.search import FieldSource, optimality_experiment, precompute_fields
from freqcover.solver import estimate_dirichlet_eigenvalues

cfg = config_from_dict({"dim": 1})
grid = build_grid(1, cfg.bounds, cfg.n)
coeffs = cfg.coeffs()

# %%
# Guard the Dirichlet spectrum (k pi) and solve each candidate once
spec = estimate_dirichlet_eigenvalues(grid, coeffs, cfg.eigen_count)
band = FrequencyBand.from_spectrum(cfg.a_min, cfg.a_max, spec, cfg.guard_radius)
source = FieldSource(grid, coeffs, cfg.bcs, build_inner_mask(grid, cfg.shrink))
cands = precompute_fields(band, source, cfg.M)
print("eigen-frequencies:", [round(w, 4) for w in spec.omegas])
print("dropped:", [(round(w, 3), why) for w, why in cands.dropped])

# %%
# Best margin and complete fraction per tuple size
for row in optimality_experiment(cands, cfg.delta, [1, 2, 3]):
    print(f"k={row['k']}  tuples={row['tuples']:5d}  complete={row['fraction_complete']:.3f}  "
          f"best margin={row['best_normalized_margin']:.3f} at {row['best_tuple']}")
