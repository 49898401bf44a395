"""Exploring frequency tuples: sweeps, greedy selection, density and optimality probes."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coeffexpr import CoeffSet, as_expr
from .completeness import (DEFAULT_DELTA, CompletenessReport, FrequencyBand, evaluate_tuple,
                           near_zero_set, tuple_stats)
from .functional import ConstraintField, constraint_F, make_bundle
from .grid import Grid, InnerMask
from .solver import (DEFAULT_BLOWUP, DEFAULT_NEAR_EIG_REL, DEFAULT_TOL_REL, Discretization,
                     SolveError, solve)

DEFAULT_BUDGET = 200_000
PERTURB_TRIES = 32


class SearchError(ValueError):
    pass


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("FREQCOVER_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class Counters:
    solves: int = 0
    pointwise: int = 0

    def to_dict(self) -> dict:
        return {"solves": self.solves, "pointwise": self.pointwise}


class FieldSource:
    """Solves the d+1 boundary-value problems for a frequency and builds theta.

    Results are cached by frequency. ``counters.solves`` counts individual
    (omega, f) solves.
    """

    def __init__(self, grid: Grid, coeffs: CoeffSet, bcs: Sequence, mask: InnerMask,
                 tol_rel: float = DEFAULT_TOL_REL, blowup: float = DEFAULT_BLOWUP,
                 near_eig_rel: Optional[float] = DEFAULT_NEAR_EIG_REL):
        if len(bcs) != grid.dim + 1:
            raise SearchError(f"need {grid.dim + 1} boundary conditions, got {len(bcs)}")
        self.disc = Discretization(grid, coeffs)
        self.grid = grid
        self.bcs = [as_expr(b) for b in bcs]
        self.mask = mask
        self.tol_rel = tol_rel
        self.blowup = blowup
        self.near_eig_rel = near_eig_rel
        self.counters = Counters()
        self._cache: dict = {}

    def field(self, omega: float):
        """Return ``(ConstraintField, flagged)``; raises SolveError on failure."""
        key = float(omega)
        if key in self._cache:
            return self._cache[key]
        sols = []
        flagged = False
        for i, bc in enumerate(self.bcs):
            system = self.disc.system(key, bc, bc_id=i)
            # the eigen-proximity probe depends only on omega; run it once
            f = solve(system, self.tol_rel, self.blowup, self.near_eig_rel if i == 0 else None)
            self.counters.solves += 1
            flagged |= f.flagged_near_eigenvalue
            sols.append(f)
        theta = constraint_F(make_bundle(sols), self.mask)
        self.disc.clear_cache()
        self._cache[key] = (theta, flagged)
        return theta, flagged


@dataclass(eq=False)
class CandidateSet:
    omegas: list
    fields: list
    band: FrequencyBand
    dropped: list = field(default_factory=list)  # (omega, reason)
    counters: Counters = field(default_factory=Counters)

    def __post_init__(self):
        self._abs = np.stack([f.abs for f in self.fields]) if self.fields else None
        self._scales = np.array([f.scale for f in self.fields])

    @property
    def size(self) -> int:
        return len(self.omegas)

    @property
    def dim(self) -> int:
        return self.fields[0].grid.dim


def precompute_fields(band: FrequencyBand, source: FieldSource, M: int) -> CandidateSet:
    """Solve every equispaced candidate frequency once; drop guarded or flagged ones."""
    d = source.grid.dim
    if M < d + 2:
        raise SearchError(f"need M >= d+2 = {d + 2} candidates, got {M}")
    dropped = []
    todo = []
    for w in band.equispaced(M):
        w = float(w)
        if band.excluded_at(w):
            dropped.append((w, "eigen guard"))
        else:
            todo.append(w)

    def run(w):
        try:
            return source.field(w)
        except SolveError as exc:
            return exc

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, todo))
    else:
        results = [run(w) for w in todo]
    omegas, fields = [], []
    for w, res in zip(todo, results):
        if isinstance(res, Exception):
            dropped.append((w, f"solve failed: {res}"))
        elif res[1]:
            dropped.append((w, "flagged near eigenvalue"))
        else:
            omegas.append(w)
            fields.append(res[0])
    if len(omegas) < d + 2:
        raise SearchError(f"only {len(omegas)} candidates survived; need {d + 2}")
    dropped.sort()
    return CandidateSet(omegas, fields, band, dropped, Counters(source.counters.solves, 0))


@dataclass
class SweepRow:
    tuple: tuple
    normalized_margin: float
    complete: bool


@dataclass
class SweepResult:
    k: int
    delta: float
    rows: list
    best: Optional[SweepRow]
    fraction_complete: float
    counters: Counters

    def to_dict(self, include_rows: bool = False) -> dict:
        out = {
            "k": self.k,
            "delta": self.delta,
            "tuples": len(self.rows),
            "complete_count": sum(r.complete for r in self.rows),
            "fraction_complete": self.fraction_complete,
            "best": None if self.best is None else {
                "tuple": list(self.best.tuple), "normalized_margin": self.best.normalized_margin,
                "complete": self.best.complete},
            "counters": self.counters.to_dict(),
        }
        if include_rows:
            out["rows"] = [[list(r.tuple), r.normalized_margin, r.complete] for r in self.rows]
        return out


def sweep(candidates: CandidateSet, k: int, delta: float = DEFAULT_DELTA,
          budget: int = DEFAULT_BUDGET) -> SweepResult:
    """Evaluate every nondecreasing k-tuple of candidates, in lexicographic order."""
    if k < 1:
        raise SearchError("k must be >= 1")
    M = candidates.size
    total = math.comb(M + k - 1, k)
    if total > budget:
        raise SearchError(f"{total} tuples exceed the budget of {budget}")
    A = candidates._abs
    scales = candidates._scales
    P = A.shape[1]
    rows = []
    best = None
    for combo in itertools.combinations_with_replacement(range(M), k):
        idx = list(combo)
        _, _, norm, complete = tuple_stats(A[idx], scales[idx], delta)
        row = SweepRow(tuple(candidates.omegas[i] for i in combo), norm, complete)
        rows.append(row)
        if best is None or norm > best.normalized_margin:
            best = row
    n_complete = sum(r.complete for r in rows)
    counters = Counters(candidates.counters.solves, total * k * P)
    return SweepResult(k, float(delta), rows, best, n_complete / total if total else 0.0, counters)


@dataclass
class GreedyTrace:
    steps: list  # (omega, bad before, bad after)
    final: CompletenessReport
    status: str

    def to_dict(self) -> dict:
        return {
            "steps": [{"omega": w, "bad_before": b, "bad_after": a} for w, b, a in self.steps],
            "status": self.status,
            "final": self.final.to_dict(),
            "final_bad_fraction": self.final.bad_fraction,
        }


def greedy_select(candidates: CandidateSet, delta: float = DEFAULT_DELTA,
                  max_steps: Optional[int] = None) -> GreedyTrace:
    """Pick frequencies one at a time, each shrinking the common near-zero set the most.

    Stops when the set is empty, when no candidate strictly shrinks it, or
    after ``max_steps`` (default d+1) accepted steps.
    """
    if candidates.size == 0:
        raise SearchError("no candidates")
    if max_steps is None:
        max_steps = candidates.dim + 1
    zsets = [near_zero_set(f, delta).nodes for f in candidates.fields]
    bad = candidates.fields[0].mask.flat_indices
    chosen: list[int] = []
    steps = []
    status = "max_steps"
    while len(chosen) < max_steps:
        sizes = [np.intersect1d(bad, z, assume_unique=True).size for z in zsets]
        j = int(np.argmin(sizes))  # candidates ascend, so ties go to the smallest omega
        if sizes[j] >= bad.size:
            status = "no strict decrease"
            break
        before = int(bad.size)
        bad = np.intersect1d(bad, zsets[j], assume_unique=True)
        chosen.append(j)
        steps.append((candidates.omegas[j], before, int(bad.size)))
        if bad.size == 0:
            status = "complete"
            break
    if not chosen:
        chosen = [int(np.argmin([z.size for z in zsets]))]
    final = evaluate_tuple([candidates.fields[j] for j in chosen], delta=delta)
    return GreedyTrace(steps, final, status)


def _tuple_ok(band: FrequencyBand, t) -> bool:
    return all(band.contains(w) for w in t)


def density_experiment(band: FrequencyBand, source: FieldSource, samples: int,
                       delta: float = DEFAULT_DELTA, perturb_radius: Optional[float] = None,
                       seed: int = 0, max_draws: int = 1_000_000) -> dict:
    """Random (d+1)-tuples from the band: completeness fraction plus density/openness probes.

    All random numbers are drawn from the seeded stream before any solve.
    Failing tuples get up to 32 uniform perturbations within ``perturb_radius``
    (max-norm) in search of a complete neighbour; complete tuples are
    re-evaluated at +-perturb_radius/10 per coordinate.
    """
    k = source.grid.dim + 1
    if perturb_radius is None:
        perturb_radius = 0.01 * band.width
    rng = np.random.default_rng(seed)
    tuples = []
    draws = 0
    while len(tuples) < samples:
        t = tuple(float(w) for w in rng.uniform(band.a_min, band.a_max, size=k))
        draws += 1
        if _tuple_ok(band, t):
            tuples.append(t)
        elif draws >= max_draws:
            raise SearchError("rejection sampling exhausted; band is mostly guarded")
    perturbs = rng.uniform(-perturb_radius, perturb_radius, size=(samples, PERTURB_TRIES, k))

    def report(t):
        return evaluate_tuple([source.field(w)[0] for w in t], delta=delta)

    rows, failing, openness = [], [], []
    P = source.mask.count
    pointwise = 0
    for i, t in enumerate(tuples):
        rep = report(t)
        pointwise += k * P
        rows.append({"tuple": list(t), "normalized_margin": rep.normalized_margin, "complete": rep.complete})
        if not rep.complete:
            hit = None
            for p in perturbs[i]:
                q = tuple(float(w) for w in np.asarray(t) + p)
                if not _tuple_ok(band, q):
                    continue
                pointwise += k * P
                if report(q).complete:
                    hit = {"tuple": list(q), "distance": float(np.max(np.abs(p)))}
                    break
            failing.append({"tuple": list(t), "neighbour": hit})
        else:
            m = rep.normalized_margin
            ratios = []
            for j in range(k):
                for s in (-1.0, 1.0):
                    q = list(t)
                    q[j] += s * perturb_radius / 10
                    if not _tuple_ok(band, q):
                        continue
                    pointwise += k * P
                    ratios.append(report(q).normalized_margin / m)
            openness.append({"tuple": list(t), "margin": m,
                             "ratio_min": min(ratios) if ratios else None,
                             "ratio_max": max(ratios) if ratios else None})
    n_complete = sum(r["complete"] for r in rows)
    all_ratios = [r for o in openness for r in (o["ratio_min"], o["ratio_max"]) if r is not None]
    return {
        "seed": seed,
        "samples": samples,
        "draws": draws,
        "delta": delta,
        "perturb_radius": perturb_radius,
        "band": band.to_dict(),
        "fraction_complete": n_complete / samples if samples else 0.0,
        "failing": failing,
        "failing_with_complete_neighbour": sum(f["neighbour"] is not None for f in failing),
        "openness": openness,
        "openness_ratio_min": min(all_ratios) if all_ratios else None,
        "openness_ratio_max": max(all_ratios) if all_ratios else None,
        "rows": rows,
        "counters": {"solves": source.counters.solves, "pointwise": pointwise},
    }


def optimality_experiment(candidates: CandidateSet, delta: float = DEFAULT_DELTA,
                          k_range: Sequence[int] = (1, 2, 3), budget: int = DEFAULT_BUDGET) -> list:
    """Best normalised margin and complete fraction for each tuple size k."""
    d = candidates.dim
    out = []
    for k in k_range:
        if not 1 <= k <= d + 2:
            raise SearchError(f"k={k} outside [1, d+2]")
        res = sweep(candidates, k, delta, budget)
        out.append({"k": k, "best_normalized_margin": res.best.normalized_margin,
                    "best_tuple": list(res.best.tuple), "fraction_complete": res.fraction_complete,
                    "tuples": len(res.rows)})
    return out
