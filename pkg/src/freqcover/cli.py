"""Command-line entry point.

Exit status: 0 on success, 2 when ``check`` or ``sweep`` finds no complete
tuple, 1 on any fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import export
from .coeffexpr import ExprError, parse, validate_coefficients
from .completeness import FrequencyBand, evaluate_tuple, near_zero_set
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .grid import GridError, build_grid, build_inner_mask
from .search import (FieldSource, SearchError, density_experiment, greedy_select,
                     optimality_experiment, precompute_fields, sweep)
from .solver import SolveError, assemble, estimate_dirichlet_eigenvalues, solve

log = logging.getLogger("freqcover")

VERBS = ("validate", "eigs", "solve", "field", "check", "sweep", "greedy", "density",
         "optimality", "report")
EXIT_OK, EXIT_FAULT, EXIT_INCOMPLETE = 0, 1, 2


class UsageError(ValueError):
    pass


class Context:
    """Lazily built grid, mask, coefficients, spectrum and field source for a config."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.grid = build_grid(cfg.dim, cfg.bounds, cfg.n)
        self.mask = build_inner_mask(self.grid, cfg.shrink)
        self.coeffs = cfg.coeffs()
        self.out = Path(cfg.output_dir)
        self._source = None
        self._band = None

    def require_valid(self):
        rep = validate_coefficients(self.coeffs, self.grid)
        if not rep.passed:
            raise UsageError(f"coefficient validation failed: {rep.violation}")

    @property
    def band(self) -> FrequencyBand:
        if self._band is None:
            spec = estimate_dirichlet_eigenvalues(self.grid, self.coeffs, self.cfg.eigen_count)
            self._band = FrequencyBand.from_spectrum(self.cfg.a_min, self.cfg.a_max, spec,
                                                     self.cfg.guard_radius)
        return self._band

    @property
    def source(self) -> FieldSource:
        if self._source is None:
            c = self.cfg
            self._source = FieldSource(self.grid, self.coeffs, c.bcs, self.mask, c.tol_rel,
                                       c.blowup, c.near_eig_rel)
        return self._source

    def candidates(self):
        return precompute_fields(self.band, self.source, self.cfg.M)


def _parse_tuple(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--tuple expects comma-separated numbers, got {text!r}") from None


def cmd_validate(ctx: Context, args) -> int:
    rep = validate_coefficients(ctx.coeffs, ctx.grid)
    export.write_json(ctx.out / "validate.json", rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_FAULT


def cmd_eigs(ctx: Context, args) -> int:
    spec = estimate_dirichlet_eigenvalues(ctx.grid, ctx.coeffs, ctx.cfg.eigen_count)
    export.write_json(ctx.out / "eigs.json", spec.to_dict())
    return EXIT_OK


def cmd_solve(ctx: Context, args) -> int:
    if args.omega is None:
        raise UsageError("solve requires --omega")
    ctx.require_valid()
    bc = args.bc if args.bc is not None else ctx.cfg.bcs[0]
    system = assemble(ctx.grid, ctx.coeffs, args.omega, parse(bc))
    f = solve(system, ctx.cfg.tol_rel, ctx.cfg.blowup, ctx.cfg.near_eig_rel)
    if f.flagged_near_eigenvalue:
        log.warning("omega=%g is flagged as near a Dirichlet eigenvalue", args.omega)
    export.write_atomic(ctx.out / (args.name or "solve.csv"), export.field_csv(f))
    return EXIT_OK


def cmd_field(ctx: Context, args) -> int:
    if args.omega is None:
        raise UsageError("field requires --omega")
    ctx.require_valid()
    theta, flagged = ctx.source.field(args.omega)
    stem = args.name or "field"
    export.write_atomic(ctx.out / f"{stem}.csv", export.constraint_csv(theta))
    export.write_atomic(ctx.out / f"{stem}.pgm", export.heatmap_pgm(theta))
    zset = near_zero_set(theta, ctx.cfg.delta)
    export.write_atomic(ctx.out / f"{stem}_nearzero.pgm", export.mask_pgm(zset, theta))
    if flagged:
        log.warning("omega=%g is flagged as near a Dirichlet eigenvalue", args.omega)
    return EXIT_OK


def cmd_check(ctx: Context, args) -> int:
    if args.tuple is None:
        raise UsageError("check requires --tuple")
    ctx.require_valid()
    omegas = _parse_tuple(args.tuple)
    if not omegas:
        raise UsageError("--tuple is empty")
    band = ctx.band
    for w in omegas:
        if not band.contains(w):
            raise UsageError(f"omega={w} lies outside the band or inside an eigen guard")
    fields = [ctx.source.field(w)[0] for w in omegas]
    rep = evaluate_tuple(fields, delta=ctx.cfg.delta)
    export.write_json(ctx.out / (args.name or "check.json"), rep.to_dict())
    return EXIT_OK if rep.complete else EXIT_INCOMPLETE


def cmd_sweep(ctx: Context, args) -> int:
    ctx.require_valid()
    k = args.k or ctx.cfg.k
    cands = ctx.candidates()
    res = sweep(cands, k, ctx.cfg.delta, ctx.cfg.budget)
    out = res.to_dict()
    out["dropped"] = [[w, why] for w, why in cands.dropped]
    export.write_json(ctx.out / "sweep.json", out)
    if args.csv:
        lines = ["tuple,normalized_margin,complete"]
        lines += [f"{' '.join(repr(w) for w in r.tuple)},{r.normalized_margin!r},{int(r.complete)}"
                  for r in res.rows]
        export.write_atomic(ctx.out / "sweep.csv", "\n".join(lines) + "\n")
    return EXIT_OK if out["complete_count"] else EXIT_INCOMPLETE


def cmd_greedy(ctx: Context, args) -> int:
    ctx.require_valid()
    trace = greedy_select(ctx.candidates(), ctx.cfg.delta, args.max_steps)
    export.write_json(ctx.out / "greedy.json", trace.to_dict())
    return EXIT_OK


def cmd_density(ctx: Context, args) -> int:
    ctx.require_valid()
    c = ctx.cfg
    rep = density_experiment(ctx.band, ctx.source, c.samples, c.delta, c.effective_perturb_radius, c.seed)
    export.write_json(ctx.out / "density.json", rep)
    return EXIT_OK


def cmd_optimality(ctx: Context, args) -> int:
    ctx.require_valid()
    d = ctx.cfg.dim
    ks = [int(k) for k in args.k_range.split(",")] if args.k_range else list(range(1, d + 3))
    rows = optimality_experiment(ctx.candidates(), ctx.cfg.delta, ks, ctx.cfg.budget)
    export.write_json(ctx.out / "optimality.json", {"delta": ctx.cfg.delta, "per_k": rows})
    return EXIT_OK


def cmd_report(ctx: Context, args) -> int:
    merged = {"config": ctx.cfg.to_dict()}
    for path in sorted(ctx.out.glob("*.json")):
        if path.name == "summary.json":
            continue
        merged[path.stem] = json.loads(path.read_text(encoding="utf-8"))
    export.write_json(ctx.out / "summary.json", merged)
    return EXIT_OK


COMMANDS = {name: globals()[f"cmd_{name}"] for name in VERBS}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freqcover", description=__doc__.splitlines()[0])
    p.add_argument("verb", choices=VERBS)
    p.add_argument("config", nargs="?", help="JSON config file (defaults to a 1-D run)")
    p.add_argument("--dim", type=int, help="use the default config for this dimension")
    p.add_argument("--omega", type=float)
    p.add_argument("--bc", help="boundary-condition expression for solve")
    p.add_argument("--tuple", help="comma-separated frequencies for check")
    p.add_argument("--k", type=int, help="tuple size for sweep")
    p.add_argument("--k-range", help="comma-separated tuple sizes for optimality")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--csv", action="store_true", help="also write sweep rows as CSV")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--name", help="output file name (solve/check) or stem (field)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config:
            cfg = load_config(args.config)
        else:
            cfg = config_from_dict({"dim": args.dim or 1})
        if args.out:
            cfg.output_dir = args.out
        ctx = Context(cfg)
        return COMMANDS[args.verb](ctx, args)
    except (ConfigError, UsageError, GridError, ExprError, SolveError, SearchError, ValueError,
            RuntimeError) as exc:
        print(f"freqcover {args.verb}: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
