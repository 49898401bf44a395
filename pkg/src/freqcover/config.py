"""Run configuration: strict JSON schema with documented defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .coeffexpr import CoeffSet, ExprError, parse

# per-dimension defaults; the boundary conditions are {1, x_1, ..., x_d}
DIM_DEFAULTS = {
    1: {"bounds": [[0.0, 1.0]], "n": [16384], "a_min": 5.0, "a_max": 20.0, "M": 40, "k": 2,
        "bcs": ["1", "x"]},
    2: {"bounds": [[0.0, 1.0], [0.0, 1.0]], "n": [96, 96], "a_min": 5.0, "a_max": 10.0, "M": 50,
        "k": 3, "bcs": ["1", "x", "y"]},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dim: int = 1
    bounds: list = field(default_factory=list)
    n: list = field(default_factory=list)
    shrink: float = 0.1
    a: list = field(default_factory=list)
    eps: str = "1"
    sigma: str = "0"
    # JSON key "lambda"
    lam: float = 2.0
    bcs: list = field(default_factory=list)
    a_min: float = 0.0
    a_max: float = 0.0
    guard_radius: float = 0.05
    eigen_count: int = 8
    tol_rel: float = 1e-10
    delta: float = 1e-3
    blowup: float = 1e6
    near_eig_rel: Optional[float] = 0.01
    M: int = 0
    k: int = 0
    samples: int = 100
    seed: int = 0
    perturb_radius: Optional[float] = None
    budget: int = 200_000
    output_dir: str = "out"

    def coeffs(self) -> CoeffSet:
        return CoeffSet.from_strings(self.a, self.eps, self.sigma, self.lam, dim=self.dim)

    @property
    def effective_perturb_radius(self) -> float:
        if self.perturb_radius is not None:
            return self.perturb_radius
        return 0.01 * (self.a_max - self.a_min)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


_KEYS = {f.name: f for f in fields(RunConfig)}
_JSON_KEYS = {("lambda" if k == "lam" else k): k for k in _KEYS}


def _err(source: str, key: str, msg: str) -> ConfigError:
    return ConfigError(f"{source}: key {key!r}: {msg}")


def config_from_dict(raw: dict, source: str = "<config>") -> RunConfig:
    """Fill defaults and validate; unknown keys are rejected."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    for key in raw:
        if key not in _JSON_KEYS:
            raise _err(source, key, "unknown key")
    dim = raw.get("dim", 1)
    if isinstance(dim, bool) or dim not in (1, 2):
        raise _err(source, "dim", f"must be 1 or 2, got {dim!r}")
    values = dict(DIM_DEFAULTS[dim])
    values["a"] = ["1"] * dim
    values.update({_JSON_KEYS[k]: v for k, v in raw.items()})
    values["dim"] = dim
    cfg = RunConfig(**values)
    _validate(cfg, source)
    return cfg


def _number(cfg, source, key, positive=False, integer=False, allow_none=False):
    attr = "lam" if key == "lambda" else key
    v = getattr(cfg, attr)
    if v is None and allow_none:
        return
    ok_types = (int,) if integer else (int, float)
    if isinstance(v, bool) or not isinstance(v, ok_types):
        raise _err(source, key, f"expected {'an integer' if integer else 'a number'}, got {v!r}")
    if positive and not v > 0:
        raise _err(source, key, f"must be positive, got {v!r}")
    if not integer:
        setattr(cfg, attr, float(v))


def _validate(cfg: RunConfig, source: str):
    d = cfg.dim
    if not isinstance(cfg.bounds, list) or len(cfg.bounds) != d:
        raise _err(source, "bounds", f"expected {d} [lo, hi] pairs")
    for lo_hi in cfg.bounds:
        if (not isinstance(lo_hi, list) or len(lo_hi) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in lo_hi)):
            raise _err(source, "bounds", f"bad interval {lo_hi!r}")
        if not lo_hi[1] > lo_hi[0]:
            raise _err(source, "bounds", f"degenerate interval {lo_hi!r}")
    cfg.bounds = [[float(lo), float(hi)] for lo, hi in cfg.bounds]
    if isinstance(cfg.n, int) and not isinstance(cfg.n, bool):
        cfg.n = [cfg.n] * d
    if not isinstance(cfg.n, list) or len(cfg.n) != d or not all(
            isinstance(k, int) and not isinstance(k, bool) and k >= 4 for k in cfg.n):
        raise _err(source, "n", f"expected {d} integers >= 4, got {cfg.n!r}")
    if isinstance(cfg.a, str):
        cfg.a = [cfg.a] * d
    if not isinstance(cfg.a, list) or len(cfg.a) != d:
        raise _err(source, "a", f"expected {d} expressions (one per axis)")
    for key in ("a", "eps", "sigma", "bcs"):
        val = getattr(cfg, key)
        for expr in val if isinstance(val, list) else [val]:
            if not isinstance(expr, str):
                raise _err(source, key, f"expected an expression string, got {expr!r}")
            try:
                parse(expr)
            except ExprError as exc:
                raise _err(source, key, str(exc)) from None
    if len(cfg.bcs) != d + 1:
        raise _err(source, "bcs", f"need {d + 1} boundary conditions for d = {d}")
    for key in ("shrink", "lambda", "a_min", "a_max", "guard_radius", "tol_rel", "delta", "blowup"):
        _number(cfg, source, key, positive=key not in ("guard_radius",))
    _number(cfg, source, "near_eig_rel", positive=True, allow_none=True)
    _number(cfg, source, "perturb_radius", positive=True, allow_none=True)
    for key in ("eigen_count", "M", "k", "samples", "budget"):
        _number(cfg, source, key, positive=True, integer=True)
    _number(cfg, source, "seed", integer=True)
    if not 0 < cfg.shrink < 0.5:
        raise _err(source, "shrink", "must lie in (0, 0.5)")
    if cfg.lam < 1:
        raise _err(source, "lambda", "must be >= 1")
    if cfg.a_min >= cfg.a_max:
        raise _err(source, "a_min", f"a_min = {cfg.a_min} must be below a_max = {cfg.a_max}")
    if cfg.guard_radius < 0:
        raise _err(source, "guard_radius", "must be >= 0")
    if not 0 < cfg.delta < 1:
        raise _err(source, "delta", "must lie in (0, 1)")
    if cfg.near_eig_rel is not None and not cfg.near_eig_rel < 1:
        raise _err(source, "near_eig_rel", "must lie in (0, 1)")
    if cfg.M < d + 2:
        raise _err(source, "M", f"need at least d+2 = {d + 2} candidates")
    if not isinstance(cfg.output_dir, str):
        raise _err(source, "output_dir", "expected a path string")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(raw, str(path))


def emit_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
