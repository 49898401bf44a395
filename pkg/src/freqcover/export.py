"""File formats: field CSVs, PGM heatmaps/masks and JSON reports, written atomically."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .completeness import NearZeroSet
from .functional import ConstraintField
from .solver import ComplexField

AXIS_HEADERS = ("x", "y")


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _num(v: float) -> str:
    return f"{float(v):.17g}"


def field_csv(field: ComplexField) -> str:
    """``x[,y],re,im`` for every node, canonical order."""
    grid = field.grid
    coords = grid.flat_coords()
    vals = np.asarray(field.values).ravel()
    head = ",".join(AXIS_HEADERS[: grid.dim] + ("re", "im"))
    lines = [head]
    for c, v in zip(coords, vals):
        lines.append(",".join([_num(x) for x in c] + [_num(v.real), _num(v.imag)]))
    return "\n".join(lines) + "\n"


def constraint_csv(field: ConstraintField) -> str:
    """``x[,y],re,im,abs`` on the inner nodes, canonical order."""
    coords = field.coords()
    head = ",".join(AXIS_HEADERS[: field.grid.dim] + ("re", "im", "abs"))
    lines = [head]
    for c, v in zip(coords, field.values):
        lines.append(",".join([_num(x) for x in c] + [_num(v.real), _num(v.imag), _num(abs(v))]))
    return "\n".join(lines) + "\n"


def _pgm(pixels: np.ndarray) -> str:
    """ASCII P2 image; ``pixels`` rows are ordered bottom (min y) to top and get flipped."""
    pixels = np.atleast_2d(pixels)[::-1]
    h, w = pixels.shape
    body = "\n".join(" ".join(str(int(p)) for p in row) for row in pixels)
    return f"P2\n{w} {h}\n255\n{body}\n"


def _inner_block(field_mask, values: np.ndarray) -> np.ndarray:
    """Reshape inner-node values (canonical order) into their rectangular block."""
    return values.reshape(field_mask.box_shape)


def heatmap_pgm(field: ConstraintField) -> str:
    """255 * clamp(|theta| / scale, 0, 1), rounded half up; top row is max y."""
    if field.scale > 0:
        rel = np.clip(field.abs / field.scale, 0.0, 1.0)
    else:
        rel = np.zeros(field.values.shape)
    pix = np.floor(255.0 * rel + 0.5).astype(int)
    return _pgm(_inner_block(field.mask, pix))


def mask_pgm(zset: NearZeroSet, field: ConstraintField) -> str:
    """255 on near-zero nodes, 0 elsewhere, over the inner block."""
    inner = field.mask.flat_indices
    pix = np.where(np.isin(inner, zset.nodes), 255, 0)
    return _pgm(_inner_block(field.mask, pix))


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    return write_atomic(path, json_text(obj))
