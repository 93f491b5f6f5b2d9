"""Built-in truth fields: smooth modal products and letter-shaped indicators.

Glyphs are unions of straight bars (axis-aligned and diagonal) drawn on
the unit square and mapped to [0.15 pi, 0.85 pi]^2 with a fixed stroke
width of 0.08 pi; values are exactly 0 or 1 and vanish on the boundary.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid2D

GLYPH_BOX_LO = 0.15 * np.pi
GLYPH_BOX_SPAN = 0.70 * np.pi
GLYPH_STROKE = 0.08 * np.pi

# strokes in unit coordinates: ((x0, y0), (x1, y1))
_GLYPH_STROKES = {
    "glyphA": (((0.0, 0.0), (0.5, 1.0)),
               ((1.0, 0.0), (0.5, 1.0)),
               ((0.2, 0.4), (0.8, 0.4))),
    "glyphZ": (((0.0, 1.0), (1.0, 1.0)),
               ((1.0, 1.0), (0.0, 0.0)),
               ((0.0, 0.0), (1.0, 0.0))),
}


def _sin1(x, y):
    return np.sin(x) * np.sin(y)


def _sin2(x, y):
    return np.sin(2 * x) * np.sin(2 * y)


def _sin2exp(x, y):
    return np.sin(2 * x) * np.sin(2 * y) * np.exp((x + y) / np.pi)


def _segment_mask(pts: np.ndarray, p0, p1, width: float) -> np.ndarray:
    """Points within width/2 of the segment [p0, p1]."""
    p0 = np.asarray(p0, dtype=float)
    edge = np.asarray(p1, dtype=float) - p0
    rel = pts - p0
    t = np.clip((rel @ edge) / (edge @ edge), 0.0, 1.0)
    closest = p0 + t[:, None] * edge
    return np.linalg.norm(pts - closest, axis=1) <= 0.5 * width


def _glyph(name: str, grid: Grid2D) -> np.ndarray:
    mask = np.zeros(grid.n_nodes, dtype=bool)
    pts = grid.coords
    for p0, p1 in _GLYPH_STROKES[name]:
        q0 = GLYPH_BOX_LO + GLYPH_BOX_SPAN * np.asarray(p0)
        q1 = GLYPH_BOX_LO + GLYPH_BOX_SPAN * np.asarray(p1)
        mask |= _segment_mask(pts, q0, q1, GLYPH_STROKE)
    return mask.astype(float)


_SMOOTH = {"sin1": _sin1, "sin2": _sin2, "sin2exp": _sin2exp}


def list_shapes() -> list:
    return sorted(list(_SMOOTH) + list(_GLYPH_STROKES))


def make_shape(name: str, grid: Grid2D) -> np.ndarray:
    """Nodal field of a named shape, zeroed on the boundary."""
    if name in _SMOOTH:
        fn = _SMOOTH[name]
        values = fn(grid.coords[:, 0], grid.coords[:, 1])
    elif name in _GLYPH_STROKES:
        values = _glyph(name, grid)
    else:
        raise ValueError(f"unknown shape {name!r}; available: {', '.join(list_shapes())}")
    values = np.asarray(values, dtype=float)
    values[grid.boundary] = 0.0
    return values
