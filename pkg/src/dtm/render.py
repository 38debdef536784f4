"""Group-map rendering: one pixel per token, colored by group id.

Output is binary PPM (P6), chosen because it needs no dependencies and the
bytes are directly comparable in tests. Colors come from a fixed 64-entry
palette cycled by group id.
"""

from __future__ import annotations

import colorsys

import numpy as np

from .errors import GridMismatchError
from .types import MorphingMatrix


def _build_palette() -> np.ndarray:
    colors = np.empty((64, 3), dtype=np.uint8)
    for i in range(64):
        hue = ((i * 47) % 64) / 64.0
        sat = 0.85 if i % 2 == 0 else 0.60
        val = 0.95 if (i // 2) % 2 == 0 else 0.70
        r, g, b = colorsys.hsv_to_rgb(hue, sat, val)
        colors[i] = (round(r * 255), round(g * 255), round(b * 255))
    return colors


PALETTE = _build_palette()
PALETTE.flags.writeable = False


def render_group_map(m: MorphingMatrix, grid_h: int, grid_w: int, path) -> None:
    """Write an H x W P6 image; token j sits at row j // W, column j % W."""
    if grid_h < 1 or grid_w < 1 or grid_h * grid_w != m.n_tokens:
        raise GridMismatchError(
            f"grid {grid_h}x{grid_w} does not cover {m.n_tokens} tokens"
        )
    pixels = PALETTE[m.assignment % 64]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{grid_w} {grid_h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
