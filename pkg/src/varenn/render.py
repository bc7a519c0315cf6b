"""Equirectangular map rendering of per-cell classifications and errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DomainError, ValidationError

# Category colors, strongest rise (1) to strongest fall (5): warm red to cool blue.
CATEGORY_PALETTE: tuple[tuple[int, int, int], ...] = (
    (178, 24, 43),
    (239, 138, 98),
    (253, 219, 199),
    (103, 169, 207),
    (33, 102, 172),
)
ERROR_COLOR = (230, 97, 1)       # orange
CORRECT_COLOR = (200, 200, 200)  # neutral gray
BACKGROUND = (255, 255, 255)


@dataclass(frozen=True)
class MapRecord:
    lat: float
    lon: float
    true_ordinal: int
    predicted_ordinal: int


def _pixel(lat: float, lon: float, width: int, height: int) -> tuple[int, int]:
    col = int((lon + 180.0) / 360.0 * width)
    row = int((90.0 - lat) / 180.0 * height)
    return min(max(row, 0), height - 1), min(max(col, 0), width - 1)


def render_map(records, path, kind: str = "classes",
               width: int = 720, height: int = 360,
               palette: tuple[tuple[int, int, int], ...] = CATEGORY_PALETTE) -> np.ndarray:
    """Raster the records onto a lat/lon grid and write a PNG.

    ``classes`` colors each cell by its predicted category; ``errors`` marks
    misclassified cells orange on a neutral background. Records are drawn in
    sorted order so the output is independent of input ordering.
    """
    records = sorted(records, key=lambda r: (r.lat, r.lon, r.true_ordinal, r.predicted_ordinal))
    if not records:
        raise DomainError("no records to render")
    if kind not in ("classes", "errors"):
        raise ValidationError(f"unknown map kind {kind!r}; expected 'classes' or 'errors'")
    if len(palette) < 5:
        raise ValidationError("palette needs 5 category colors")
    canvas = np.empty((height, width, 3), dtype=np.uint8)
    canvas[:] = BACKGROUND
    for rec in records:
        if not 1 <= rec.predicted_ordinal <= 5 or not 1 <= rec.true_ordinal <= 5:
            raise DomainError(f"ordinals outside 1..5 at ({rec.lat}, {rec.lon})")
        row, col = _pixel(rec.lat, rec.lon, width, height)
        if kind == "classes":
            canvas[row, col] = palette[rec.predicted_ordinal - 1]
        else:
            correct = rec.predicted_ordinal == rec.true_ordinal
            canvas[row, col] = CORRECT_COLOR if correct else ERROR_COLOR
    Image.fromarray(canvas, mode="RGB").save(path, format="PNG")
    return canvas
