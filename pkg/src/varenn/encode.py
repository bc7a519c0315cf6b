"""Encoding of monthly window data into 60x60 RGB images.

Orientation: months run top to bottom (January at the top, 5 pixel rows per
month), years run left to right (60/Y pixel columns per year). Up to three
variables occupy the R, G, B channels in canonical alphabetical order; unused
channels are zero.

Knockout transforms ablate one kind of temporal variation in the underlying
12xY window data before rasterization:

- ``knockout_interannual``: replace each month's series by its mean over years.
  Rows of the image become constant (horizontal stripes); only the seasonal
  cycle survives.
- ``knockout_seasonal``: replace each year's months by the annual mean.
  Columns become constant (vertical stripes); only interannual structure
  survives.

The ``Knockout`` enum names the variation that was removed.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .cube import ScalingStats, VariableId
from .errors import ConfigurationError, FormatError, LengthError, ValidationError

IMAGE_SIZE = 60
N_CHANNELS = 3
MONTH_ROWS = IMAGE_SIZE // 12  # 5 pixel rows per month


class Knockout(enum.Enum):
    """Which temporal variation has been knocked out of the window data."""

    NONE = "none"
    SEASONAL = "seasonal_only"      # seasonal cycle removed -> vertical stripes
    INTERANNUAL = "interannual_only"  # interannual variation removed -> horizontal stripes

    @classmethod
    def from_string(cls, text: str) -> "Knockout":
        for member in cls:
            if member.value == text:
                return member
        raise ValidationError(f"unknown knockout {text!r}; expected one of "
                              f"{[m.value for m in cls]}")


@dataclass
class VarennImage:
    """A 60x60x3 image in [0, 1] plus the channel assignment that produced it."""

    pixels: np.ndarray
    channel_map: tuple[VariableId, ...]
    knockout: Knockout = Knockout.NONE
    training_years: int = 30

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float32)

    def validate(self) -> None:
        if self.pixels.shape != (IMAGE_SIZE, IMAGE_SIZE, N_CHANNELS):
            raise ValidationError(f"image shape {self.pixels.shape} != "
                                  f"({IMAGE_SIZE}, {IMAGE_SIZE}, {N_CHANNELS})")
        if np.any(self.pixels < 0) or np.any(self.pixels > 1):
            raise ValidationError("pixel values outside [0, 1]")
        if not 1 <= len(self.channel_map) <= N_CHANNELS:
            raise ValidationError(f"channel_map has {len(self.channel_map)} variables, expected 1..3")
        for ch in range(len(self.channel_map), N_CHANNELS):
            if np.any(self.pixels[:, :, ch] != 0):
                raise ValidationError(f"vacant channel {ch} is not identically zero")
        if self.knockout is Knockout.INTERANNUAL and not rows_constant(self.pixels):
            raise ValidationError("interannual knockout image must have constant rows")
        if self.knockout is Knockout.SEASONAL and not columns_constant(self.pixels):
            raise ValidationError("seasonal knockout image must have constant columns")


def rows_constant(pixels: np.ndarray) -> bool:
    """True when every pixel row is constant across columns (horizontal stripes)."""
    return bool(np.all(pixels == pixels[:, :1]))


def columns_constant(pixels: np.ndarray) -> bool:
    """True when every pixel column is constant across rows (vertical stripes)."""
    return bool(np.all(pixels == pixels[:1, :]))


def scale01(x, stats: ScalingStats, v: VariableId | str):
    """Map raw values onto [0, 1] using a variable's global min/max.

    Values outside the range clamp; a degenerate range maps everything to 0.5.
    Accepts scalars or arrays.
    """
    code = v.code if isinstance(v, VariableId) else v
    lo, hi = stats.range_for(code)
    if lo == hi:
        return np.full_like(np.asarray(x, dtype=np.float64), 0.5) if np.ndim(x) else 0.5
    scaled = (np.asarray(x, dtype=np.float64) - lo) / (hi - lo)
    clipped = np.clip(scaled, 0.0, 1.0)
    return clipped if np.ndim(x) else float(clipped)


def rasterize(monthly: np.ndarray) -> np.ndarray:
    """Expand a 12xY array of scaled values into a 60x60 pixel block raster.

    Month m fills rows [5m, 5m+5); year y fills columns [w*y, w*(y+1)) with
    w = 60/Y. Pure block replication, no interpolation.
    """
    monthly = np.asarray(monthly, dtype=np.float64)
    if monthly.ndim != 2 or monthly.shape[0] != 12:
        raise ConfigurationError(f"expected a 12xY array, got shape {monthly.shape}")
    n_years = monthly.shape[1]
    if n_years < 1 or IMAGE_SIZE % n_years != 0:
        raise ConfigurationError(f"{n_years} year columns do not divide the {IMAGE_SIZE}-pixel width")
    year_cols = IMAGE_SIZE // n_years
    return np.repeat(np.repeat(monthly, MONTH_ROWS, axis=0), year_cols, axis=1)


def compose_rgb(window_data: list[np.ndarray] | tuple[np.ndarray, ...],
                variables: tuple[VariableId, ...],
                knockout: Knockout = Knockout.NONE,
                training_years: int = 30) -> VarennImage:
    """Rasterize up to three scaled 12xY arrays into the R, G, B channels.

    Variables must be sorted by canonical index and free of duplicates; that
    fixed order is what makes channel assignment reproducible across runs.
    """
    variables = tuple(variables)
    if not 1 <= len(variables) <= N_CHANNELS:
        raise ValidationError(f"need 1..3 variables, got {len(variables)}")
    if len(window_data) != len(variables):
        raise ValidationError(f"{len(window_data)} data arrays for {len(variables)} variables")
    order = [v.canonical_index for v in variables]
    if sorted(set(order)) != order:
        raise ValidationError(f"variables must be sorted by canonical order without duplicates, "
                              f"got {[v.code for v in variables]}")
    pixels = np.zeros((IMAGE_SIZE, IMAGE_SIZE, N_CHANNELS), dtype=np.float32)
    for ch, data in enumerate(window_data):
        pixels[:, :, ch] = rasterize(data)
    img = VarennImage(pixels, variables, knockout, training_years)
    img.validate()
    return img


def knockout_interannual(window_data: np.ndarray) -> np.ndarray:
    """Average each month over all years; output rows (months) are year-invariant."""
    data = np.asarray(window_data, dtype=np.float64)
    return np.broadcast_to(data.mean(axis=1, keepdims=True), data.shape).copy()


def knockout_seasonal(window_data: np.ndarray) -> np.ndarray:
    """Average each year over its months; output columns (years) are month-invariant."""
    data = np.asarray(window_data, dtype=np.float64)
    return np.broadcast_to(data.mean(axis=0, keepdims=True), data.shape).copy()


def apply_knockout(window_data: np.ndarray, knockout: Knockout) -> np.ndarray:
    if knockout is Knockout.NONE:
        return np.asarray(window_data, dtype=np.float64)
    if knockout is Knockout.INTERANNUAL:
        return knockout_interannual(window_data)
    return knockout_seasonal(window_data)


def quantize(pixels: np.ndarray) -> np.ndarray:
    """8-bit quantization with round-half-up, the byte mapping used for PNGs."""
    return np.floor(np.asarray(pixels, dtype=np.float64) * 255.0 + 0.5).astype(np.uint8)


def export_png(img: VarennImage, path) -> None:
    """Write the image as an 8-bit RGB PNG; bytes are round(255 * value)."""
    img.validate()
    Image.fromarray(quantize(img.pixels), mode="RGB").save(path, format="PNG")


# ---------------------------------------------------------------------------
# Image cache file: raw float32 tensors for fast re-training.
#
# Layout (little-endian): magic b"VIMG1", u16 version, u32 n_images,
# u16 height, u16 width, u16 channels, then n*h*w*c float32 values in
# [image][row][col][channel] C order.
# ---------------------------------------------------------------------------

CACHE_MAGIC = b"VIMG1"
_CACHE_HEADER = struct.Struct("<5sHIHHH")


def write_image_cache(images: np.ndarray, path) -> None:
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 4:
        raise ValidationError(f"image cache expects an (N, H, W, C) array, got shape {images.shape}")
    n, h, w, c = images.shape
    with open(path, "wb") as fh:
        fh.write(_CACHE_HEADER.pack(CACHE_MAGIC, 1, n, h, w, c))
        fh.write(np.ascontiguousarray(images, dtype="<f4").tobytes())


def read_image_cache(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_CACHE_HEADER.size)
        if len(header) < _CACHE_HEADER.size:
            raise LengthError(f"{path}: file shorter than the image cache header")
        magic, version, n, h, w, c = _CACHE_HEADER.unpack(header)
        if magic != CACHE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {CACHE_MAGIC!r}")
        if version != 1:
            raise FormatError(f"{path}: unsupported image cache version {version}")
        payload = fh.read()
    expected = 4 * n * h * w * c
    if len(payload) != expected:
        raise LengthError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(n, h, w, c).copy()
