"""Climate cube storage: variable catalog, in-memory cube, and the VCUBE1 file format.

A cube holds monthly values for up to eight climatic variables on an arbitrary
set of grid cells.  Values are float32; missing data is encoded as quiet NaN.

VCUBE1 binary layout (all little-endian):

    offset  size          field
    0       6             magic  b"VCUBE1"
    6       2             u16    format version (currently 1)
    8       2             u16    number of variables V
    10      4             u32    number of months M (multiple of 12)
    14      4             u32    number of grid cells G
    18      4             i32    start year of the series
    22      3*V           ASCII  variable codes, 3 bytes each
    ...     24*G          per cell: i64 cell_id, f64 lat, f64 lon
    ...     4*V*M*G       f32    values in [variable][month][cell] C order

Converting external sources (NetCDF etc.) into this format is the caller's
responsibility; this module only defines and validates the container.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, LengthError, StatisticsError, ValidationError

MAGIC = b"VCUBE1"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<6sHHIIi")
_CELL = struct.Struct("<qdd")


@dataclass(frozen=True)
class VariableId:
    """One catalog entry: short code, physical units, and its canonical position.

    Canonical indices order the eight variables alphabetically by code; that
    order fixes RGB channel assignment and experiment enumeration everywhere.
    """

    code: str
    name: str
    units: str
    canonical_index: int

    def __str__(self) -> str:
        return self.code


VARIABLES: tuple[VariableId, ...] = (
    VariableId("cld", "cloud cover", "%", 0),
    VariableId("dtr", "diurnal temperature range", "°C", 1),
    VariableId("frs", "frost day frequency", "days", 2),
    VariableId("pet", "potential evapotranspiration", "mm d⁻¹", 3),
    VariableId("pre", "precipitation", "mm mo⁻¹", 4),
    VariableId("tmp", "daily mean temperature", "°C", 5),
    VariableId("vap", "vapor pressure", "hPa", 6),
    VariableId("wet", "wet day frequency", "days", 7),
)

VARIABLE_CODES: tuple[str, ...] = tuple(v.code for v in VARIABLES)

_BY_CODE = {v.code: v for v in VARIABLES}


def variable(code: str) -> VariableId:
    """Look up a catalog entry by its three-letter code."""
    try:
        return _BY_CODE[code]
    except KeyError:
        raise ValidationError(f"unknown variable code {code!r}; expected one of {VARIABLE_CODES}") from None


@dataclass(frozen=True)
class GridCell:
    cell_id: int
    lat: float
    lon: float

    def validate(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"cell {self.cell_id}: lat {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon < 180.0:
            raise ValidationError(f"cell {self.cell_id}: lon {self.lon} outside [-180, 180)")


@dataclass
class ClimateCube:
    """Monthly climate values, shape [variable][month][cell], float32, NaN = missing.

    ``meta`` carries generator-side ground truth (e.g. planted per-cell trends)
    and is deliberately excluded from equality and serialization.
    """

    variables: tuple[VariableId, ...]
    start_year: int
    grid: tuple[GridCell, ...]
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        self.variables = tuple(self.variables)
        self.grid = tuple(self.grid)
        self.values = np.asarray(self.values, dtype=np.float32)

    @property
    def n_months(self) -> int:
        return int(self.values.shape[1])

    @property
    def n_years(self) -> int:
        return self.n_months // 12

    @property
    def n_cells(self) -> int:
        return len(self.grid)

    def validate(self) -> None:
        codes = [v.code for v in self.variables]
        if len(set(codes)) != len(codes):
            raise ValidationError(f"duplicate variable codes in cube: {codes}")
        for v in self.variables:
            if _BY_CODE.get(v.code) != v:
                raise ValidationError(f"variable {v!r} does not match the catalog")
        if self.values.ndim != 3:
            raise ValidationError(f"values must be 3-d, got shape {self.values.shape}")
        n_vars, n_months, n_cells = self.values.shape
        if n_vars != len(self.variables):
            raise ValidationError(f"values declare {n_vars} variables, cube lists {len(self.variables)}")
        if n_months % 12 != 0:
            raise ValidationError(f"n_months={n_months} is not a whole number of years")
        if n_cells != len(self.grid):
            raise ValidationError(f"values declare {n_cells} cells, grid lists {len(self.grid)}")
        ids = [c.cell_id for c in self.grid]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate cell_id in grid")
        for c in self.grid:
            c.validate()

    def var_index(self, code: str) -> int:
        for i, v in enumerate(self.variables):
            if v.code == code:
                return i
        raise ValidationError(f"variable {code!r} not present in cube ({[v.code for v in self.variables]})")

    def cell_index(self, cell_id: int) -> int:
        idx = self._cell_index_map().get(cell_id)
        if idx is None:
            raise ValidationError(f"cell_id {cell_id} not present in cube")
        return idx

    def _cell_index_map(self) -> dict[int, int]:
        cached = self.meta.get("_cell_index")
        if cached is None:
            cached = {c.cell_id: i for i, c in enumerate(self.grid)}
            self.meta["_cell_index"] = cached
        return cached

    def series(self, code: str, cell_id: int) -> np.ndarray:
        """Monthly series of one variable at one cell, length n_months."""
        return self.values[self.var_index(code), :, self.cell_index(cell_id)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClimateCube):
            return NotImplemented
        return (
            self.variables == other.variables
            and self.start_year == other.start_year
            and self.grid == other.grid
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values, equal_nan=True))
        )


@dataclass(frozen=True)
class ScalingStats:
    """Per-variable (min, max) over all non-missing cube entries."""

    ranges: dict[str, tuple[float, float]]

    def range_for(self, code: str) -> tuple[float, float]:
        try:
            return self.ranges[code]
        except KeyError:
            raise StatisticsError(f"no scaling statistics for variable {code!r}") from None


def global_minmax(cube: ClimateCube) -> ScalingStats:
    """Min/max per variable over every non-missing entry in the cube."""
    ranges: dict[str, tuple[float, float]] = {}
    for i, var in enumerate(cube.variables):
        block = cube.values[i]
        if not np.any(np.isfinite(block)):
            raise StatisticsError(f"variable {var.code!r} has no non-missing values")
        lo = float(np.nanmin(block))
        hi = float(np.nanmax(block))
        if not (lo <= hi):
            raise StatisticsError(f"variable {var.code!r}: degenerate range ({lo}, {hi})")
        ranges[var.code] = (lo, hi)
    return ScalingStats(ranges)


def save_cube(cube: ClimateCube, path) -> None:
    """Write a cube in VCUBE1 format. Output bytes are a pure function of the cube."""
    cube.validate()
    n_vars, n_months, n_cells = cube.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, n_vars, n_months, n_cells, cube.start_year))
        for v in cube.variables:
            fh.write(v.code.encode("ascii"))
        for c in cube.grid:
            fh.write(_CELL.pack(c.cell_id, c.lat, c.lon))
        fh.write(np.ascontiguousarray(cube.values, dtype="<f4").tobytes())


def load_cube(path) -> ClimateCube:
    """Read a VCUBE1 file back into a cube. Inverse of :func:`save_cube`."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise LengthError(f"{path}: file shorter than the VCUBE1 header")
    magic, version, n_vars, n_months, n_cells, start_year = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported VCUBE version {version}")
    off = _HEADER.size
    expected = off + 3 * n_vars + _CELL.size * n_cells + 4 * n_vars * n_months * n_cells
    if len(data) != expected:
        raise LengthError(f"{path}: payload is {len(data)} bytes, header implies {expected}")
    codes = [data[off + 3 * i : off + 3 * (i + 1)].decode("ascii") for i in range(n_vars)]
    if len(set(codes)) != len(codes):
        raise ValidationError(f"{path}: duplicate variable codes {codes}")
    variables = tuple(variable(code) for code in codes)
    off += 3 * n_vars
    grid = []
    for _ in range(n_cells):
        cell_id, lat, lon = _CELL.unpack_from(data, off)
        grid.append(GridCell(cell_id, lat, lon))
        off += _CELL.size
    values = np.frombuffer(data, dtype="<f4", offset=off).reshape(n_vars, n_months, n_cells).copy()
    cube = ClimateCube(variables=variables, start_year=start_year, grid=tuple(grid), values=values)
    cube.validate()
    return cube
