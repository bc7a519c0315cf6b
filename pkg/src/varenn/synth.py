"""Synthetic climate generator.

Produces cubes whose per-cell structure is known in closed form, so every
downstream stage (labeling, encoding, training, evaluation) can be checked
against planted ground truth instead of real observations.

Monthly value model, per variable and cell::

    value(y, m) = base + amp_cell * cos(2*pi*(m - phase)/12) + trend_cell * y + noise(t)

where ``y`` is the year index, ``m`` the month 0..11, and ``noise`` an AR(1)
process n[t] = ar1 * n[t-1] + eps[t] with eps drawn i.i.d. Normal(0, noise_sd).

Per-cell parameters are deterministic functions of the cell index: either a
linear ramp (``*_spread``), an explicit cycling list (``*_levels``), or those
plus seeded Gaussian jitter (``*_jitter_sd``).  The realized per-cell trend and
amplitude are kept on ``cube.meta`` so expected labels stay computable exactly.

All randomness is keyed by ``(seed, stream tag, variable index, cell id)``
through numpy ``SeedSequence``, so generation order never affects output.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.signal import lfilter

from .cube import ClimateCube, GridCell, variable
from .errors import ValidationError

_GRID_STREAM = 101
_NOISE_STREAM = 102
_TREND_JITTER_STREAM = 103
_AMP_JITTER_STREAM = 104


@dataclass(frozen=True)
class VariableSynth:
    """Generator parameters for a single climatic variable."""

    base: float = 0.0
    seasonal_amplitude: float = 0.0
    seasonal_phase: float = 0.0
    trend_per_year: float = 0.0
    noise_sd: float = 0.0
    ar1: float = 0.0
    # per-cell structure: a symmetric linear ramp over cell index, or an
    # explicit list cycled by cell index (levels win when both are given)
    trend_spread: float = 0.0
    trend_levels: tuple[float, ...] = ()
    amp_spread: float = 0.0
    amp_levels: tuple[float, ...] = ()
    # seeded per-cell Gaussian offsets; these do NOT average out over time
    trend_jitter_sd: float = 0.0
    amp_jitter_sd: float = 0.0

    def validate(self) -> None:
        if not 0.0 <= self.ar1 < 1.0:
            raise ValidationError(f"ar1 coefficient {self.ar1} outside [0, 1)")
        if self.noise_sd < 0:
            raise ValidationError(f"noise_sd {self.noise_sd} is negative")


@dataclass(frozen=True)
class SynthSpec:
    n_cells: int
    n_years: int
    seed: int
    variables: dict[str, VariableSynth] = field(default_factory=dict)

    def validate(self) -> None:
        if self.n_cells < 1:
            raise ValidationError(f"n_cells must be >= 1, got {self.n_cells}")
        if self.n_years < 1:
            raise ValidationError(f"n_years must be >= 1, got {self.n_years}")
        if not self.variables:
            raise ValidationError("synth spec lists no variables")
        for code, vs in self.variables.items():
            variable(code)  # raises on unknown codes
            vs.validate()


def _per_cell(base_value: float, spread: float, levels: tuple[float, ...], jitter_sd: float,
              n_cells: int, rng_key: list[int]) -> np.ndarray:
    if levels:
        vals = np.array([levels[i % len(levels)] for i in range(n_cells)], dtype=np.float64)
    elif spread != 0.0 and n_cells > 1:
        ramp = 2.0 * np.arange(n_cells) / (n_cells - 1) - 1.0
        vals = base_value + spread * ramp
    else:
        vals = np.full(n_cells, base_value, dtype=np.float64)
    if jitter_sd > 0.0:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_key)))
        vals = vals + jitter_sd * rng.standard_normal(n_cells)
    return vals


def cell_trends(spec: SynthSpec, code: str) -> np.ndarray:
    """Planted per-cell trend (units per year) for one variable."""
    vs = spec.variables[code]
    key = [spec.seed, _TREND_JITTER_STREAM, variable(code).canonical_index]
    return _per_cell(vs.trend_per_year, vs.trend_spread, vs.trend_levels, vs.trend_jitter_sd,
                     spec.n_cells, key)


def cell_amplitudes(spec: SynthSpec, code: str) -> np.ndarray:
    """Planted per-cell seasonal amplitude for one variable."""
    vs = spec.variables[code]
    key = [spec.seed, _AMP_JITTER_STREAM, variable(code).canonical_index]
    return _per_cell(vs.seasonal_amplitude, vs.amp_spread, vs.amp_levels, vs.amp_jitter_sd,
                     spec.n_cells, key)


def synth_generate(spec: SynthSpec) -> ClimateCube:
    """Generate a cube from the spec. Same spec always yields the same cube."""
    spec.validate()
    codes = sorted(spec.variables, key=lambda c: variable(c).canonical_index)
    n_months = 12 * spec.n_years

    grid_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed, _GRID_STREAM])))
    lats = grid_rng.uniform(-60.0, 60.0, spec.n_cells)
    lons = grid_rng.uniform(-180.0, 180.0, spec.n_cells)
    grid = tuple(GridCell(i, round(float(lats[i]), 4), round(float(lons[i]), 4))
                 for i in range(spec.n_cells))

    months = np.arange(n_months)
    years = months // 12
    month_of_year = months % 12

    values = np.empty((len(codes), n_months, spec.n_cells), dtype=np.float32)
    trend_meta: dict[str, np.ndarray] = {}
    amp_meta: dict[str, np.ndarray] = {}
    for vi, code in enumerate(codes):
        vs = spec.variables[code]
        trends = cell_trends(spec, code)
        amps = cell_amplitudes(spec, code)
        trend_meta[code] = trends
        amp_meta[code] = amps

        season = np.cos(2.0 * np.pi * (month_of_year - vs.seasonal_phase) / 12.0)
        block = (vs.base
                 + amps[None, :] * season[:, None]
                 + trends[None, :] * years[:, None].astype(np.float64))
        if vs.noise_sd > 0.0:
            canon = variable(code).canonical_index
            for ci in range(spec.n_cells):
                rng = np.random.Generator(np.random.PCG64(
                    np.random.SeedSequence([spec.seed, _NOISE_STREAM, canon, ci])))
                eps = vs.noise_sd * rng.standard_normal(n_months)
                block[:, ci] += lfilter([1.0], [1.0, -vs.ar1], eps)
        values[vi] = block.astype(np.float32)

    cube = ClimateCube(
        variables=tuple(variable(c) for c in codes),
        start_year=1901,
        grid=grid,
        values=values,
        meta={"trend_per_year": trend_meta, "seasonal_amplitude": amp_meta, "synth_seed": spec.seed},
    )
    cube.validate()
    return cube


def planted_deltas(cube: ClimateCube, code: str, training_years: int, labeling_years: int = 10) -> np.ndarray:
    """Noise-free expected labeling-minus-training mean per cell.

    For a pure linear trend t per year the window means differ by
    t * (mean(labeling year indices) - mean(training year indices)), which is
    independent of the window start. Seasonal terms cancel over whole years.
    """
    trends = cube.meta.get("trend_per_year", {}).get(code)
    if trends is None:
        raise ValidationError(f"cube carries no planted trends for {code!r} (not a synthetic cube?)")
    gap = (training_years + (labeling_years - 1) / 2.0) - (training_years - 1) / 2.0
    return np.asarray(trends) * gap


_SYNTH_SECTION = "synth"
_VAR_PREFIX = "variable."
_LIST_FIELDS = {"trend_levels", "amp_levels"}


def parse_synth_config(path) -> SynthSpec:
    """Read a SynthSpec from a plain-text key/value (INI style) config file.

    Layout: a ``[synth]`` section with n_cells / n_years / seed, plus one
    ``[variable.<code>]`` section per variable carrying VariableSynth fields.
    List fields are comma separated.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise ValidationError(f"cannot read synth config {path}")
    if _SYNTH_SECTION not in cp:
        raise ValidationError(f"{path}: missing [{_SYNTH_SECTION}] section")
    top = cp[_SYNTH_SECTION]
    try:
        n_cells = top.getint("n_cells")
        n_years = top.getint("n_years")
        seed = top.getint("seed", fallback=0)
    except ValueError as exc:
        raise ValidationError(f"{path}: bad [{_SYNTH_SECTION}] value: {exc}") from exc
    if n_cells is None or n_years is None:
        raise ValidationError(f"{path}: [{_SYNTH_SECTION}] must set n_cells and n_years")

    known = {f.name for f in fields(VariableSynth)}
    variables: dict[str, VariableSynth] = {}
    for section in cp.sections():
        if not section.startswith(_VAR_PREFIX):
            continue
        code = section[len(_VAR_PREFIX):]
        variable(code)
        kwargs = {}
        for key, raw in cp[section].items():
            if key not in known:
                raise ValidationError(f"{path}: [{section}] has unknown key {key!r}")
            if key in _LIST_FIELDS:
                kwargs[key] = tuple(float(tok) for tok in raw.split(",") if tok.strip())
            else:
                kwargs[key] = float(raw)
        variables[code] = VariableSynth(**kwargs)

    spec = SynthSpec(n_cells=n_cells, n_years=n_years, seed=seed, variables=variables)
    spec.validate()
    return spec


def format_synth_config(spec: SynthSpec) -> str:
    """Render a SynthSpec back into config-file text (inverse of parsing)."""
    lines = [f"[{_SYNTH_SECTION}]",
             f"n_cells = {spec.n_cells}",
             f"n_years = {spec.n_years}",
             f"seed = {spec.seed}",
             ""]
    for code in sorted(spec.variables, key=lambda c: variable(c).canonical_index):
        vs = spec.variables[code]
        lines.append(f"[{_VAR_PREFIX}{code}]")
        for f in fields(VariableSynth):
            val = getattr(vs, f.name)
            if f.name in _LIST_FIELDS:
                if val:
                    lines.append(f"{f.name} = {', '.join(repr(x) for x in val)}")
            elif val != f.default:
                lines.append(f"{f.name} = {val!r}")
        lines.append("")
    return "\n".join(lines)
