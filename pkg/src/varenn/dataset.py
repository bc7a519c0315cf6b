"""Dataset materialization: grid selection, grid-wise splits, labeled samples.

Grid cells (not individual images) get the train/validation/test assignment,
so overlapping windows from one cell can never leak across splits. Selection
and splitting draw from per-purpose SeedSequence streams; the per-cell
selection stream is keyed by cell_id, which makes inclusion independent of
iteration order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .cube import ClimateCube, GridCell, global_minmax
from .encode import Knockout, apply_knockout, compose_rgb, quantize, scale01
from .errors import (DomainError, EmptyDatasetError, MissingDataError,
                     SplitError, ValidationError)
from .windows import WindowSpec, enumerate_windows, label_for_target, trend_delta

if TYPE_CHECKING:  # pragma: no cover
    from .experiments import ExperimentSpec

_SELECT_STREAM = 301
_SPLIT_STREAM = 302

DEFAULT_FRACTIONS = (0.75, 0.20, 0.05)


class Split(enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"

    @classmethod
    def from_string(cls, text: str) -> "Split":
        for member in cls:
            if member.value == text:
                return member
        raise ValidationError(f"unknown split {text!r}")


@dataclass(frozen=True)
class SampleRecord:
    cell_id: int
    lat: float
    lon: float
    window: WindowSpec
    image_ref: int
    label_ordinal: int
    split: Split


@dataclass
class DatasetManifest:
    """All sample records of one experiment plus the parameters that made them."""

    experiment_id: int
    target: str
    inputs: tuple[str, ...]
    knockout: Knockout
    training_years: int
    labeling_years: int
    c_t: float
    seed: int
    start_year: int
    records: list[SampleRecord]
    n_excluded: int = 0
    images: np.ndarray | None = field(default=None, compare=False, repr=False)

    def class_histogram(self) -> dict[Split, np.ndarray]:
        hist = {split: np.zeros(5, dtype=np.int64) for split in Split}
        for rec in self.records:
            hist[rec.split][rec.label_ordinal - 1] += 1
        return hist

    def split_cells(self) -> dict[Split, set[int]]:
        cells: dict[Split, set[int]] = {split: set() for split in Split}
        for rec in self.records:
            cells[rec.split].add(rec.cell_id)
        return cells

    def validate(self) -> None:
        seen: dict[int, Split] = {}
        for rec in self.records:
            prior = seen.setdefault(rec.cell_id, rec.split)
            if prior is not rec.split:
                raise ValidationError(f"cell {rec.cell_id} appears in splits "
                                      f"{prior.value} and {rec.split.value}")
        hist = self.class_histogram()
        if int(sum(h.sum() for h in hist.values())) != len(self.records):
            raise ValidationError("class histogram does not sum to the record count")

    def indices(self, split: Split) -> np.ndarray:
        return np.array([i for i, rec in enumerate(self.records) if rec.split is split], dtype=np.int64)


def select_grids(cells, c_t: float, seed: int) -> list[GridCell]:
    """Keep each cell whose seeded uniform draw exceeds c_t (expected share 1 - c_t)."""
    if not 0.0 <= c_t <= 1.0:
        raise DomainError(f"c_t must be in [0, 1], got {c_t}")
    selected = []
    for cell in cells:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([seed, _SELECT_STREAM, cell.cell_id])))
        if rng.random() > c_t:
            selected.append(cell)
    return selected


def split_grids(cells, fractions: tuple[float, float, float] = DEFAULT_FRACTIONS,
                seed: int = 0) -> dict[int, Split]:
    """Seeded shuffle then contiguous cut into train/validation/test cell sets.

    Cut points round n * cumulative fraction, which keeps the shares as exact
    as the cell count allows; at tiny n a split that would round to empty
    borrows one cell from the largest split.
    """
    cells = sorted(cells, key=lambda c: c.cell_id)
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError(f"split fractions {fractions} do not sum to 1")
    n = len(cells)
    if n < 3:
        raise SplitError(f"cannot split {n} cells into three subsets")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _SPLIT_STREAM])))
    order = rng.permutation(n)
    cut1 = round(n * fractions[0])
    cut2 = round(n * (fractions[0] + fractions[1]))
    sizes = [cut1, cut2 - cut1, n - cut2]
    while min(sizes) < 1:
        sizes[int(np.argmax(sizes))] -= 1
        sizes[int(np.argmin(sizes))] += 1
    assignment: dict[int, Split] = {}
    offset = 0
    for split, size in zip((Split.TRAIN, Split.VALIDATION, Split.TEST), sizes):
        for pos in order[offset:offset + size]:
            assignment[cells[pos].cell_id] = split
        offset += size
    return assignment


def _window_channels(cube: ClimateCube, codes, cell_id: int, window: WindowSpec,
                     stats, scaling: str, knockout: Knockout) -> list[np.ndarray] | None:
    """Scaled, knocked-out 12xY arrays per input variable, or None when data is missing."""
    channels = []
    for code in codes:
        series = cube.series(code, cell_id)[window.training_slice]
        if not np.all(np.isfinite(series)):
            return None
        monthly = np.asarray(series, dtype=np.float64).reshape(window.training_years, 12).T
        monthly = apply_knockout(monthly, knockout)
        if scaling == "global":
            channels.append(scale01(monthly, stats, code))
        elif scaling == "per_image":
            lo, hi = float(monthly.min()), float(monthly.max())
            channels.append(np.full_like(monthly, 0.5) if lo == hi else (monthly - lo) / (hi - lo))
        else:
            raise ValidationError(f"unknown scaling mode {scaling!r}")
    return channels


def build_dataset(cube: ClimateCube, experiment: "ExperimentSpec",
                  scaling: str = "global",
                  fractions: tuple[float, float, float] = DEFAULT_FRACTIONS) -> DatasetManifest:
    """Materialize every usable (selected cell x window) sample for an experiment.

    Records are ordered by (cell_id, window start); windows touching missing
    data are skipped and counted, never imputed.
    """
    experiment.validate()
    for code in experiment.inputs:
        cube.var_index(code)
    target_code = experiment.target_code
    cube.var_index(target_code)

    windows = enumerate_windows(cube.n_years, experiment.training_years, experiment.labeling_years)
    selected = select_grids(cube.grid, experiment.c_t, experiment.seed)
    if not selected:
        raise EmptyDatasetError(f"c_t={experiment.c_t} selected no cells")
    assignment = split_grids(selected, fractions, experiment.seed)
    stats = global_minmax(cube) if scaling == "global" else None

    records: list[SampleRecord] = []
    images: list[np.ndarray] = []
    variables = tuple(experiment.input_variables)
    n_excluded = 0
    for cell in sorted(selected, key=lambda c: c.cell_id):
        for window in windows:
            try:
                delta = trend_delta(cube, cell, target_code, window)
            except MissingDataError:
                n_excluded += 1
                continue
            channels = _window_channels(cube, experiment.inputs, cell.cell_id, window,
                                        stats, scaling, experiment.knockout)
            if channels is None:
                n_excluded += 1
                continue
            label = label_for_target(experiment.target, delta.delta)
            img = compose_rgb(channels, variables, experiment.knockout, experiment.training_years)
            records.append(SampleRecord(cell.cell_id, cell.lat, cell.lon, window,
                                        len(images), label.ordinal, assignment[cell.cell_id]))
            images.append(img.pixels)
    if not records:
        raise EmptyDatasetError("no usable samples: every window was excluded")

    manifest = DatasetManifest(
        experiment_id=experiment.id,
        target=experiment.target,
        inputs=tuple(experiment.inputs),
        knockout=experiment.knockout,
        training_years=experiment.training_years,
        labeling_years=experiment.labeling_years,
        c_t=experiment.c_t,
        seed=experiment.seed,
        start_year=cube.start_year,
        records=records,
        n_excluded=n_excluded,
        images=np.stack(images).astype(np.float32),
    )
    manifest.validate()
    return manifest


def split_tensors(manifest: DatasetManifest, images: np.ndarray | None = None,
                  quantize_inputs: bool = True) -> dict[Split, tuple[np.ndarray, np.ndarray]]:
    """Per-split (images, 0-based labels) tensors ready for the trainer.

    By default images pass through 8-bit quantization and back to [0, 1],
    mirroring the PNG pathway the classifier is meant to consume.
    """
    if images is None:
        images = manifest.images
    if images is None:
        raise ValidationError("manifest carries no images and none were provided")
    out: dict[Split, tuple[np.ndarray, np.ndarray]] = {}
    for split in Split:
        idx = manifest.indices(split)
        refs = np.array([manifest.records[i].image_ref for i in idx], dtype=np.int64)
        labels = np.array([manifest.records[i].label_ordinal - 1 for i in idx], dtype=np.int64)
        batch = images[refs] if len(refs) else images[:0]
        if quantize_inputs and len(batch):
            batch = quantize(batch).astype(np.float32) / 255.0
        out[split] = (np.ascontiguousarray(batch, dtype=np.float32), labels)
    return out


MANIFEST_HEADER = "# varenn-manifest v1"
_COLUMNS = "cell_id\tlat\tlon\twindow_start_year\tlabel_ordinal\tsplit\timage_ref"


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Line-delimited text manifest; bytes are a pure function of the content."""
    manifest.validate()
    with open(path, "w") as fh:
        fh.write(MANIFEST_HEADER + "\n")
        fh.write(f"# experiment_id={manifest.experiment_id} target={manifest.target} "
                 f"inputs={','.join(manifest.inputs)} knockout={manifest.knockout.value} "
                 f"training_years={manifest.training_years} labeling_years={manifest.labeling_years} "
                 f"c_t={manifest.c_t!r} seed={manifest.seed} start_year={manifest.start_year} "
                 f"excluded={manifest.n_excluded}\n")
        fh.write(f"# columns: {_COLUMNS}\n")
        for rec in manifest.records:
            year = manifest.start_year + rec.window.start_year
            fh.write(f"{rec.cell_id}\t{rec.lat:.4f}\t{rec.lon:.4f}\t{year}\t"
                     f"{rec.label_ordinal}\t{rec.split.value}\t{rec.image_ref}\n")


def load_manifest(path) -> DatasetManifest:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MANIFEST_HEADER:
        raise ValidationError(f"{path}: not a varenn manifest")
    meta: dict[str, str] = {}
    for token in lines[1].lstrip("# ").split():
        key, _, value = token.partition("=")
        meta[key] = value
    training_years = int(meta["training_years"])
    labeling_years = int(meta["labeling_years"])
    start_year = int(meta["start_year"])
    records = []
    for line in lines[3:]:
        if not line or line.startswith("#"):
            continue
        cell_id, lat, lon, year, ordinal, split, ref = line.split("\t")
        window = WindowSpec(12 * (int(year) - start_year), training_years, labeling_years)
        records.append(SampleRecord(int(cell_id), float(lat), float(lon), window,
                                    int(ref), int(ordinal), Split.from_string(split)))
    manifest = DatasetManifest(
        experiment_id=int(meta["experiment_id"]),
        target=meta["target"],
        inputs=tuple(meta["inputs"].split(",")),
        knockout=Knockout.from_string(meta["knockout"]),
        training_years=training_years,
        labeling_years=labeling_years,
        c_t=float(meta["c_t"]),
        seed=int(meta["seed"]),
        start_year=start_year,
        records=records,
        n_excluded=int(meta.get("excluded", "0")),
    )
    manifest.validate()
    return manifest
