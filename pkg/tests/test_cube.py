import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varenn.cube import (FORMAT_VERSION, MAGIC, VARIABLES, ClimateCube, GridCell,
                         global_minmax, load_cube, save_cube, variable)
from varenn.errors import FormatError, LengthError, StatisticsError, ValidationError

from conftest import make_cube


class TestCatalog:
    def test_exactly_eight_members(self):
        assert len(VARIABLES) == 8

    def test_canonical_index_bijection(self):
        assert sorted(v.canonical_index for v in VARIABLES) == list(range(8))

    def test_alphabetical_order(self):
        codes = [v.code for v in VARIABLES]
        assert codes == sorted(codes)
        assert codes == ["cld", "dtr", "frs", "pet", "pre", "tmp", "vap", "wet"]

    @pytest.mark.parametrize("code,units", [
        ("cld", "%"),
        ("dtr", "°C"),
        ("frs", "days"),
        ("pet", "mm d⁻¹"),
        ("pre", "mm mo⁻¹"),
        ("tmp", "°C"),
        ("vap", "hPa"),
        ("wet", "days"),
    ])
    def test_units(self, code, units):
        assert variable(code).units == units

    def test_unknown_code(self):
        with pytest.raises(ValidationError):
            variable("xyz")


def small_cubes():
    """Random small cubes with occasional NaNs, as a hypothesis strategy."""
    return st.builds(
        _build_random_cube,
        n_vars=st.integers(1, 3),
        n_years=st.integers(1, 4),
        n_cells=st.integers(1, 5),
        seed=st.integers(0, 2**31 - 1),
        nan_fraction=st.sampled_from([0.0, 0.1]),
    )


def _build_random_cube(n_vars, n_years, n_cells, seed, nan_fraction):
    rng = np.random.default_rng(seed)
    codes = [v.code for v in VARIABLES[:n_vars]]
    values = {}
    for code in codes:
        block = rng.normal(size=(12 * n_years, n_cells)).astype(np.float32)
        if nan_fraction:
            mask = rng.random(block.shape) < nan_fraction
            block[mask] = np.nan
        values[code] = block
    lats = rng.uniform(-90, 90, n_cells)
    lons = rng.uniform(-180, 179.99, n_cells)
    return make_cube(values, lats=lats, lons=lons)


class TestRoundTrip:
    @given(small_cubes())
    def test_load_save_identity(self, cube):
        import os
        import tempfile
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "c.vcube")
            save_cube(cube, path)
            assert load_cube(path) == cube

    def test_save_is_deterministic(self, tmp_path):
        cube = _build_random_cube(2, 2, 3, seed=7, nan_fraction=0.1)
        save_cube(cube, tmp_path / "a.vcube")
        save_cube(cube, tmp_path / "b.vcube")
        assert (tmp_path / "a.vcube").read_bytes() == (tmp_path / "b.vcube").read_bytes()

    def test_header_echo(self, tmp_path):
        cube = make_cube({"tmp": np.zeros((360, 1), dtype=np.float32)})
        path = tmp_path / "c.vcube"
        save_cube(cube, path)
        raw = path.read_bytes()
        magic, version, n_vars, n_months, n_cells, start_year = struct.unpack_from("<6sHHIIi", raw)
        assert (magic, version) == (MAGIC, FORMAT_VERSION)
        assert (n_vars, n_months, n_cells) == (1, 360, 1)
        assert start_year == 1901


class TestLoadErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.vcube"
        path.write_bytes(b"XXXXXX" + b"\x00" * 40)
        with pytest.raises(FormatError):
            load_cube(path)

    def test_truncated_payload(self, tmp_path):
        cube = make_cube({"tmp": np.ones((12, 2), dtype=np.float32)})
        path = tmp_path / "c.vcube"
        save_cube(cube, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(LengthError):
            load_cube(path)

    def test_declared_two_variables_one_block(self, tmp_path):
        # header says 2 variables but only one variable's payload follows
        path = tmp_path / "short.vcube"
        header = struct.pack("<6sHHIIi", MAGIC, FORMAT_VERSION, 2, 12, 1, 1901)
        cells = struct.pack("<qdd", 0, 10.0, 20.0)
        payload = np.zeros(12, dtype="<f4").tobytes()  # one block, not two
        path.write_bytes(header + b"cldtmp" + cells + payload)
        with pytest.raises(LengthError):
            load_cube(path)

    def test_duplicate_variable_codes(self, tmp_path):
        path = tmp_path / "dup.vcube"
        header = struct.pack("<6sHHIIi", MAGIC, FORMAT_VERSION, 2, 12, 1, 1901)
        cells = struct.pack("<qdd", 0, 10.0, 20.0)
        payload = np.zeros(24, dtype="<f4").tobytes()
        path.write_bytes(header + b"tmptmp" + cells + payload)
        with pytest.raises(ValidationError):
            load_cube(path)

    def test_save_rejects_partial_year(self, tmp_path):
        cube = ClimateCube(
            variables=(variable("tmp"),),
            start_year=1901,
            grid=(GridCell(0, 0.0, 0.0),),
            values=np.zeros((1, 13, 1), dtype=np.float32),
        )
        with pytest.raises(ValidationError):
            save_cube(cube, tmp_path / "c.vcube")


class TestGlobalMinmax:
    def test_constant_field(self):
        cube = make_cube({"tmp": np.full((12, 2), 7.0, dtype=np.float32)})
        stats = global_minmax(cube)
        assert stats.range_for("tmp") == (7.0, 7.0)

    def test_missing_skipped(self):
        block = np.array([[0.0, 5.0], [np.nan, 10.0]] * 6, dtype=np.float32)
        cube = make_cube({"tmp": block})
        assert global_minmax(cube).range_for("tmp") == (0.0, 10.0)

    def test_per_variable_independence(self):
        cube = make_cube({
            "cld": np.linspace(0, 1, 24).reshape(12, 2).astype(np.float32),
            "tmp": np.linspace(100, 200, 24).reshape(12, 2).astype(np.float32),
        })
        stats = global_minmax(cube)
        assert stats.range_for("cld") == (0.0, 1.0)
        assert stats.range_for("tmp") == (100.0, 200.0)

    def test_matches_naive_scan(self, rng):
        # independent oracle: explicit python loop over every entry
        cube = _build_random_cube(3, 2, 4, seed=42, nan_fraction=0.1)
        stats = global_minmax(cube)
        for vi, var in enumerate(cube.variables):
            seen = [float(x) for x in cube.values[vi].ravel() if np.isfinite(x)]
            assert stats.range_for(var.code) == (min(seen), max(seen))

    def test_all_missing_variable_named(self):
        cube = make_cube({"tmp": np.full((12, 1), np.nan, dtype=np.float32)})
        with pytest.raises(StatisticsError, match="tmp"):
            global_minmax(cube)
