import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from varenn.cube import ClimateCube, GridCell, variable

settings.register_profile(
    "varenn",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("varenn")


def make_cube(values_by_code: dict[str, np.ndarray], start_year: int = 1901,
              lats=None, lons=None) -> ClimateCube:
    """Build a cube straight from per-variable [month][cell] arrays."""
    codes = sorted(values_by_code, key=lambda c: variable(c).canonical_index)
    blocks = [np.asarray(values_by_code[c], dtype=np.float32) for c in codes]
    n_months, n_cells = blocks[0].shape
    grid = tuple(GridCell(i,
                          lats[i] if lats is not None else float(i % 90) - 45.0,
                          lons[i] if lons is not None else float((i * 7) % 360) - 180.0)
                 for i in range(n_cells))
    cube = ClimateCube(
        variables=tuple(variable(c) for c in codes),
        start_year=start_year,
        grid=grid,
        values=np.stack(blocks),
    )
    cube.validate()
    return cube


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
