import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varenn.errors import DomainError, MissingDataError
from varenn.synth import SynthSpec, VariableSynth, synth_generate
from varenn.windows import (WindowSpec, enumerate_windows, label_for_target,
                            label_pre, label_tmp, trend_delta)

from conftest import make_cube


class TestEnumerateWindows:
    def test_full_series_thirty_ten(self):
        assert len(enumerate_windows(116, 30, 10)) == 77

    def test_exact_fit(self):
        windows = enumerate_windows(40, 30, 10)
        assert len(windows) == 1
        assert windows[0].start_month == 0

    def test_ten_ten(self):
        windows = enumerate_windows(116, 10, 10)
        assert len(windows) == 97
        # cross-check against explicit enumeration of fitting start years
        fits = [s for s in range(116) if s + 20 <= 116]
        assert [w.start_year for w in windows] == fits

    def test_too_small(self):
        with pytest.raises(DomainError):
            enumerate_windows(39, 30, 10)

    @given(st.integers(20, 130), st.integers(1, 40), st.integers(1, 20))
    def test_count_formula_and_span(self, n_years, training, labeling):
        if n_years < training + labeling:
            with pytest.raises(DomainError):
                enumerate_windows(n_years, training, labeling)
            return
        windows = enumerate_windows(n_years, training, labeling)
        assert len(windows) == n_years - (training + labeling) + 1
        for i, w in enumerate(windows):
            assert w.start_year == i
            # training and labeling are contiguous, disjoint, and span the window
            assert w.training_slice.stop == w.labeling_slice.start
            span_months = w.labeling_slice.stop - w.training_slice.start
            assert span_months == 12 * (training + labeling)
            assert w.labeling_slice.stop <= 12 * n_years


class TestTrendDelta:
    def test_constant_series_zero_delta(self):
        cube = make_cube({"tmp": np.full((12 * 45, 3), 5.0, dtype=np.float32)})
        d = trend_delta(cube, 1, "tmp", WindowSpec(0))
        assert d.delta == 0.0
        assert d.training_mean == 5.0
        assert d.labeling_mean == 5.0

    def test_linear_trend_gives_twenty_t(self):
        t = 0.21
        spec = SynthSpec(n_cells=2, n_years=45, seed=0,
                         variables={"tmp": VariableSynth(trend_per_year=t, seasonal_amplitude=3.0)})
        cube = synth_generate(spec)
        for start in (0, 12, 60):
            d = trend_delta(cube, 0, "tmp", WindowSpec(start))
            assert d.delta == pytest.approx(20.0 * t, rel=1e-5)

    def test_matches_naive_two_pass_mean(self, rng):
        values = rng.normal(10.0, 4.0, size=(12 * 50, 2)).astype(np.float32)
        cube = make_cube({"tmp": values})
        w = WindowSpec(5 * 12)
        d = trend_delta(cube, 0, "tmp", w)
        series = [float(x) for x in values[:, 0]]
        naive_train = math.fsum(series[w.training_slice.start:w.training_slice.stop]) / 360.0
        naive_label = math.fsum(series[w.labeling_slice.start:w.labeling_slice.stop]) / 120.0
        assert d.training_mean == pytest.approx(naive_train, rel=1e-9)
        assert d.labeling_mean == pytest.approx(naive_label, rel=1e-9)
        assert d.delta == pytest.approx(naive_label - naive_train, rel=1e-9)

    def test_missing_value_raises_exclusion(self):
        values = np.full((12 * 45, 1), 4.0, dtype=np.float32)
        values[200, 0] = np.nan
        cube = make_cube({"tmp": values})
        with pytest.raises(MissingDataError):
            trend_delta(cube, 0, "tmp", WindowSpec(0))

    def test_window_beyond_series(self):
        cube = make_cube({"tmp": np.zeros((12 * 41, 1), dtype=np.float32)})
        with pytest.raises(DomainError):
            trend_delta(cube, 0, "tmp", WindowSpec(24))


class TestLabelBoundaries:
    @pytest.mark.parametrize("delta,ordinal", [
        (-30.0, 5), (-10.0, 5), (-2.5, 4), (0.0, 3), (2.5, 2),
        (3.0, 2), (5.0, 1), (9.9, 1), (10.0, 1), (30.0, 1),
    ])
    def test_temperature_table(self, delta, ordinal):
        label = label_tmp(delta)
        assert label.ordinal == ordinal
        assert label.family == "T"
        assert label.name == f"T{ordinal}"

    @pytest.mark.parametrize("delta,ordinal", [
        (-30.0, 4), (-10.0, 3), (-2.5, 3), (0.0, 3), (2.5, 3),
        (5.0, 3), (9.9, 3), (10.0, 2), (30.0, 1), (-30.1, 5),
    ])
    def test_precipitation_table(self, delta, ordinal):
        label = label_pre(delta)
        assert label.ordinal == ordinal
        assert label.family == "P"

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), float("-inf")])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(DomainError):
            label_tmp(bad)
        with pytest.raises(DomainError):
            label_pre(bad)

    def test_target_dispatch(self):
        assert label_for_target("TMP", 3.0).name == "T2"
        assert label_for_target("PRE", 3.0).name == "P3"


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_partition_every_delta_has_one_category(delta):
    for labeler in (label_tmp, label_pre):
        label = labeler(delta)
        assert 1 <= label.ordinal <= 5


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
       st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_labeling_is_monotone(d1, d2):
    # larger rises map to lower ordinals (category 1 is the strongest rise)
    lo, hi = min(d1, d2), max(d1, d2)
    for labeler in (label_tmp, label_pre):
        assert labeler(lo).ordinal >= labeler(hi).ordinal
