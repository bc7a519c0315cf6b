import numpy as np
import pytest

from varenn.errors import ValidationError
from varenn.synth import (SynthSpec, VariableSynth, cell_amplitudes, cell_trends,
                          format_synth_config, parse_synth_config, planted_deltas,
                          synth_generate)


def simple_spec(**tmp_kwargs) -> SynthSpec:
    defaults = dict(base=10.0, seasonal_amplitude=5.0, seasonal_phase=6.0)
    defaults.update(tmp_kwargs)
    return SynthSpec(n_cells=4, n_years=45, seed=5,
                     variables={"tmp": VariableSynth(**defaults)})


class TestClosedForm:
    def test_pure_seasonality_repeats_every_year(self):
        cube = synth_generate(simple_spec(trend_per_year=0.0, noise_sd=0.0))
        series = cube.series("tmp", 0)
        years = series.reshape(-1, 12)
        assert np.array_equal(years, np.broadcast_to(years[0], years.shape))

    def test_trend_only_delta_is_twenty_t(self):
        # oracle: brute-force averaging of the raw series
        t = 0.13
        cube = synth_generate(simple_spec(seasonal_amplitude=0.0, trend_per_year=t))
        series = cube.series("tmp", 2).astype(np.float64)
        mu_train = series[: 30 * 12].mean()
        mu_label = series[30 * 12 : 40 * 12].mean()
        assert mu_label - mu_train == pytest.approx(20.0 * t, rel=1e-5)
        assert planted_deltas(cube, "tmp", 30)[2] == pytest.approx(20.0 * t)

    def test_values_match_formula_everywhere(self):
        # full scan: every (variable, month, year, cell) agrees with the formula
        spec = simple_spec(trend_per_year=0.07)
        cube = synth_generate(spec)
        vs = spec.variables["tmp"]
        months = np.arange(cube.n_months)
        years, month_of_year = months // 12, months % 12
        expected = (vs.base
                    + vs.seasonal_amplitude * np.cos(2 * np.pi * (month_of_year - vs.seasonal_phase) / 12)
                    + vs.trend_per_year * years)
        for cell in range(spec.n_cells):
            series = cube.series("tmp", cell).astype(np.float64)
            np.testing.assert_allclose(series, expected, rtol=1e-6, atol=1e-5)

    def test_seasonal_phase_shifts_peak(self):
        cube = synth_generate(simple_spec(seasonal_phase=3.0))
        first_year = cube.series("tmp", 0)[:12]
        assert int(np.argmax(first_year)) == 3


class TestDeterminism:
    def test_same_seed_same_cube(self):
        spec = simple_spec(noise_sd=1.0, ar1=0.5)
        assert synth_generate(spec) == synth_generate(spec)

    def test_different_seed_differs(self):
        a = synth_generate(simple_spec(noise_sd=1.0))
        b_spec = SynthSpec(n_cells=4, n_years=45, seed=6,
                           variables={"tmp": VariableSynth(base=10.0, seasonal_amplitude=5.0,
                                                           seasonal_phase=6.0, noise_sd=1.0)})
        assert a != synth_generate(b_spec)


class TestPerCellStructure:
    def test_levels_cycle_by_cell_index(self):
        levels = (0.3, 0.1, -0.2)
        spec = SynthSpec(n_cells=7, n_years=45, seed=1,
                         variables={"tmp": VariableSynth(trend_levels=levels)})
        trends = cell_trends(spec, "tmp")
        assert list(trends) == [levels[i % 3] for i in range(7)]

    def test_ramp_is_symmetric(self):
        spec = SynthSpec(n_cells=5, n_years=45, seed=1,
                         variables={"tmp": VariableSynth(trend_per_year=0.1, trend_spread=0.05)})
        trends = cell_trends(spec, "tmp")
        assert trends[0] == pytest.approx(0.05)
        assert trends[-1] == pytest.approx(0.15)
        assert trends[2] == pytest.approx(0.1)

    def test_jitter_is_deterministic(self):
        spec = SynthSpec(n_cells=6, n_years=45, seed=9,
                         variables={"tmp": VariableSynth(seasonal_amplitude=4.0, amp_jitter_sd=0.5)})
        assert np.array_equal(cell_amplitudes(spec, "tmp"), cell_amplitudes(spec, "tmp"))
        assert not np.allclose(cell_amplitudes(spec, "tmp"), 4.0)

    def test_planted_trends_stored_on_meta(self):
        spec = simple_spec(trend_per_year=0.2)
        cube = synth_generate(spec)
        assert np.allclose(cube.meta["trend_per_year"]["tmp"], 0.2)


class TestValidation:
    def test_ar1_bounds(self):
        with pytest.raises(ValidationError):
            SynthSpec(n_cells=2, n_years=45, seed=0,
                      variables={"tmp": VariableSynth(ar1=1.0)}).validate()

    def test_unknown_variable(self):
        with pytest.raises(ValidationError):
            SynthSpec(n_cells=2, n_years=45, seed=0,
                      variables={"zzz": VariableSynth()}).validate()

    def test_needs_at_least_one_variable(self):
        with pytest.raises(ValidationError):
            SynthSpec(n_cells=2, n_years=45, seed=0, variables={}).validate()


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        spec = SynthSpec(n_cells=12, n_years=50, seed=3, variables={
            "tmp": VariableSynth(base=10.0, seasonal_amplitude=8.0, seasonal_phase=6.0,
                                 trend_levels=(0.3, -0.1), noise_sd=0.05),
            "pre": VariableSynth(base=60.0, seasonal_amplitude=20.0, trend_spread=1.5, ar1=0.3),
        })
        path = tmp_path / "synth.cfg"
        path.write_text(format_synth_config(spec))
        assert parse_synth_config(path) == spec

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "synth.cfg"
        path.write_text("[synth]\nn_cells = 2\nn_years = 45\n\n[variable.tmp]\nbogus = 1\n")
        with pytest.raises(ValidationError):
            parse_synth_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            parse_synth_config(tmp_path / "absent.cfg")
