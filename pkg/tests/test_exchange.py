# tests/test_exchange.py

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backend.errors import ConfigurationError, RangeError, ValidationError
from data.io import read_csv
from exchange.coherence import CoherenceTable, get_default_table, t2_at_cycle
from exchange.fitting import fit_exponential, fit_saturating
from exchange.models import (
    ExchangeModel,
    get_default_model,
    j_at_cycle,
    j_at_voltage,
    j_exponential,
    j_versus_cycle,
)

cycles_in_table = st.floats(min_value=0.0, max_value=1.0)


class TestExponential:

    def test_zero_offset(self):
        assert j_exponential(0.0, 1e6, 20.0) == pytest.approx(1e6)

    def test_doubling_point(self):
        assert j_exponential(20.0 * np.log(2), 1e6, 20.0) == pytest.approx(2e6)

    def test_log_linear(self):
        v = np.linspace(-40, 120, 9)
        second_diff = np.diff(np.log(j_exponential(v, 3e5, 17.0)), 2)
        assert np.allclose(second_diff, 0.0, atol=1e-12)

    def test_non_positive_scale_rejected(self):
        with pytest.raises(ValidationError):
            j_exponential(1.0, 1e6, 0.0)

    def test_fit_reproduces_barrier_fixture(self):
        df = read_csv("data/fixtures/exchange_vs_b3.csv", required_cols=["v_b3_mV", "J_Hz"])
        fit = fit_exponential(df.v_b3_mV, df.J_Hz)
        model = ExchangeModel.exponential(fit["J_0"], fit["v_0"])
        predicted = j_at_voltage(model, df.v_b3_mV.to_numpy())
        assert np.all(np.abs(predicted / df.J_Hz.to_numpy() - 1) < 0.15)

    def test_fit_ignores_non_positive_points(self):
        v = np.array([0.0, 10.0, 20.0, 30.0])
        j = np.array([0.0, 1e6 * np.exp(0.5), 1e6 * np.exp(1.0), 1e6 * np.exp(1.5)])
        fit = fit_exponential(v, j)
        assert fit["v_0"] == pytest.approx(20.0)
        assert fit["n_points"] == 3


class TestTableModel:

    def test_paper_knot(self):
        model = ExchangeModel.from_table([0.0, 0.9], [0.0, 33e6])
        assert j_at_cycle(model, 0.9) == pytest.approx(33e6)

    def test_knots_are_reproduced(self):
        model = get_default_model()
        for c, j in zip(model.params["c"], model.params["J_Hz"]):
            assert j_at_cycle(model, c) == pytest.approx(j, rel=1e-12, abs=1e-6)

    def test_out_of_hull(self):
        with pytest.raises(RangeError):
            j_at_cycle(get_default_model(), 1.05)
        with pytest.raises(RangeError):
            j_at_cycle(get_default_model(), -0.01)

    @given(cycles_in_table)
    @settings(max_examples=200, deadline=None)
    def test_never_negative_and_within_knots(self, c):
        model = get_default_model()
        j = j_at_cycle(model, c)
        knots = np.asarray(model.params["c"])
        values = np.asarray(model.params["J_Hz"])
        k = min(np.searchsorted(knots, c, side="right") - 1, len(knots) - 2)
        assert j >= 0
        assert min(values[k], values[k + 1]) - 1e-6 <= j <= max(values[k], values[k + 1]) + 1e-6

    def test_vectorized_frame(self):
        frame = j_versus_cycle(get_default_model(), np.linspace(0, 1, 11))
        assert list(frame.columns) == ["c", "J_Hz"]
        assert frame.J_Hz.iloc[9] == pytest.approx(33e6)

    def test_scaled(self):
        model = get_default_model().scaled(0.5)
        assert j_at_cycle(model, 0.9) == pytest.approx(16.5e6)

    def test_unsorted_knots_rejected(self):
        with pytest.raises(ValidationError):
            ExchangeModel.from_table([0.0, 0.5, 0.4], [0.0, 1.0, 2.0])

    def test_voltage_model_has_no_cycle_axis(self):
        with pytest.raises(ConfigurationError):
            j_at_cycle(ExchangeModel.exponential(1e6, 20.0), 0.5)


class TestSaturating:

    def test_asymptote(self):
        model = ExchangeModel.saturating(40e6, 0.95, 0.08)
        assert j_at_cycle(model, 50.0) == pytest.approx(40e6)

    @given(st.floats(min_value=-5, max_value=5), st.floats(min_value=0, max_value=2))
    @settings(max_examples=200, deadline=None)
    def test_monotone_and_bounded(self, c, dc):
        model = ExchangeModel.saturating(40e6, 0.95, 0.08)
        lo, hi = j_at_cycle(model, c), j_at_cycle(model, c + dc)
        assert lo <= hi <= 40e6

    def test_fit_saturation_fixture(self):
        df = read_csv("data/fixtures/exchange_saturation.csv", required_cols=["c", "J_Hz"])
        fit = fit_saturating(df.c, df.J_Hz)
        assert fit["J_max"] == pytest.approx(40e6, rel=0.1)
        assert fit["c_0"] == pytest.approx(0.95, abs=0.05)
        assert fit["w"] > 0


class TestCoherence:

    def test_knot_query(self):
        table = get_default_table()
        assert t2_at_cycle(table, 0.9, "Q2|Q5=0") == pytest.approx(0.42)
        assert t2_at_cycle(table, 0.0, "Q5|Q2=1") == pytest.approx(7.1)

    @given(cycles_in_table, st.sampled_from(["Q2|Q5=0", "Q2|Q5=1", "Q5|Q2=0", "Q5|Q2=1"]))
    @settings(max_examples=200, deadline=None)
    def test_between_adjacent_knots(self, c, which):
        table = get_default_table()
        knots = np.asarray(table.c)
        values = np.asarray(table.t2_us[which])
        k = min(np.searchsorted(knots, c, side="right") - 1, len(knots) - 2)
        t2 = t2_at_cycle(table, c, which)
        assert min(values[k], values[k + 1]) - 1e-9 <= t2 <= max(values[k], values[k + 1]) + 1e-9

    def test_out_of_hull(self):
        with pytest.raises(RangeError):
            t2_at_cycle(get_default_table(), 1.2, "Q2|Q5=0")

    def test_unknown_trajectory(self):
        with pytest.raises(ConfigurationError):
            t2_at_cycle(get_default_table(), 0.5, "Q1|Q2=0")

    def test_non_positive_rejected(self):
        with pytest.raises(ValidationError):
            CoherenceTable((0.0, 1.0), {"Q2|Q5=0": (1.0, 0.0)})
