"""
Tests for sweep post-processing: ordering checks, plot data and trends.
"""
import math

import pandas as pd
import pytest

from macsim.analysis import ENERGY_ORDER, check_ordering, emit_plot_data, kendall_trend, read_results
from macsim.errors import ConfigError

pytestmark = pytest.mark.harness


def results(medians, xs=(1.0, 10.0), seeds=(1, 2, 3), jitter=0.01):
    """Rows whose per-(protocol, x) median is medians[protocol], spread by +-jitter."""
    rows = []
    for name, median in medians.items():
        for x in xs:
            for k, seed in enumerate(seeds):
                rows.append({'protocol': name, 'interarrival_s': x, 'seed': seed,
                             'avg_node_energy_mj': median + (k - 1) * jitter})
    return pd.DataFrame(rows)


class TestCheckOrdering:
    """Tests for the per-x median chain check."""

    def test_pass(self):
        """Test that a chain respected at every x passes."""
        report = check_ordering(results({'xmac': 1.0, 'bmac': 2.0, 'smac': 3.0}), ['xmac', 'bmac', 'smac'])
        assert report.passed
        assert len(report.checks) == 4
        assert all(check.stable for check in report.checks)

    def test_fail_names_the_pair(self):
        """Test that a swapped pair is reported at each x where it is swapped."""
        report = check_ordering(results({'xmac': 2.0, 'bmac': 1.0}), ['xmac', 'bmac'])
        assert not report.passed
        assert [(v.lower, v.upper, v.x) for v in report.violations] == [
            ('xmac', 'bmac', 1.0), ('xmac', 'bmac', 10.0)]
        assert all(line.startswith('✗') for line in report.lines())

    def test_unstable_gap_flagged(self):
        """Test that an ordered gap inside the seed spread is marked but still passes."""
        report = check_ordering(results({'xmac': 1.0, 'bmac': 1.005}, jitter=0.1), ['xmac', 'bmac'])
        assert report.passed
        assert not report.checks[0].stable
        assert 'IQR' in report.lines()[0]

    def test_missing_protocol(self):
        """Test that a protocol with no rows is an error, not a pass."""
        with pytest.raises(ConfigError, match='wisemac'):
            check_ordering(results({'xmac': 1.0}), ['xmac', 'wisemac'])

    def test_needs_two_protocols(self):
        """Test that a one-element chain is rejected."""
        with pytest.raises(ConfigError):
            check_ordering(results({'xmac': 1.0}), ['xmac'])

    def test_unknown_metric(self):
        """Test that an absent metric column is rejected."""
        with pytest.raises(ConfigError, match='unknown column'):
            check_ordering(results({'xmac': 1.0, 'bmac': 2.0}), ['xmac', 'bmac'], metric='joules')

    def test_default_chain(self):
        """Test the default chain runs from cheapest to most expensive."""
        assert ENERGY_ORDER[0] == 'xmac'
        assert ENERGY_ORDER[-1] == 'smac'
        assert len(ENERGY_ORDER) == 7


class TestPlotData:
    """Tests for the long-format summary."""

    def test_columns_and_values(self):
        """Test median, min and max per group and x."""
        summary = emit_plot_data(results({'bmac': 2.0}), 'interarrival_s', 'avg_node_energy_mj')
        assert list(summary.columns) == ['group', 'x', 'median', 'min', 'max']
        assert len(summary) == 2
        first = summary.iloc[0]
        assert first['median'] == pytest.approx(2.0)
        assert first['min'] == pytest.approx(1.99)
        assert first['max'] == pytest.approx(2.01)

    def test_unknown_column(self):
        """Test that a missing column is a clear error."""
        with pytest.raises(ConfigError):
            emit_plot_data(results({'bmac': 2.0}), 'ta_ms', 'avg_node_energy_mj')


class TestKendallTrend:
    """Tests for the rank trend statistic."""

    def test_increasing(self):
        """Test a strictly increasing trend."""
        frame = pd.DataFrame({'ta_ms': [5, 10, 20, 40], 'energy': [1.0, 2.0, 3.0, 4.0]})
        assert kendall_trend(frame, 'ta_ms', 'energy') == pytest.approx(1.0)

    def test_decreasing(self):
        """Test a strictly decreasing trend."""
        frame = pd.DataFrame({'ta_ms': [5, 10, 20], 'energy': [3.0, 2.0, 1.0]})
        assert kendall_trend(frame, 'ta_ms', 'energy') == pytest.approx(-1.0)

    def test_single_x_is_nan(self):
        """Test that one x value has no trend."""
        frame = pd.DataFrame({'ta_ms': [5, 5], 'energy': [1.0, 2.0]})
        assert math.isnan(kendall_trend(frame, 'ta_ms', 'energy'))


class TestReadResults:
    """Tests for CSV input."""

    def test_missing_file(self, tmp_path):
        """Test that a missing CSV is a configuration error."""
        with pytest.raises(ConfigError):
            read_results(tmp_path / 'missing.csv')

    def test_empty_file(self, tmp_path):
        """Test that an empty CSV is a configuration error."""
        path = tmp_path / 'empty.csv'
        path.write_text('')
        with pytest.raises(ConfigError):
            read_results(path)
