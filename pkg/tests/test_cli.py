"""
Tests for the macsim command line.
"""
from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner

from macsim.cli import cli
from tests.test_analysis import results

pytestmark = pytest.mark.harness

SMOKE = str(Path(__file__).resolve().parent.parent / 'configs' / 'smoke.yaml')


# Fixtures
@pytest.fixture
def runner():
    """Fixture providing a click test runner."""
    return CliRunner()


@pytest.fixture
def ordered_csv(tmp_path):
    """Fixture providing a results CSV where xmac < bmac at every x."""
    path = tmp_path / 'ordered.csv'
    results({'xmac': 1.0, 'bmac': 2.0}).to_csv(path, index=False)
    return path


class TestRun:
    """Tests for the run command."""

    def test_run_prints_metrics(self, runner):
        """Test that a run prints its row and finishes."""
        result = runner.invoke(cli, ['run', SMOKE, '--seed', '2'])
        assert result.exit_code == 0, result.output
        assert 'delivery_ratio' in result.output
        assert 'listen_mj' in result.output
        assert '✓ Done' in result.output

    def test_protocol_override(self, runner):
        """Test that --protocol replaces the config protocol."""
        result = runner.invoke(cli, ['run', SMOKE, '--protocol', 'xmac'])
        assert result.exit_code == 0, result.output
        assert 'macsim run: xmac, seed 1' in result.output

    def test_bad_config_exits_2(self, runner, tmp_path):
        """Test that a config error is one diagnostic line and exit code 2."""
        path = tmp_path / 'bad.yaml'
        path.write_text("sim:\n  duraton_s: 5\n")
        result = runner.invoke(cli, ['run', str(path)])
        assert result.exit_code == 2
        assert 'ConfigError' in result.output


class TestSweep:
    """Tests for the sweep command."""

    def test_sweep_writes_csv(self, runner, tmp_path):
        """Test that a sweep writes one row per protocol, value and seed."""
        out = tmp_path / 'sweep.csv'
        result = runner.invoke(cli, ['sweep', SMOKE, '--values', '2,4', '--seeds', '1',
                                     '--protocols', 'bmac,xmac', '--output', str(out)])
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out)
        assert len(frame) == 4
        assert list(frame['protocol']) == ['bmac', 'bmac', 'xmac', 'xmac']

    def test_bad_values(self, runner):
        """Test that a non-numeric value list is a usage error."""
        result = runner.invoke(cli, ['sweep', SMOKE, '--values', 'fast'])
        assert result.exit_code == 2
        assert 'comma-separated numbers' in result.output


class TestCheckOrdering:
    """Tests for the check-ordering exit codes."""

    def test_pass_exits_0(self, runner, ordered_csv):
        """Test PASS and exit code 0."""
        result = runner.invoke(cli, ['check-ordering', str(ordered_csv), '--expect', 'xmac,bmac'])
        assert result.exit_code == 0
        assert result.output.strip().endswith('PASS')

    def test_fail_exits_1(self, runner, ordered_csv):
        """Test FAIL, the violated pair and exit code 1."""
        result = runner.invoke(cli, ['check-ordering', str(ordered_csv), '--expect', 'bmac,xmac'])
        assert result.exit_code == 1
        assert 'violated: bmac < xmac' in result.output
        assert result.output.strip().endswith('FAIL')

    def test_missing_protocol_exits_2(self, runner, ordered_csv):
        """Test that the default chain on a two-protocol CSV is an error."""
        result = runner.invoke(cli, ['check-ordering', str(ordered_csv)])
        assert result.exit_code == 2


class TestPlotData:
    """Tests for the plot-data command."""

    def test_stdout(self, runner, ordered_csv):
        """Test that the summary goes to stdout as CSV."""
        result = runner.invoke(cli, ['plot-data', str(ordered_csv)])
        assert result.exit_code == 0
        lines = result.output.splitlines()
        assert lines[0] == 'group,x,median,min,max'
        assert len(lines) == 5

    def test_output_file(self, runner, ordered_csv, tmp_path):
        """Test that --output writes the summary file."""
        out = tmp_path / 'plot.csv'
        result = runner.invoke(cli, ['plot-data', str(ordered_csv), '--output', str(out)])
        assert result.exit_code == 0
        assert list(pd.read_csv(out).columns) == ['group', 'x', 'median', 'min', 'max']
