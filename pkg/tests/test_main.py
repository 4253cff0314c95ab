import json

import pandas as pd
import pytest
from click.testing import CliRunner

from app import __version__
from app.config import Config
from app.main import EXIT_USAGE, cli


@pytest.fixture(autouse=True)
def no_console_logging(mocker):
    return mocker.patch('app.main.setup_logger')


@pytest.fixture
def runner():
    return CliRunner()


class TestPredict:
    def test_window_sizing(self, runner):
        result = runner.invoke(cli, ['predict', '--R', '10MBps', '--dprop', '1s', '--L', '1000B'])
        assert result.exit_code == 0
        assert "required_window_size: 10000 packets" in result.output

    def test_steady_state(self, runner):
        result = runner.invoke(cli, ['predict', '--T', '100ms', '--rtt', '100ms', '--cwnd0', '64'])
        assert result.exit_code == 0
        assert "steady_state_cwnd_max: 2 MSS" in result.output
        assert "steady_state_throughput: 15000 B/s" in result.output
        assert "epochs_to_steady_state: 5" in result.output
        assert "epoch_period: 100ms" in result.output

    def test_outside_domain_is_reported(self, runner):
        result = runner.invoke(cli, ['predict', '--T', '100ms', '--rtt', '100ms', '--cwnd0', '5'])
        assert result.exit_code == 0
        assert "epochs_to_steady_state: untestable" in result.output

    def test_rto_feasibility(self, runner):
        result = runner.invoke(cli, ['predict', '--cwnd0', '20', '--W', '8'])
        assert "rto_feasible: true" in result.output

    def test_nothing_to_predict(self, runner):
        result = runner.invoke(cli, ['predict'])
        assert result.exit_code == EXIT_USAGE

    def test_bad_unit(self, runner):
        result = runner.invoke(cli, ['predict', '--T', '100', '--rtt', '100ms'])
        assert result.exit_code == EXIT_USAGE
        assert "needs a unit" in result.output


class TestRunAndCompare:
    def test_run_writes_outputs(self, runner, scenario_dir):
        trace, summary = scenario_dir / 'trace.csv', scenario_dir / 'summary.json'
        result = runner.invoke(cli, ['run', str(scenario_dir / 'ackdup.scn'),
                                     '--trace', str(trace), '--summary', str(summary),
                                     '--trace-level', 'full'])
        assert result.exit_code in (0, 1)
        assert "comparison for ackdup" in result.output

        frame = pd.read_csv(trace)
        assert list(frame.columns) == ['time_us', 'cwnd_mss_fixedpoint', 'phase', 'event']
        assert len(frame) > 0
        document = json.loads(summary.read_text())
        assert document['metrics']['scenario'] == 'ackdup'
        assert document['comparison']['rows']

        compared = runner.invoke(cli, ['compare', str(summary), str(scenario_dir / 'ackdup.scn')])
        assert compared.exit_code in (0, 1)
        assert "comparison for ackdup" in compared.output

    def test_parse_error_exits_with_usage(self, runner, tmp_path):
        path = tmp_path / 'broken.scn'
        path.write_text("rtt = 100\nwhatever = 1\n")
        result = runner.invoke(cli, ['run', str(path)])
        assert result.exit_code == EXIT_USAGE
        assert "line 1: rtt:" in result.output
        assert "line 2: whatever: unknown key" in result.output

    def test_run_writes_audit_trail(self, runner, scenario_dir):
        audit = scenario_dir / 'out' / 'audit.json'
        result = runner.invoke(cli, ['run', str(scenario_dir / 'ackdup.scn'), '--audit', str(audit)])
        assert result.exit_code in (0, 1)
        document = json.loads(audit.read_text())
        assert document['scenario'] == 'ackdup'
        kinds = {entry['event_type'] for entry in document['entries']}
        assert {'Run Started', 'Attack Strike', 'Run Finished'} <= kinds

    def test_invalid_trace_level_from_environment(self, runner, scenario_dir, mocker):
        mocker.patch.object(Config, 'TRACE_LEVEL', 'verbose')
        result = runner.invoke(cli, ['run', str(scenario_dir / 'base.scn')])
        assert result.exit_code == EXIT_USAGE
        assert "unknown trace level 'verbose'" in result.output

    def test_compare_rejects_bad_summary(self, runner, scenario_dir):
        bad = scenario_dir / 'bad.json'
        bad.write_text('[]')
        result = runner.invoke(cli, ['compare', str(bad), str(scenario_dir / 'base.scn')])
        assert result.exit_code == EXIT_USAGE


class TestSuite:
    def test_table_written(self, runner, scenario_dir):
        out = scenario_dir / 'table.csv'
        result = runner.invoke(cli, ['suite', str(scenario_dir), '--out', str(out), '--check-determinism'])
        assert result.exit_code in (0, 1)
        table = pd.read_csv(out)
        assert list(table['scenario']) == ['ackdup', 'base']
        assert set(table['deterministic']) == {'yes'}

    def test_missing_directory(self, runner, tmp_path):
        result = runner.invoke(cli, ['suite', str(tmp_path / 'nowhere')])
        assert result.exit_code == EXIT_USAGE


def test_version(runner):
    result = runner.invoke(cli, ['--version'])
    assert __version__ in result.output
