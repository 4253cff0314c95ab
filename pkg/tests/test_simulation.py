from collections import Counter

import pytest

from app.constants import CLIENT, CLIENT_TO_SERVER, EVENT_ATTACK, EVENT_FAST_RETRANSMIT, SERVER_TO_CLIENT
from app.services.import_export import ImportExportService
from app.services.rttp import RttpGateway
from app.services.simkernel import SimulationError
from app.services.simulation_service import SimulationService, TunnelSimulation
from app.services.tcp_model import TcpModelService


@pytest.fixture
def ack_attack(make_cfg):
    return make_cfg(
        name='ackdup', anti_replay_window=0, tcp_initial_cwnd=32, tcp_initial_ssthresh=32,
        adversary='ack_duplicator', adversary_period=500_000,
    )


class TestBaselineRun:
    def test_conservation_and_no_drops(self, make_cfg):
        metrics = SimulationService.run_scenario(make_cfg())
        assert metrics.conservation_ok
        assert metrics.legit_drops == 0
        assert metrics.fast_retransmits == 0
        assert metrics.rto_count == 0
        assert metrics.segments_acked > 0
        assert metrics.elapsed_us == metrics.duration_us

    def test_receiver_window_caps_throughput(self, make_cfg):
        metrics = SimulationService.run_scenario(make_cfg(tcp_receiver_window=16))
        # 16 segments per 100ms round trip, a little less while slow start runs
        assert metrics.max_cwnd == 16
        assert metrics.throughput_Bps <= 160_000

    def test_finite_transfer_stops_clock(self, make_cfg):
        metrics = SimulationService.run_scenario(make_cfg(transfer_segments=200))
        assert metrics.segments_acked == 200
        assert metrics.elapsed_us < metrics.duration_us
        assert metrics.throughput_Bps == pytest.approx(200 * 1000 * 1_000_000 / metrics.elapsed_us)

    def test_scripted_drop_causes_fast_retransmit(self, make_cfg):
        metrics = SimulationService.run_scenario(make_cfg(scripted_drops=[100]))
        assert metrics.scripted_drops_applied == 1
        assert metrics.fast_retransmits == 1
        assert metrics.retransmissions >= 1
        assert metrics.conservation_ok


class TestAttackRuns:
    def test_ack_duplication_without_replay_protection(self, ack_attack):
        metrics = SimulationService.run_scenario(ack_attack, 'summary')
        assert metrics.strikes >= 5
        assert metrics.injections_accepted > 0
        assert metrics.fast_retransmits >= 1
        assert metrics.epoch_samples
        assert metrics.budget_sound
        assert metrics.provenance_ok
        assert any(row.event == EVENT_ATTACK for row in metrics.trace)
        assert any(row.event == EVENT_FAST_RETRANSMIT for row in metrics.trace)

    def test_replay_window_rejects_copies(self, ack_attack):
        metrics = SimulationService.run_scenario(ack_attack.model_copy(update={'anti_replay_window': 64}))
        assert metrics.injections_total > 0
        assert metrics.injections_accepted == 0
        assert metrics.fast_retransmits == 0
        assert metrics.legit_drops == 0

    def test_window_decreases_across_epochs(self, ack_attack):
        samples = SimulationService.run_scenario(ack_attack).epoch_samples
        assert samples[-1].cwnd < samples[0].cwnd
        assert [s.index for s in samples] == list(range(len(samples)))


class TestDeterminism:
    @pytest.mark.parametrize('overrides', [
        {},
        {'adversary': 'data_duplicator', 'adversary_stale': True, 'adversary_period': 300_000,
         'anti_replay_window': 0, 'seed': 11},
    ])
    def test_identical_outputs(self, make_cfg, overrides):
        cfg = make_cfg(**overrides)
        first = SimulationService.run_scenario(cfg, 'full')
        second = SimulationService.run_scenario(cfg, 'full')
        for fmt in ('csv', 'json'):
            assert ImportExportService.emit_trace(first, fmt) == ImportExportService.emit_trace(second, fmt)

    def test_trace_level_does_not_change_metrics(self, ack_attack):
        quiet = SimulationService.run_scenario(ack_attack, 'off')
        full = SimulationService.run_scenario(ack_attack, 'full')
        assert quiet.trace == []
        assert len(full.trace) > 0
        assert quiet.summary() == full.summary()

    def test_unknown_trace_level(self, make_cfg):
        with pytest.raises(ValueError, match="unknown trace level"):
            TunnelSimulation(make_cfg(), 'verbose')


class TestRttpInRun:
    def test_transparent_without_attack(self, make_cfg):
        plain = SimulationService.run_scenario(make_cfg(tcp_receiver_window=32), 'full')
        guarded = SimulationService.run_scenario(make_cfg(tcp_receiver_window=32, rttp='aggressive'), 'full')
        assert ImportExportService.emit_trace(plain, 'csv') == ImportExportService.emit_trace(guarded, 'csv')
        assert guarded.throughput_Bps == plain.throughput_Bps
        assert guarded.rttp_holds == 0
        assert guarded.rttp_typical_delay_us > 0

    def test_genuine_loss_still_recovers(self, make_cfg):
        metrics = SimulationService.run_scenario(
            make_cfg(tcp_receiver_window=32, rttp='aggressive', scripted_drops=[150])
        )
        assert metrics.fast_retransmits == 1
        assert metrics.rttp_holds == 0


class TestCrossTraffic:
    def test_cross_traffic_stops_at_gateway(self, make_cfg):
        plain = SimulationService.run_scenario(make_cfg(tcp_receiver_window=16, duration=2_000_000))
        metrics = SimulationService.run_scenario(
            make_cfg(tcp_receiver_window=16, duration=2_000_000, cross_traffic_rate=1000)
        )
        assert metrics.cross_traffic_sent == 2000
        assert metrics.cross_traffic_dropped == 0
        # the last ~49ms of ticks are still on the wire
        assert metrics.cross_traffic_sent - 50 <= metrics.cross_traffic_delivered < metrics.cross_traffic_sent
        assert metrics.conservation_ok
        assert metrics.legit_drops == 0
        assert metrics.segments_acked == pytest.approx(plain.segments_acked, rel=0.05)

    @pytest.mark.parametrize('policy', ['single', 'per_flow'])
    def test_every_packet_is_stamped_by_its_gateway(self, make_cfg, mocker, policy):
        stamp = mocker.spy(RttpGateway, 'stamp_outgoing')
        simulation = TunnelSimulation(make_cfg(tcp_receiver_window=8, duration=1_000_000,
                                               cross_traffic_rate=500, sa_policy=policy))
        metrics = simulation.run()

        directions = Counter(call.args[1] for call in stamp.call_args_list)
        # only segments still on the server LAN at the end are unstamped
        unstamped = metrics.transmissions + metrics.cross_traffic_sent - directions[SERVER_TO_CLIENT]
        assert 0 <= unstamped <= 8
        assert directions[CLIENT_TO_SERVER] > 0
        assert all(call.args[0] is simulation.sa_table for call in stamp.call_args_list)
        assert metrics.sa_policy == policy


class TestFailures:
    def test_handler_error_carries_event(self, make_cfg, mocker):
        mocker.patch.object(TcpModelService, 'receiver_on_segment', side_effect=RuntimeError('boom'))
        with pytest.raises(SimulationError) as excinfo:
            SimulationService.run_scenario(make_cfg())
        assert excinfo.value.event.target == CLIENT
        assert "handler failed: boom" in str(excinfo.value)
        assert f"-> {CLIENT}" in str(excinfo.value)
