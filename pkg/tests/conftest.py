"""
Test configuration and fixtures for the simulator.
"""
import pytest

from app.config import Config
from app.constants import TCP_FLOW
from app.models.packets import EspPacket, Segment
from app.models.scenario import ScenarioConfig
from app.models.tcp import TcpReceiverState, TcpSenderState
from app.services.simkernel import EventQueue


@pytest.fixture(autouse=True)
def quiet_config(mocker):
    """Keep tests off the log directory and on the default trace level."""
    mocker.patch.object(Config, 'LOG_TO_FILE', False)
    mocker.patch.object(Config, 'TRACE_LEVEL', 'summary')


@pytest.fixture
def queue():
    return EventQueue()


@pytest.fixture
def sender():
    """Sender in slow start with a 400ms RTO and an unlimited transfer."""
    return TcpSenderState.initial(1, 64, rto_interval=400_000)


@pytest.fixture
def receiver():
    return TcpReceiverState()


@pytest.fixture
def make_cfg():
    """Factory for short scenarios; keyword arguments override the defaults."""
    def _make(**overrides) -> ScenarioConfig:
        values = {'name': 'test', 'duration': 5_000_000}
        values.update(overrides)
        return ScenarioConfig(**values)
    return _make


@pytest.fixture
def make_esp():
    """Factory for ESP packets carrying a data segment (or an ACK with ack=True)."""
    def _make(esp_seq: int, seq: int = 0, stamped_at: int = 0, ack: bool = False,
              sa_id: str = 'server_to_client:*', flow_id: str = TCP_FLOW) -> EspPacket:
        if ack:
            inner = Segment.ack(seq, stamped_at, 40, flow_id)
        else:
            inner = Segment.data(seq, stamped_at, 1000, flow_id)
        return EspPacket(esp_seq, inner, stamped_at, sa_id)
    return _make


@pytest.fixture
def scenario_dir(tmp_path):
    """A directory with a small baseline and a short ACK duplication attack."""
    (tmp_path / 'base.scn').write_text(
        "name = base\n"
        "duration = 3s\n"
        "anti_replay_window = auto\n"
        "tcp_receiver_window = 16\n"
    )
    (tmp_path / 'ackdup.scn').write_text(
        "# short ACK duplication run\n"
        "name = ackdup\n"
        "duration = 5s\n"
        "anti_replay_window = 0\n"
        "tcp_initial_cwnd = 32\n"
        "tcp_initial_ssthresh = 32\n"
        "adversary = ack_duplicator\n"
        "adversary_period = 500ms\n"
        "baseline_scenario = base\n"
    )
    return tmp_path
