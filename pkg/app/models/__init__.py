"""
Models package for the simulator.
"""
from app.models.metrics import EpochSample, RunMetrics, TraceRow
from app.models.packets import EspPacket, Injection, Segment
from app.models.report import AttackParams, ComparisonReport, ComparisonRow
from app.models.scenario import ScenarioConfig
from app.models.tcp import PhaseChange, TcpReceiverState, TcpSenderState, Transmit

# Export the models
__all__ = [
    'AttackParams',
    'ComparisonReport',
    'ComparisonRow',
    'EpochSample',
    'EspPacket',
    'Injection',
    'PhaseChange',
    'RunMetrics',
    'ScenarioConfig',
    'Segment',
    'TcpReceiverState',
    'TcpSenderState',
    'TraceRow',
    'Transmit',
]
