# app/constants.py

"""
Constants and static tables for the stealth tunnel simulator.
"""

# Virtual time is kept in integer microseconds
US_PER_SECOND = 1_000_000

# Fixed-point congestion window: 16 fractional bits
CWND_FRACTION_BITS = 16
CWND_ONE = 1 << CWND_FRACTION_BITS

# ESP sequence numbers live in a 32-bit space
ESP_SEQ_MAX = 2**32 - 1

RTO_BACKOFF_CAP = 64

# Endpoint identifiers of the tunnel topology
SERVER = 'server'
CLIENT = 'client'
GW_SERVER_SIDE = 'gw2'
GW_CLIENT_SIDE = 'gw1'
ADVERSARY = 'adversary'

# Flow identifiers: the measured TCP flow and the synthetic cross traffic
TCP_FLOW = 'flow0'
CROSS_FLOW = 'cross'

# TCP sender phases
SLOW_START = 'slow_start'
CONGESTION_AVOIDANCE = 'congestion_avoidance'
FAST_RECOVERY = 'fast_recovery'
TCP_PHASES = [SLOW_START, CONGESTION_AVOIDANCE, FAST_RECOVERY]

# Adversary strategies
STRATEGY_NONE = 'none'
ACK_DUPLICATOR = 'ack_duplicator'
DATA_DUPLICATOR = 'data_duplicator'
SPEEDUP_SINGLE = 'speedup_single'
SPEEDUP_MULTI = 'speedup_multi'
ADVERSARY_STRATEGIES = [
    STRATEGY_NONE,
    ACK_DUPLICATOR,
    DATA_DUPLICATOR,
    SPEEDUP_SINGLE,
    SPEEDUP_MULTI,
]

CLIENT_TO_SERVER = 'client_to_server'
SERVER_TO_CLIENT = 'server_to_client'
BOTH_DIRECTIONS = 'both'

# Anti-replay verdicts
ACCEPT = 'accept'
REJECT_LEFT = 'left_of_window'
REJECT_DUPLICATE = 'duplicate'

# Trace levels
TRACE_OFF = 'off'
TRACE_SUMMARY = 'summary'
TRACE_FULL = 'full'
TRACE_LEVELS = [TRACE_OFF, TRACE_SUMMARY, TRACE_FULL]

# Trace row event names
EVENT_ACK = 'ack'
EVENT_DUPACK = 'dupack'
EVENT_FAST_RETRANSMIT = 'fast_retransmit'
EVENT_RTO = 'rto'
EVENT_PHASE = 'phase_change'
EVENT_ATTACK = 'attack_epoch'

# Comparison row statuses
STATUS_PASS = 'pass'
STATUS_FAIL = 'fail'
STATUS_UNTESTABLE = 'untestable'
STATUS_INFO = 'info'

# Unit suffix tables for scenario files
DURATION_UNITS = {
    'us': 1,
    'ms': 1_000,
    's': US_PER_SECOND,
}

SIZE_UNITS = {
    'B': 1,
    'KB': 1_000,
    'MB': 1_000_000,
}

RATE_UNITS = {
    'Bps': 1,
    'B/s': 1,
    'KBps': 1_000,
    'MBps': 1_000_000,
    'GBps': 1_000_000_000,
}

# Number of consecutive epoch samples that must satisfy the steady-state
# condition pairwise before steady state is declared
STEADY_STATE_SAMPLES = 3
