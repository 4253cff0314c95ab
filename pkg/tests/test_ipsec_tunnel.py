import random

import pytest

from app.constants import ACCEPT, CLIENT_TO_SERVER, ESP_SEQ_MAX, REJECT_DUPLICATE, REJECT_LEFT, SERVER_TO_CLIENT
from app.models.packets import Segment
from app.services.ipsec_tunnel import AntiReplayWindow, SaTable, SecurityAssociation, TunnelError


class SetOracle:
    """Brute-force reference: remembers every accepted sequence number."""

    def __init__(self, width):
        self.width = width
        self.right = 0
        self.accepted = set()

    def check(self, seq):
        if self.width == 0:
            return ACCEPT
        if seq > self.right:
            self.right = seq
            self.accepted.add(seq)
            return ACCEPT
        if self.right - seq >= self.width:
            return REJECT_LEFT
        if seq in self.accepted:
            return REJECT_DUPLICATE
        self.accepted.add(seq)
        return ACCEPT


def adversarial_sequence(rng, width, length):
    """Mostly increasing sequence numbers mixed with replays, left-edge lookups and jumps."""
    right = 1
    out = []
    for _ in range(length):
        roll = rng.random()
        if roll < 0.35:
            right += rng.randint(1, 3)
            seq = right
        elif roll < 0.5:
            seq = max(1, right - rng.randint(0, width + 2))
        elif roll < 0.65:
            seq = rng.choice(out) if out else right
        elif roll < 0.75:
            seq = max(1, right - width + rng.randint(-1, 1))
        elif roll < 0.8:
            right += rng.randint(width, 3 * width)
            seq = right
        else:
            seq = max(1, right + rng.randint(-width // 2, width // 2))
        out.append(seq)
    return out


class TestAntiReplayWindow:
    def test_in_order_accepted(self):
        window = AntiReplayWindow(4)
        assert [window.check(s) for s in range(1, 10)] == [ACCEPT] * 9
        assert window.right_edge == 9

    def test_duplicate_rejected(self):
        window = AntiReplayWindow(4)
        window.check(1)
        window.check(2)
        assert window.check(2) == REJECT_DUPLICATE
        assert window.check(1) == REJECT_DUPLICATE
        assert window.rejected_duplicate == 2

    def test_left_of_window_rejected(self):
        window = AntiReplayWindow(8)
        window.check(20)
        assert window.check(13) == ACCEPT
        assert window.check(12) == REJECT_LEFT
        assert window.left_edge == 13

    def test_reordering_within_window(self):
        window = AntiReplayWindow(8)
        for seq in [5, 3, 4, 1, 2]:
            assert window.check(seq) == ACCEPT

    def test_sped_up_copy_pushes_first_packet_out(self):
        window = AntiReplayWindow(8)
        assert window.check(9) == ACCEPT
        assert window.check(1) == REJECT_LEFT
        assert window.check(2) == ACCEPT
        assert window.check(9) == REJECT_DUPLICATE

    def test_large_jump_clears_history(self):
        window = AntiReplayWindow(4)
        for seq in range(1, 5):
            window.check(seq)
        window.check(1_000)
        assert window.check(999) == ACCEPT
        assert window.check(1_000) == REJECT_DUPLICATE

    def test_rejection_leaves_state_unchanged(self):
        window = AntiReplayWindow(4)
        window.check(10)
        before = (window.right_edge, window.seen)
        window.check(2)
        window.check(10)
        assert (window.right_edge, window.seen) == before

    def test_zero_width_accepts_everything(self):
        window = AntiReplayWindow(0)
        assert [window.check(s) for s in [5, 5, 1, 5]] == [ACCEPT] * 4

    def test_negative_width_invalid(self):
        with pytest.raises(ValueError):
            AntiReplayWindow(-1)

    def test_matches_set_oracle(self):
        rng = random.Random(20240611)
        decisions = 0
        while decisions < 100_000:
            width = rng.randint(1, 128)
            window, oracle = AntiReplayWindow(width), SetOracle(width)
            for seq in adversarial_sequence(rng, width, 200):
                assert window.check(seq) == oracle.check(seq), (width, seq)
                decisions += 1


class TestSecurityAssociation:
    def test_sequence_numbers_increase(self):
        sa = SecurityAssociation('sa', AntiReplayWindow(8))
        seqs = [sa.encapsulate(Segment.data(i, 0, 1000), i).esp_seq for i in range(3)]
        assert seqs == [1, 2, 3]

    def test_packet_keeps_timestamp_and_inner(self):
        sa = SecurityAssociation('sa', AntiReplayWindow(8))
        seg = Segment.data(7, 0, 1000)
        pkt = sa.encapsulate(seg, 1234)
        assert pkt.inner is seg
        assert pkt.stamped_at == 1234
        assert pkt.wire_size == 1000

    def test_sequence_exhaustion(self):
        sa = SecurityAssociation('sa', AntiReplayWindow(8), last_esp_seq=ESP_SEQ_MAX)
        with pytest.raises(TunnelError, match="exhausted"):
            sa.encapsulate(Segment.data(0, 0, 1000), 0)


class TestSaTable:
    def test_single_policy_shares_counter_across_flows(self):
        table = SaTable('single', 64)
        a = table.encapsulate(SERVER_TO_CLIENT, Segment.data(0, 0, 1000, flow_id='a'), 0)
        b = table.encapsulate(SERVER_TO_CLIENT, Segment.data(0, 0, 1000, flow_id='b'), 0)
        assert (a.esp_seq, b.esp_seq) == (1, 2)
        assert a.sa_id == b.sa_id

    def test_per_flow_policy_separates_counters(self):
        table = SaTable('per_flow', 64)
        a = table.encapsulate(SERVER_TO_CLIENT, Segment.data(0, 0, 1000, flow_id='a'), 0)
        b = table.encapsulate(SERVER_TO_CLIENT, Segment.data(0, 0, 1000, flow_id='b'), 0)
        assert (a.esp_seq, b.esp_seq) == (1, 1)
        assert a.sa_id != b.sa_id

    def test_directions_are_independent(self):
        table = SaTable('single', 64)
        data = table.encapsulate(SERVER_TO_CLIENT, Segment.data(0, 0, 1000), 0)
        ack = table.encapsulate(CLIENT_TO_SERVER, Segment.ack(1, 0, 40), 0)
        assert data.esp_seq == ack.esp_seq == 1
        assert table.check(SERVER_TO_CLIENT, data) == ACCEPT
        assert table.check(CLIENT_TO_SERVER, ack) == ACCEPT
        assert table.check(SERVER_TO_CLIENT, data) == REJECT_DUPLICATE

    def test_unknown_policy(self):
        with pytest.raises(ValueError, match="unknown sa_policy"):
            SaTable('per_host', 64)
