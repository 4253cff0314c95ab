from fractions import Fraction

import pytest

from app.constants import (
    ACK_DUPLICATOR,
    CROSS_FLOW,
    DATA_DUPLICATOR,
    GW_CLIENT_SIDE,
    GW_SERVER_SIDE,
    SPEEDUP_MULTI,
    SPEEDUP_SINGLE,
    TCP_FLOW,
)
from app.services.adversary import AdversaryBudget, StealthAdversary
from app.services.audit_service import AuditService


def make_adversary(strategy, rho=Fraction(30), sigma=3, period=100_000, remaining=24_000,
                   window=64, speedup=12_000, **kwargs):
    budget = AdversaryBudget(rho, sigma)
    return StealthAdversary(strategy, budget, period, remaining, 1000, window,
                            speedup=speedup, **kwargs)


def burst(adversary, packets, now, toward=GW_CLIENT_SIDE):
    for pkt in packets:
        assert adversary.observe(pkt, toward, now) == []


class TestAdversaryBudget:
    def test_starts_full_and_refills_exactly(self):
        budget = AdversaryBudget(Fraction(30), 3)
        assert budget.admit(0, 3)
        assert not budget.admit(0, 1)
        assert budget.admit(100_000, 3)
        assert budget.granted == 6
        assert budget.denied == 1

    def test_tokens_capped_at_sigma(self):
        budget = AdversaryBudget(Fraction(30), 3)
        assert not budget.admit(10_000_000, 4)

    def test_float_rate_is_exact(self):
        budget = AdversaryBudget(0.3, 3)
        budget.admit(0, 3)
        assert not budget.admit(9_999_999, 3)
        assert budget.admit(10_000_000, 3)

    def test_request_must_be_positive(self):
        with pytest.raises(ValueError):
            AdversaryBudget(1, 3).admit(0, 0)


class TestAckDuplicator:
    def test_strike_copies_last_ack(self, make_esp):
        adversary = make_adversary(ACK_DUPLICATOR)
        ack = make_esp(5, seq=10, ack=True, sa_id='client_to_server:*')
        burst(adversary, [ack], 1_000, GW_SERVER_SIDE)

        assert adversary.flush_at == 1_000
        injections = adversary.flush(1_000)
        assert len(injections) == 3
        assert {i.packet for i in injections} == {ack}
        assert all(i.deliver_at == 25_000 and i.toward == GW_SERVER_SIDE for i in injections)
        assert adversary.next_epoch_due == 101_000
        assert adversary.epoch_index == 1

    def test_ignores_data_and_waits_for_next_epoch(self, make_esp):
        adversary = make_adversary(ACK_DUPLICATOR)
        burst(adversary, [make_esp(1, seq=0)], 0)
        assert adversary.flush_at is None

        burst(adversary, [make_esp(1, ack=True)], 0)
        adversary.flush(0)
        burst(adversary, [make_esp(2, ack=True)], 50_000)
        assert adversary.flush_at is None

    def test_opaque_mode_classifies_by_size(self, make_esp):
        adversary = make_adversary(ACK_DUPLICATOR, observability='opaque')
        assert adversary.looks_like_ack(make_esp(1, ack=True))
        assert not adversary.looks_like_ack(make_esp(2))

    def test_budget_denial_skips_epoch(self, make_esp):
        adversary = make_adversary(ACK_DUPLICATOR, rho=Fraction(1))
        burst(adversary, [make_esp(1, ack=True)], 0)
        assert len(adversary.flush(0)) == 3

        burst(adversary, [make_esp(2, ack=True)], 100_000)
        assert adversary.flush(100_000) == []
        assert adversary.epochs_skipped == 1
        assert adversary.next_epoch_due == 200_000

    def test_late_observation_flushes_open_gather(self, make_esp):
        adversary = make_adversary(ACK_DUPLICATOR)
        burst(adversary, [make_esp(1, ack=True)], 0)
        injections = adversary.observe(make_esp(2, ack=True), GW_SERVER_SIDE, 10)
        assert len(injections) == 3

    def test_injection_log_is_budget_sound(self, make_esp):
        adversary = make_adversary(ACK_DUPLICATOR)
        times = []
        for k in range(50):
            now = k * 20_000
            adversary.observe(make_esp(k + 1, ack=True), GW_SERVER_SIDE, now)
            if adversary.flush_at is not None:
                times += [now] * len(adversary.flush(now))
        assert times
        assert AuditService.check_budget_soundness(times, Fraction(30), 3)


class TestDataDuplicator:
    def test_copies_last_data_packet(self, make_esp):
        adversary = make_adversary(DATA_DUPLICATOR)
        packets = [make_esp(n, seq=n) for n in range(1, 4)]
        burst(adversary, packets, 0)
        injections = adversary.flush(0)
        assert [i.packet.esp_seq for i in injections] == [3, 3, 3]

    def test_stale_choice_is_seeded(self, make_esp):
        picks = []
        for _ in range(2):
            adversary = make_adversary(DATA_DUPLICATOR, stale=True, seed=7)
            burst(adversary, [make_esp(n, seq=n) for n in range(1, 30)], 0)
            picks.append(adversary.flush(0)[0].packet.esp_seq)
        assert picks[0] == picks[1]


class TestSpeedupMulti:
    def test_lead_copy_fast_rest_just_ahead_of_hole(self, make_esp):
        adversary = make_adversary(SPEEDUP_MULTI, slot=100)
        burst(adversary, [make_esp(n, seq=n) for n in range(1, 6)], 0)
        assert adversary.flush_at == 6_000

        injections = adversary.flush(6_000)
        assert [i.packet.esp_seq for i in injections] == [3, 4, 5]
        # hole (esp 1) arrives honestly at 24ms
        assert [i.deliver_at for i in injections] == [12_000, 23_800, 23_900]

    def test_copies_skip_cross_traffic(self, make_esp):
        adversary = make_adversary(SPEEDUP_MULTI, victim_flow=TCP_FLOW)
        packets = []
        for n in range(1, 9):
            flow = TCP_FLOW if n % 2 else CROSS_FLOW
            packets.append(make_esp(n, seq=n, flow_id=flow))
        burst(adversary, packets, 0)
        injections = adversary.flush(6_000)
        assert [i.packet.esp_seq for i in injections] == [3, 5, 7]

    def test_short_gather_has_no_target(self, make_esp):
        adversary = make_adversary(SPEEDUP_MULTI)
        burst(adversary, [make_esp(n, seq=n) for n in range(1, 4)], 0)
        assert adversary.flush(6_000) == []
        assert adversary.gathers_without_target == 1
        # epoch stays due
        burst(adversary, [make_esp(4, seq=4)], 7_000)
        assert adversary.flush_at == 13_000

    def test_speedup_must_leave_honest_delay(self):
        with pytest.raises(ValueError, match="speedup"):
            make_adversary(SPEEDUP_MULTI, speedup=24_000)


class TestSpeedupSingle:
    def test_targets_packet_window_ahead_then_follows_up(self, make_esp):
        adversary = make_adversary(SPEEDUP_SINGLE, window=8, rho=Fraction(10))
        burst(adversary, [make_esp(n, seq=n - 1) for n in range(1, 13)], 0)
        first = adversary.flush(6_000)
        assert [i.packet.esp_seq for i in first] == [9]
        assert not first[0].follow_up

        # the follow-up gather opens before the next epoch is due
        burst(adversary, [make_esp(n, seq=n - 1) for n in range(13, 25)], 50_000)
        follow = adversary.flush(56_000)
        assert [i.packet.esp_seq for i in follow] == [21]
        assert follow[0].follow_up
        assert adversary.epoch_index == 1
        assert adversary.strikes == 2

    def test_disabled_window_gives_no_target(self, make_esp):
        adversary = make_adversary(SPEEDUP_SINGLE, window=0)
        burst(adversary, [make_esp(n, seq=n) for n in range(1, 20)], 0)
        assert adversary.flush(6_000) == []

    def test_unknown_strategy(self):
        with pytest.raises(ValueError, match="unknown adversary strategy"):
            make_adversary('none')


class TestVictimFlow:
    def test_gather_opens_only_on_victim(self, make_esp):
        adversary = make_adversary(SPEEDUP_SINGLE, window=8, victim_flow=TCP_FLOW)
        burst(adversary, [make_esp(1, seq=0, flow_id=CROSS_FLOW)], 0)
        assert adversary.flush_at is None
        burst(adversary, [make_esp(2, seq=0)], 100)
        assert adversary.flush_at == 6_100

    def test_shared_sa_target_may_be_cross_traffic(self, make_esp):
        adversary = make_adversary(SPEEDUP_SINGLE, window=8, victim_flow=TCP_FLOW)
        adversary.observe(make_esp(1, seq=0), GW_CLIENT_SIDE, 0)
        for n in range(2, 10):
            adversary.observe(make_esp(n, seq=n, flow_id=CROSS_FLOW), GW_CLIENT_SIDE, (n - 1) * 250)

        injections = adversary.flush(6_000)
        assert [i.packet.esp_seq for i in injections] == [9]
        assert injections[0].packet.inner.flow_id == CROSS_FLOW
        assert injections[0].deliver_at == 2_000 + 12_000

    def test_separate_sa_leaves_no_target(self, make_esp):
        adversary = make_adversary(SPEEDUP_SINGLE, window=8, victim_flow=TCP_FLOW)
        adversary.observe(make_esp(1, seq=0, sa_id='server_to_client:flow0'), GW_CLIENT_SIDE, 0)
        for n in range(1, 9):
            cross = make_esp(n, seq=n, flow_id=CROSS_FLOW, sa_id='server_to_client:cross')
            adversary.observe(cross, GW_CLIENT_SIDE, n * 250)

        assert adversary.flush(6_000) == []
        assert adversary.gathers_without_target == 1

    def test_opaque_adversary_cannot_tell_flows_apart(self):
        adversary = make_adversary(SPEEDUP_SINGLE, victim_flow=TCP_FLOW, observability='opaque')
        assert adversary.victim_flow is None

    def test_slot_must_be_positive(self):
        with pytest.raises(ValueError, match="slot"):
            make_adversary(SPEEDUP_MULTI, slot=0)
