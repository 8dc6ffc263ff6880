"""Per-UE data plane: buffering, segmentation, HARQ and in-order release."""

import numpy as np
import pytest

from ranemu.config import BufferConfig, Direction, HarqConfig
from ranemu.traffic import PacketRecord, Verdict
from ranemu.ue import (UeFlow, nack_probability, release_deadline_ms)


class FixedBler:
    """bler() ignores the channel and returns one constant."""

    def __init__(self, value: float):
        self.value = value

    def bler(self, mcs, sinr_db):
        return self.value


class ScriptRng:
    """uniform() pops pre-scripted draws; raises when overdrawn."""

    def __init__(self, draws):
        self.draws = list(draws)

    def uniform(self):
        if not self.draws:
            raise AssertionError("HARQ drew more randomness than scripted")
        return self.draws.pop(0)


def _pkt(pid, size=12_000, arrival=0.0, handle=None):
    return PacketRecord(packet_id=pid, ue_id=1, direction=Direction.DL,
                        size_bits=size, arrival_time_ms=arrival,
                        prev_packet_id=pid - 1 if pid > 0 else None,
                        handle=handle)


def _flow(bler=0.0, rng=None, r=0.5, max_retx=4, rtt=8, proc=3.0,
          slot=0.5, capacity=3_000_000, verdict_cb=None):
    harq = HarqConfig(error_reduction_factor=r, max_retransmissions=max_retx,
                      rtt_slots=rtt, processing_delay_ms=proc)
    return UeFlow(1, Direction.DL, harq, BufferConfig(capacity), slot,
                  FixedBler(bler), rng or np.random.default_rng(0),
                  verdict_cb)


# -- HARQ formulas ----------------------------------------------------------------

def test_nack_probability_values():
    assert nack_probability(0.1, 0.5, 1) == pytest.approx(0.05)
    # (1 - 0.9^2) * 0.5^2
    assert nack_probability(0.1, 0.5, 2) == pytest.approx(0.0475)
    assert nack_probability(0.0, 0.5, 3) == 0.0
    assert nack_probability(1.0, 1.0, 5) == 1.0


def test_nack_probability_rejects_zero_attempts():
    with pytest.raises(ValueError):
        nack_probability(0.1, 0.5, 0)


def test_release_deadline_values():
    assert release_deadline_ms(0.0, 0.5, 3.0, 8, 1) == pytest.approx(3.5)
    assert release_deadline_ms(0.0, 0.5, 3.0, 8, 2) == pytest.approx(7.5)
    assert release_deadline_ms(0.0, 1.0, 0.0, 8, 1) == pytest.approx(1.0)


# -- scheduling requests -------------------------------------------------------------

def test_scheduling_request_empty_flow():
    flow = _flow()
    assert flow.scheduling_request_bits() == 0
    assert flow.hol_wait_ms(5.0) == 0.0
    assert flow.sched_inputs(5.0) == (0, 0.0)


def test_scheduling_request_counts_queued_bits():
    flow = _flow()
    flow.ingest(_pkt(0))
    assert flow.scheduling_request_bits() == 12_000


def test_scheduling_request_includes_pending_retransmissions():
    # 12000-bit packet; 3000 ACKed in flight, 2000 awaiting retransmission:
    # the request covers the 7000 still queued plus the 2000 to resend
    flow = _flow(bler=0.5, rng=ScriptRng([0.9, 0.0]))
    flow.ingest(_pkt(0, arrival=0.0))
    flow.serve_grant(3000, 0.0, 10.0, 5)
    flow.serve_grant(2000, 0.0, 10.0, 5)
    nacked = flow.harq_evaluate(0.0)
    assert [b.size_bits for b in nacked] == [2000]
    flow.requeue(nacked, 0.0)
    assert flow.scheduling_request_bits() == 9_000
    assert flow.hol_wait_ms(4.0) == pytest.approx(4.0)
    assert flow.sched_inputs(4.0) == (9_000, pytest.approx(4.0))


# -- segmentation ---------------------------------------------------------------------

def test_packet_spans_grants_and_surplus_is_discarded():
    flow = _flow(bler=1.0, r=1.0, rng=ScriptRng([0.5, 0.5, 0.5]))
    flow.ingest(_pkt(0))
    for _ in range(3):
        flow.serve_grant(5000, 0.0, 10.0, 5)
    assert flow.counters.queued_bits == 0
    assert flow.counters.in_flight_bits == 12_000
    blocks = flow.harq_evaluate(0.0)
    assert [b.size_bits for b in blocks] == [5000, 5000, 2000]
    # the 3000 surplus bits of the third grant created no block


def test_grant_larger_than_buffer_makes_single_block():
    flow = _flow(bler=1.0, r=1.0, rng=ScriptRng([0.5]))
    flow.ingest(_pkt(0))
    flow.serve_grant(20_000, 0.0, 10.0, 5)
    blocks = flow.harq_evaluate(0.0)
    assert [b.size_bits for b in blocks] == [12_000]


def test_one_grant_may_carry_several_packets():
    flow = _flow(bler=1.0, r=1.0, rng=ScriptRng([0.5]))
    flow.ingest(_pkt(0, size=4000))
    flow.ingest(_pkt(1, size=4000))
    flow.serve_grant(8000, 0.0, 10.0, 5)
    blocks = flow.harq_evaluate(0.0)
    assert [b.size_bits for b in blocks] == [8000]
    assert len(blocks[0].fragments) == 2


def test_grant_with_empty_buffer_is_a_noop():
    flow = _flow()
    flow.serve_grant(5000, 0.0, 10.0, 5)
    assert flow.harq_evaluate(0.0) == []
    assert flow.counters.in_flight_bits == 0


def test_retransmission_served_before_new_data():
    flow = _flow(bler=0.5, rng=ScriptRng([0.0, 0.9]))
    flow.ingest(_pkt(0, size=2000, arrival=0.0))
    flow.serve_grant(2000, 0.0, 10.0, 5)
    flow.requeue(flow.harq_evaluate(0.0), 0.0)   # NACK, parked until 4.0
    flow.ingest(_pkt(1, size=2000, arrival=1.0))
    queued_before = flow.counters.queued_bits
    flow.serve_grant(2000, 4.0, 10.0, 5)
    # the grant went to the retransmission; the new packet is untouched
    assert flow.counters.queued_bits == queued_before
    assert flow.pending_retx_count() == 0
    assert flow.harq_evaluate(4.0) == []   # ACKed this time


def test_parked_retransmission_waits_for_harq_round_trip():
    flow = _flow(bler=0.5, rng=ScriptRng([0.0, 0.9]))
    flow.ingest(_pkt(0, size=2000, arrival=0.0))
    flow.serve_grant(2000, 0.0, 10.0, 5)
    flow.requeue(flow.harq_evaluate(0.0), 0.0)
    flow.ingest(_pkt(1, size=2000, arrival=1.0))
    # rtt is 8 slots * 0.5 ms = 4 ms; at t=2 the block is not yet eligible,
    # so the grant falls through to new data
    flow.serve_grant(2000, 2.0, 10.0, 5)
    assert flow.counters.queued_bits == 0
    assert flow.pending_retx_count() == 1


# -- release --------------------------------------------------------------------------

def test_release_waits_for_processing_deadline():
    flow = _flow(bler=0.0)
    flow.ingest(_pkt(0, arrival=0.0))
    flow.serve_grant(12_000, 0.0, 10.0, 5)
    flow.harq_evaluate(0.0)
    flow.release_ready(3.0)
    assert flow.counters.released_bits == 0
    flow.release_ready(3.5)
    assert flow.counters.released_bits == 12_000
    assert flow.tick.latencies_ms == [pytest.approx(3.5)]


def test_release_is_in_arrival_order():
    order = []
    flow = _flow(bler=0.5, rng=ScriptRng([0.0, 0.9, 0.9]),
                 verdict_cb=lambda h, v: order.append((h, v)))
    flow.ingest(_pkt(0, arrival=0.0, handle=0))
    flow.ingest(_pkt(1, arrival=0.0, handle=1))
    flow.serve_grant(12_000, 0.0, 10.0, 5)      # packet 0
    flow.serve_grant(12_000, 0.0, 10.0, 5)      # packet 1
    flow.requeue(flow.harq_evaluate(0.0), 0.0)  # packet 0 NACKed
    flow.release_ready(10.0)
    assert flow.counters.released_bits == 0     # packet 1 held behind 0
    flow.serve_grant(12_000, 4.0, 10.0, 5)      # retransmission
    flow.harq_evaluate(4.0)                     # ACK
    flow.release_ready(20.0)
    assert [h for h, v in order if v is Verdict.RELEASE] == [0, 1]
    assert flow.counters.released_packets == 2


def test_completed_packet_releases_once_dead_predecessor_clears():
    order = []
    flow = _flow(bler=0.5, max_retx=0, rng=ScriptRng([0.0, 0.9]),
                 verdict_cb=lambda h, v: order.append((h, v)))
    flow.ingest(_pkt(0, arrival=0.0, handle=7))
    flow.ingest(_pkt(1, arrival=0.0, handle=8))
    flow.serve_grant(12_000, 0.0, 10.0, 5)
    flow.serve_grant(12_000, 0.0, 10.0, 5)
    flow.harq_evaluate(0.0)   # packet 7 exhausts its only attempt, dropped
    flow.release_ready(3.5)
    assert order == [(7, Verdict.DROP), (8, Verdict.RELEASE)]
    assert flow.counters.dropped_packets == 1
    assert flow.counters.released_packets == 1


def test_split_packet_releases_at_latest_fragment_deadline():
    flow = _flow(bler=0.0)
    flow.ingest(_pkt(0, arrival=0.0))
    flow.serve_grant(6000, 0.0, 10.0, 5)
    flow.harq_evaluate(0.0)      # first fragment ready at 3.5
    flow.serve_grant(6000, 2.0, 10.0, 5)
    flow.harq_evaluate(2.0)      # second fragment ready at 5.5
    flow.release_ready(3.5)
    assert flow.counters.released_bits == 0
    flow.release_ready(5.5)
    assert flow.counters.released_bits == 12_000
    assert flow.tick.latencies_ms == [pytest.approx(5.5)]


# -- drops ----------------------------------------------------------------------------

def test_buffer_overflow_drops_tail():
    drops = []
    flow = _flow(capacity=30_000,
                 verdict_cb=lambda h, v: drops.append((h, v)))
    assert flow.ingest(_pkt(0, handle=0))
    assert flow.ingest(_pkt(1, handle=1))
    assert not flow.ingest(_pkt(2, handle=2))
    assert flow.counters.queued_bits == 24_000
    assert flow.counters.dropped_bits == 12_000
    assert flow.tick.dropped_bits == 12_000
    assert drops == [(2, Verdict.DROP)]
    flow.counters.check()


def test_certain_failure_exhausts_exactly_max_retransmissions():
    flow = _flow(bler=1.0, r=1.0, max_retx=4)
    flow.ingest(_pkt(0, arrival=0.0))
    flow.serve_grant(12_000, 0.0, 10.0, 5)
    transmissions = 1
    now = 0.0
    for _ in range(10):
        nacked = flow.harq_evaluate(now)
        if not nacked:
            break
        flow.requeue(nacked, now)
        now += 4.0
        flow.serve_grant(12_000, now, 10.0, 5)
        transmissions += 1
    assert transmissions == 5     # first attempt + 4 retransmissions
    assert flow.counters.dropped_packets == 1
    assert flow.counters.dropped_bits == 12_000
    assert flow.counters.queued_bits == 0
    assert flow.counters.in_flight_bits == 0
    flow.counters.check()


def test_attempt_counter_starts_at_one():
    flow = _flow(bler=0.5, rng=ScriptRng([0.0]))
    flow.ingest(_pkt(0))
    flow.serve_grant(12_000, 0.0, 10.0, 5)
    nacked = flow.harq_evaluate(0.0)
    # the failed attempt was number 1; the block is armed for attempt 2
    assert nacked[0].n_tx == 2


def test_bler_frozen_at_first_transmission():
    flow = _flow(bler=0.3, rng=ScriptRng([0.0, 0.9]))
    flow.ingest(_pkt(0))
    flow.serve_grant(12_000, 0.0, 10.0, 5)
    nacked = flow.harq_evaluate(0.0)
    flow.bler_table.value = 0.99   # later channel state must not matter
    flow.requeue(nacked, 0.0)
    flow.serve_grant(12_000, 4.0, 10.0, 5)
    assert nacked[0].bler == 0.3


# -- conservation fuzz -----------------------------------------------------------------

def test_conservation_holds_under_random_load():
    rng = np.random.default_rng(2024)
    order = []
    flow = _flow(bler=0.2, rng=np.random.default_rng(1), max_retx=2,
                 capacity=120_000,
                 verdict_cb=lambda h, v: order.append((h, v)))
    pid = 0
    for tick in range(600):
        now = float(tick)
        for _ in range(int(rng.integers(0, 3))):
            flow.ingest(_pkt(pid, size=int(rng.integers(500, 20_000)),
                             arrival=now, handle=pid))
            pid += 1
        flow.serve_grant(int(rng.integers(0, 30_000)), now, 10.0, 5)
        flow.requeue(flow.harq_evaluate(now), now)
        flow.release_ready(now)
        flow.counters.check()
    released = [h for h, v in order if v is Verdict.RELEASE]
    assert released == sorted(released)
    assert len(order) == len(set(h for h, _ in order))
    c = flow.counters
    assert (c.released_packets + c.dropped_packets
            == len(order))


def test_begin_tick_resets_per_tick_stats():
    flow = _flow(bler=0.0)
    flow.ingest(_pkt(0, arrival=0.0))
    flow.serve_grant(12_000, 0.0, 10.0, 5)
    flow.harq_evaluate(0.0)
    flow.release_ready(3.5)
    assert flow.tick.released_bits == 12_000
    flow.begin_tick()
    assert flow.tick.released_bits == 0
    assert flow.tick.latencies_ms == []
