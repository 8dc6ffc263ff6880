"""Per-UE data plane: IP buffer, segmentation, HARQ and in-order release.

Each UE runs one flow per direction.  Packets land in a drop-tail IP buffer,
are segmented into one transport block per grant (a packet may span blocks,
a new block never spans grants), and every block is resolved by a HARQ draw
at the end of its tick.  ACKed bits release their packets in arrival order
once the modeled processing deadline passes; a block that exhausts its
retransmissions kills every packet it carried.

Conservation holds exactly at every tick boundary:

    ingested == queued + in_flight + released + dropped
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import BufferConfig, Direction, HarqConfig
from .phy import BlerTable
from .traffic import PacketRecord, Verdict


class BlockState(enum.Enum):
    IN_FLIGHT = "in_flight"
    NACK_QUEUED = "nack_queued"
    RELEASED = "released"
    DROPPED = "dropped"


_NO_BLOCKS: list = []   # shared empty result; callers never mutate it


def nack_probability(bler: float, error_reduction_factor: float,
                     n_tx: int) -> float:
    """Probability the n_tx-th transmission of a block fails."""
    if n_tx < 1:
        raise ValueError("n_tx starts at 1")
    return (1.0 - (1.0 - bler) ** n_tx) * error_reduction_factor ** n_tx


def release_deadline_ms(now_ms: float, slot_duration_ms: float,
                        processing_delay_ms: float, rtt_slots: int,
                        n_tx: int) -> float:
    """Time the receiver finishes decoding a block ACKed at ``now_ms``."""
    return (now_ms + slot_duration_ms + processing_delay_ms
            + (n_tx - 1) * rtt_slots * slot_duration_ms)


@dataclass
class _Packet:
    """Buffer-side progress of one packet."""
    record: PacketRecord
    remaining_bits: int         # not yet segmented
    unacked_bits: int = 0       # segmented, fragment not yet ACKed
    ready_time_ms: float = 0.0  # latest fragment release deadline
    dead: bool = False

    @property
    def size_bits(self) -> int:
        return self.record.size_bits

    @property
    def finalized(self) -> bool:
        return self.dead or (self.remaining_bits == 0
                             and self.unacked_bits == 0)


@dataclass
class TransportBlock:
    __slots__ = ("block_id", "size_bits", "fragments", "n_tx", "mcs",
                 "first_sinr_db", "bler", "state", "eligible_at_ms",
                 "pending_retx_bits", "earliest_arrival_ms")
    block_id: int
    size_bits: int
    fragments: list            # [(packet, bits), ...]
    n_tx: int                  # attempt number, 1 on first transmission
    mcs: int
    first_sinr_db: float
    bler: float                # frozen at first transmission
    state: BlockState
    eligible_at_ms: float
    pending_retx_bits: int
    earliest_arrival_ms: float


@dataclass
class FlowCounters:
    ingested_bits: int = 0
    queued_bits: int = 0
    in_flight_bits: int = 0
    released_bits: int = 0
    dropped_bits: int = 0
    released_packets: int = 0
    dropped_packets: int = 0

    def check(self) -> None:
        total = (self.queued_bits + self.in_flight_bits
                 + self.released_bits + self.dropped_bits)
        if total != self.ingested_bits:
            raise AssertionError(
                f"conservation violated: ingested={self.ingested_bits} "
                f"queued={self.queued_bits} in_flight={self.in_flight_bits} "
                f"released={self.released_bits} dropped={self.dropped_bits}")


class TickStats:
    """Per-tick deltas for the metrics row; reset in place every tick."""

    __slots__ = ("granted_bits", "released_bits", "dropped_bits",
                 "latencies_ms")

    def __init__(self):
        self.granted_bits = 0
        self.released_bits = 0
        self.dropped_bits = 0
        self.latencies_ms: list = []

    def reset(self) -> None:
        self.granted_bits = 0
        self.released_bits = 0
        self.dropped_bits = 0
        self.latencies_ms.clear()


class UeFlow:
    """One direction of one UE's traffic through the stack."""

    def __init__(self, ue_id: int, direction: Direction, harq: HarqConfig,
                 buffer_cfg: BufferConfig, slot_duration_ms: float,
                 bler_table: BlerTable, rng: np.random.Generator,
                 verdict_cb: Optional[Callable[[object, Verdict], None]] = None):
        self.ue_id = ue_id
        self.direction = direction
        self.harq = harq
        self.capacity_bits = buffer_cfg.ip_capacity_bits
        self.slot_duration_ms = slot_duration_ms
        self.bler_table = bler_table
        self.rng = rng
        self.verdict_cb = verdict_cb
        self.counters = FlowCounters()
        self.tick = TickStats()
        self._release_queue: deque[_Packet] = deque()
        self._seg_queue: deque[_Packet] = deque()
        self._retx: deque[TransportBlock] = deque()
        self._sent_this_tick: list[TransportBlock] = []
        self._next_block_id = 0

    # -- ingest ------------------------------------------------------------

    def ingest(self, record: PacketRecord) -> bool:
        """Admit a packet, or drop-tail it when the buffer is full."""
        c = self.counters
        c.ingested_bits += record.size_bits
        if c.queued_bits + record.size_bits > self.capacity_bits:
            c.dropped_bits += record.size_bits
            c.dropped_packets += 1
            self.tick.dropped_bits += record.size_bits
            self._verdict(record, Verdict.DROP)
            return False
        c.queued_bits += record.size_bits
        pkt = _Packet(record=record, remaining_bits=record.size_bits)
        self._release_queue.append(pkt)
        self._seg_queue.append(pkt)
        return True

    # -- scheduler inputs ----------------------------------------------------

    def scheduling_request_bits(self) -> int:
        bits = self.counters.queued_bits
        if self._retx:
            for blk in self._retx:
                bits += blk.pending_retx_bits
        return bits

    def hol_wait_ms(self, now_ms: float) -> float:
        oldest = None
        if self._seg_queue:
            oldest = self._seg_queue[0].record.arrival_time_ms
        if self._retx:
            for blk in self._retx:
                if oldest is None or blk.earliest_arrival_ms < oldest:
                    oldest = blk.earliest_arrival_ms
        if oldest is None:
            return 0.0
        return max(now_ms - oldest, 0.0)

    def sched_inputs(self, now_ms: float) -> tuple[int, float]:
        """(scheduling_request_bits, hol_wait_ms) in a single call.

        The engine asks both of every flow on every tick; one fused walk
        over the retransmission list halves that bill.  Values match the
        two standalone methods exactly.
        """
        bits = self.counters.queued_bits
        oldest = None
        if self._seg_queue:
            oldest = self._seg_queue[0].record.arrival_time_ms
        if self._retx:
            for blk in self._retx:
                bits += blk.pending_retx_bits
                if oldest is None or blk.earliest_arrival_ms < oldest:
                    oldest = blk.earliest_arrival_ms
        if oldest is None:
            return bits, 0.0
        wait = now_ms - oldest
        return bits, (wait if wait > 0.0 else 0.0)

    # -- transmission --------------------------------------------------------

    def serve_grant(self, grant_bits: int, now_ms: float, sinr_db: float,
                    mcs: int) -> None:
        """Consume one grant: pending retransmissions first, then one new
        block segmented from the buffer head.

        A retransmission is allowed to span grants (ticks, even); without
        that escape a block built under a better channel than any later
        grant can carry would pin the flow forever.
        """
        remaining = int(grant_bits)
        idx = 0
        while remaining > 0 and idx < len(self._retx):
            blk = self._retx[idx]
            if blk.eligible_at_ms > now_ms:
                idx += 1
                continue
            take = min(remaining, blk.pending_retx_bits)
            blk.pending_retx_bits -= take
            remaining -= take
            if blk.pending_retx_bits == 0:
                del self._retx[idx]
                blk.state = BlockState.IN_FLIGHT
                self._sent_this_tick.append(blk)
            else:
                idx += 1
        if remaining <= 0 or not self._seg_queue:
            return
        fragments = []
        size = 0
        earliest = self._seg_queue[0].record.arrival_time_ms
        c = self.counters
        while remaining > 0 and self._seg_queue:
            pkt = self._seg_queue[0]
            take = min(remaining, pkt.remaining_bits)
            pkt.remaining_bits -= take
            pkt.unacked_bits += take
            c.queued_bits -= take
            c.in_flight_bits += take
            fragments.append((pkt, take))
            size += take
            remaining -= take
            earliest = min(earliest, pkt.record.arrival_time_ms)
            if pkt.remaining_bits == 0:
                self._seg_queue.popleft()
        if size == 0:
            return
        blk = TransportBlock(
            block_id=self._next_block_id, size_bits=size, fragments=fragments,
            n_tx=1, mcs=mcs, first_sinr_db=sinr_db,
            bler=self.bler_table.bler(mcs, sinr_db), state=BlockState.IN_FLIGHT,
            eligible_at_ms=now_ms, pending_retx_bits=0,
            earliest_arrival_ms=earliest)
        self._next_block_id += 1
        self._sent_this_tick.append(blk)

    # -- HARQ ----------------------------------------------------------------

    def harq_evaluate(self, now_ms: float) -> list[TransportBlock]:
        """Resolve every block whose transmission completed this tick.

        Returns the NACKed survivors; hand them to :meth:`requeue`.
        """
        if not self._sent_this_tick:
            return _NO_BLOCKS
        nacked: list[TransportBlock] = []
        sent, self._sent_this_tick = self._sent_this_tick, []
        for blk in sent:
            p = nack_probability(blk.bler, self.harq.error_reduction_factor,
                                 blk.n_tx)
            if self.rng.uniform() < p:
                if blk.n_tx > self.harq.max_retransmissions:
                    self._drop_block(blk)
                else:
                    blk.n_tx += 1
                    blk.state = BlockState.NACK_QUEUED
                    nacked.append(blk)
            else:
                blk.state = BlockState.RELEASED
                deadline = release_deadline_ms(
                    now_ms, self.slot_duration_ms,
                    self.harq.processing_delay_ms, self.harq.rtt_slots,
                    blk.n_tx)
                for pkt, bits in blk.fragments:
                    if pkt.dead:
                        continue
                    pkt.unacked_bits -= bits
                    if deadline > pkt.ready_time_ms:
                        pkt.ready_time_ms = deadline
        return nacked

    def requeue(self, nacked: list[TransportBlock], now_ms: float) -> None:
        """Park NACKed blocks until one HARQ round trip has elapsed."""
        eligible = now_ms + self.harq.rtt_slots * self.slot_duration_ms
        for blk in nacked:
            blk.pending_retx_bits = blk.size_bits
            blk.eligible_at_ms = eligible
            self._retx.append(blk)

    def _drop_block(self, blk: TransportBlock) -> None:
        blk.state = BlockState.DROPPED
        c = self.counters
        for pkt, _bits in blk.fragments:
            if pkt.dead:
                continue
            pkt.dead = True
            segmented = pkt.size_bits - pkt.remaining_bits
            c.queued_bits -= pkt.remaining_bits
            c.in_flight_bits -= segmented
            c.dropped_bits += pkt.size_bits
            c.dropped_packets += 1
            self.tick.dropped_bits += pkt.size_bits
            if pkt.remaining_bits > 0:
                try:
                    self._seg_queue.remove(pkt)
                except ValueError:
                    pass
            pkt.remaining_bits = 0
            pkt.unacked_bits = 0
            self._verdict(pkt.record, Verdict.DROP)

    # -- release -------------------------------------------------------------

    def release_ready(self, now_ms: float) -> None:
        """Hand fully-ACKed packets up the stack, strictly in arrival order.

        A completed packet waits behind an unfinished predecessor; a dead
        predecessor is skipped the moment the pointer reaches it.
        """
        q = self._release_queue
        c = self.counters
        while q:
            pkt = q[0]
            if pkt.dead:
                q.popleft()
                continue
            if not pkt.finalized:
                break
            if pkt.ready_time_ms > now_ms:
                break
            q.popleft()
            c.in_flight_bits -= pkt.size_bits
            c.released_bits += pkt.size_bits
            c.released_packets += 1
            self.tick.released_bits += pkt.size_bits
            self.tick.latencies_ms.append(
                pkt.ready_time_ms - pkt.record.arrival_time_ms)
            self._verdict(pkt.record, Verdict.RELEASE)

    # -- bookkeeping ---------------------------------------------------------

    def begin_tick(self) -> None:
        self.tick.reset()

    def buffer_occupancy_bits(self) -> int:
        return self.counters.queued_bits

    def pending_retx_count(self) -> int:
        return len(self._retx)

    def _verdict(self, record: PacketRecord, verdict: Verdict) -> None:
        if record.captured and self.verdict_cb is not None:
            self.verdict_cb(record.handle, verdict)
