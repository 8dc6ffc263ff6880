"""Traffic sources: synthetic generation and userspace packet capture.

Synthetic flows accumulate fractional bits per tick at the configured rate
(with clamped Gaussian jitter) and emit fixed-size packets whenever a whole
packet's worth of bits is banked.

Captured flows take real datagrams from a host firewall userspace queue
(NFQUEUE).  Packets arrive on adapter threads, are stamped and parked in a
thread-safe ingress queue the engine drains once per tick, and each packet's
kernel handle is answered with exactly one Release or Drop verdict; whatever
is still unverdicted when the run ends is released (fail open).
"""

from __future__ import annotations

import enum
import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import Direction, SimulatedTraffic


class Verdict(enum.Enum):
    RELEASE = "release"
    DROP = "drop"


class CaptureError(RuntimeError):
    """Capture adapter unavailable or disconnected; aborts real-traffic runs."""


class VerdictError(RuntimeError):
    """A kernel handle was answered twice, or was never issued."""


@dataclass
class PacketRecord:
    __slots__ = ("packet_id", "ue_id", "direction", "size_bits",
                 "arrival_time_ms", "prev_packet_id", "handle")
    packet_id: int
    ue_id: int
    direction: Direction
    size_bits: int
    arrival_time_ms: float
    prev_packet_id: Optional[int]
    handle: Optional[object]    # kernel packet handle; None for synthetic

    @property
    def captured(self) -> bool:
        return self.handle is not None


# shared no-packet result; generate() returns it on every idle tick, so the
# common case allocates nothing.  Callers must not mutate it.
_NO_PACKETS: list = []


class TrafficGenerator:
    """Per-UE synthetic source; one bit accumulator per direction.

    Jitter draws are taken from the UE's traffic stream in blocks (one
    block drains in strict DL-then-UL tick order), which yields the exact
    same sequence as per-call draws at a fraction of the cost.
    """

    _BATCH = 256

    def __init__(self, ue_id: int, cfg: SimulatedTraffic):
        self.ue_id = ue_id
        self.cfg = cfg
        self._acc_dl = 0.0
        self._acc_ul = 0.0
        self._next_dl = 0
        self._next_ul = 0
        self._eps = np.empty(0)
        self._eps_pos = 0

    def accumulator(self, direction: Direction) -> float:
        return self._acc_dl if direction is Direction.DL else self._acc_ul

    def _next_eps(self, rng: np.random.Generator) -> float:
        if self._eps_pos >= len(self._eps):
            self._eps = rng.normal(0.0, self.cfg.jitter_std_fraction,
                                   size=self._BATCH)
            self._eps_pos = 0
        v = self._eps[self._eps_pos]
        self._eps_pos += 1
        return v

    def generate(self, direction: Direction, now_ms: float,
                 rng: np.random.Generator) -> list[PacketRecord]:
        dl = direction is Direction.DL
        target = self.cfg.dl_target_bps if dl else self.cfg.ul_target_bps
        if target <= 0.0:
            return _NO_PACKETS
        increment = target / 1000.0
        if self.cfg.jitter_std_fraction > 0.0:
            increment *= 1.0 + self._next_eps(rng)
            if increment < 0.0:
                increment = 0.0
        acc = (self._acc_dl if dl else self._acc_ul) + increment
        size = self.cfg.packet_size_bits
        count = int(acc // size)
        acc -= count * size
        if dl:
            self._acc_dl = acc
        else:
            self._acc_ul = acc
        if count == 0:
            return _NO_PACKETS
        if dl:
            first, self._next_dl = self._next_dl, self._next_dl + count
        else:
            first, self._next_ul = self._next_ul, self._next_ul + count
        out = []
        for pid in range(first, first + count):
            out.append(PacketRecord(
                packet_id=pid, ue_id=self.ue_id, direction=direction,
                size_bits=size, arrival_time_ms=now_ms,
                prev_packet_id=pid - 1 if pid > 0 else None, handle=None))
        return out


class IngressQueue:
    """Thread-safe handoff from capture threads to the engine.

    ``drain(now_ms)`` returns only records stamped at or before ``now_ms``;
    anything racing in with a later stamp is held for the next tick, so a
    tick never observes ingress newer than its own start.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._items: deque[PacketRecord] = deque()

    def put(self, record: PacketRecord) -> None:
        with self._lock:
            self._items.append(record)

    def drain(self, now_ms: float) -> list[PacketRecord]:
        out = []
        with self._lock:
            while self._items and self._items[0].arrival_time_ms <= now_ms:
                out.append(self._items.popleft())
        return out

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


class CaptureAdapter:
    """Common verdict bookkeeping for capture backends.

    Subclasses deliver packets by calling :meth:`_deliver` from their own
    threads and implement :meth:`_apply_verdict`.  ``verdict`` may be called
    from any thread; each handle accepts exactly one verdict.
    """

    def __init__(self, ue_id: int):
        self.ue_id = ue_id
        self.queues = {Direction.DL: IngressQueue(),
                       Direction.UL: IngressQueue()}
        self._lock = threading.Lock()
        self._pending: dict[int, object] = {}
        self._done: set[int] = set()
        self._next_handle = 0
        self._next_id = {Direction.DL: 0, Direction.UL: 0}
        self.clock_ms: Callable[[], float] = lambda: 0.0

    def start(self, clock_ms: Callable[[], float]) -> None:
        self.clock_ms = clock_ms

    def stop(self) -> None:
        pass

    def _deliver(self, direction: Direction, size_bits: int,
                 backend_ref: object) -> PacketRecord:
        with self._lock:
            handle = self._next_handle
            self._next_handle += 1
            self._pending[handle] = backend_ref
            pid = self._next_id[direction]
            self._next_id[direction] = pid + 1
        record = PacketRecord(
            packet_id=pid, ue_id=self.ue_id, direction=direction,
            size_bits=size_bits, arrival_time_ms=self.clock_ms(),
            prev_packet_id=pid - 1 if pid > 0 else None, handle=handle)
        self.queues[direction].put(record)
        return record

    def verdict(self, handle: int, verdict: Verdict) -> None:
        with self._lock:
            if handle in self._done:
                raise VerdictError(f"handle {handle} already verdicted")
            if handle not in self._pending:
                raise VerdictError(f"handle {handle} was never issued")
            backend_ref = self._pending.pop(handle)
            self._done.add(handle)
        self._apply_verdict(backend_ref, verdict)

    def release_all_pending(self) -> int:
        """Fail-open path at run termination; returns the number released."""
        with self._lock:
            leftover = list(self._pending.items())
            self._pending.clear()
            self._done.update(h for h, _ in leftover)
        for _, backend_ref in leftover:
            self._apply_verdict(backend_ref, Verdict.RELEASE)
        return len(leftover)

    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    def _apply_verdict(self, backend_ref: object, verdict: Verdict) -> None:
        raise NotImplementedError


class InMemoryCaptureAdapter(CaptureAdapter):
    """Loopback capture twin: tests and demos inject datagrams directly and
    observe the verdict each one received."""

    def __init__(self, ue_id: int):
        super().__init__(ue_id)
        self.verdicts: dict[int, Verdict] = {}

    def inject(self, direction: Direction, payload_bytes: int,
               arrival_time_ms: Optional[float] = None) -> PacketRecord:
        record = self._deliver(direction, payload_bytes * 8, backend_ref=None)
        if arrival_time_ms is not None:
            record.arrival_time_ms = arrival_time_ms
        return record

    def _apply_verdict(self, backend_ref: object, verdict: Verdict) -> None:
        # backend_ref is unused; remember the decision by handle
        pass

    def verdict(self, handle: int, verdict: Verdict) -> None:
        super().verdict(handle, verdict)
        self.verdicts[handle] = verdict


class NetfilterQueueAdapter(CaptureAdapter):
    """NFQUEUE-backed capture: binds one kernel queue per direction.

    Requires the NetfilterQueue package, root privileges and firewall rules
    steering traffic into the queue numbers (see scenarios/firewall_rules.sh).
    Verdicts are parked on a thread-safe list and applied from the capture
    thread between receive polls, so engine-side calls never touch the
    netlink socket directly.
    """

    def __init__(self, ue_id: int, dl_queue_num: int, ul_queue_num: int):
        super().__init__(ue_id)
        self.queue_nums = {Direction.DL: dl_queue_num,
                           Direction.UL: ul_queue_num}
        self._decided: deque[tuple[object, Verdict]] = deque()
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()

    def start(self, clock_ms: Callable[[], float]) -> None:
        super().start(clock_ms)
        try:
            from netfilterqueue import NetfilterQueue
        except ImportError as exc:
            raise CaptureError(
                "captured traffic configured but the NetfilterQueue package "
                "is not installed (pip install ranemu[capture])") from exc
        for direction, qnum in self.queue_nums.items():
            nfq = NetfilterQueue()
            try:
                nfq.bind(qnum, self._make_callback(direction))
            except OSError as exc:
                raise CaptureError(
                    f"cannot bind NFQUEUE {qnum}: {exc}") from exc
            thread = threading.Thread(
                target=self._run_queue, args=(nfq,),
                name=f"nfq-ue{self.ue_id}-{direction.value}", daemon=True)
            thread.start()
            self._threads.append(thread)

    def _make_callback(self, direction: Direction):
        def on_packet(pkt):
            self._deliver(direction, len(pkt.get_payload()) * 8,
                          backend_ref=pkt)
        return on_packet

    def _run_queue(self, nfq) -> None:
        import socket
        sock = socket.fromfd(nfq.get_fd(), socket.AF_NETLINK,
                             socket.SOCK_RAW)
        sock.settimeout(0.05)
        try:
            while not self._stop.is_set():
                self._flush_decided()
                try:
                    nfq.run_socket(sock)
                except socket.timeout:
                    continue
        finally:
            self._flush_decided()
            sock.close()
            nfq.unbind()

    def _flush_decided(self) -> None:
        while True:
            try:
                pkt, verdict = self._decided.popleft()
            except IndexError:
                return
            if verdict is Verdict.RELEASE:
                pkt.accept()
            else:
                pkt.drop()

    def _apply_verdict(self, backend_ref: object, verdict: Verdict) -> None:
        self._decided.append((backend_ref, verdict))

    def stop(self) -> None:
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=1.0)


def make_capture_adapter(ue_cfg) -> CaptureAdapter:
    """Default factory for captured-traffic UEs; tests swap in the
    in-memory twin through the engine's ``capture_factory`` hook."""
    return NetfilterQueueAdapter(ue_cfg.ue_id,
                                 ue_cfg.traffic.dl_queue_num,
                                 ue_cfg.traffic.ul_queue_num)
