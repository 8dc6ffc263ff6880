"""Delimited metrics output.

The file starts with a versioned schema line, then a column header, then
one row per (tick, UE, direction).  Floats carry three decimals; the mean
latency field is empty on ticks where no packet was released.  Rows are
buffered and flushed every 100 ms of emulated time; in realtime mode the
actual file I/O runs on a background thread so a slow disk cannot stall
the tick loop.

Rows are formatted on the engine thread in both modes, which keeps fast
and realtime output byte-identical for the same seed.
"""

from __future__ import annotations

import queue
import threading
import time
from typing import Callable, Optional

SCHEMA_LINE = "#schema=ranemu.metrics.v1"

COLUMNS = ("time_ms", "ue_id", "direction", "granted_bits", "released_bits",
           "dropped_bits", "buffer_bits", "sinr_db", "mcs", "cqi", "ri",
           "mean_packet_latency_ms", "pos_x_m", "pos_y_m")

FLUSH_INTERVAL_MS = 100.0

_SENTINEL = None


class MetricsSinkError(RuntimeError):
    """The metrics file could not be written."""


def format_row(time_ms: float, ue_id: int, direction: str, granted_bits: int,
               released_bits: int, dropped_bits: int, buffer_bits: int,
               sinr_db: float, mcs: int, cqi: int, ri: int,
               mean_latency_ms: Optional[float],
               pos_x_m: float, pos_y_m: float) -> str:
    lat = "" if mean_latency_ms is None else f"{mean_latency_ms:.3f}"
    return (f"{time_ms:.3f},{ue_id},{direction},{granted_bits},"
            f"{released_bits},{dropped_bits},{buffer_bits},{sinr_db:.3f},"
            f"{mcs},{cqi},{ri},{lat},{pos_x_m:.3f},{pos_y_m:.3f}\n")


class MetricsWriter:
    """Owns the metrics file; write_line is engine-thread only."""

    def __init__(self, path: str, background: bool = False):
        self.path = path
        try:
            self._fh = open(path, "w", encoding="utf-8", newline="")
            self._fh.write(SCHEMA_LINE + "\n")
            self._fh.write(",".join(COLUMNS) + "\n")
        except OSError as exc:
            raise MetricsSinkError(f"cannot open metrics file {path}: {exc}") from exc
        self._buffer: list[str] = []
        self._closed = False
        self.rows_written = 0
        self._error: Optional[BaseException] = None
        self._queue: Optional[queue.Queue] = None
        self._thread: Optional[threading.Thread] = None
        if background:
            self._queue = queue.Queue()
            self._thread = threading.Thread(target=self._drain,
                                            name="metrics-writer", daemon=True)
            self._thread.start()

    def write_line(self, line: str) -> None:
        self._buffer.append(line)

    def sink(self) -> Callable[[str], None]:
        """Bound append onto the current buffer.

        One attribute lookup per row instead of a method call; the engine
        leans on this in the per-tick emission loop.  Invalidated by
        :meth:`flush`, so refetch after every flush.
        """
        return self._buffer.append

    def flush(self) -> None:
        """Hand the buffered batch to the sink; called at 100 ms boundaries.

        Background write failures surface here, on the next flush after the
        writer thread died -- at most 100 emulated ms after the fact.
        """
        self._check()
        if not self._buffer:
            return
        batch, self._buffer = self._buffer, []
        self.rows_written += len(batch)
        if self._queue is not None:
            self._queue.put(batch)
        else:
            self._write_batch(batch)

    def close(self) -> None:
        if self._closed:
            return
        self.flush()
        self._closed = True
        if self._queue is not None:
            self._queue.put(_SENTINEL)
            self._thread.join()
        try:
            self._fh.close()
        except OSError as exc:
            raise MetricsSinkError(f"closing {self.path}: {exc}") from exc
        self._check()

    # -- internals -----------------------------------------------------------

    def _write_batch(self, batch: list[str]) -> None:
        # join in modest chunks: one giant join on the background thread
        # would hold the GIL long enough to disturb realtime pacing
        paced = self._queue is not None
        try:
            for i in range(0, len(batch), 256):
                self._fh.write("".join(batch[i:i + 256]))
                if paced:
                    # cede the GIL between chunks; the engine thread is on
                    # a 1 ms deadline and this thread has a 100 ms budget
                    time.sleep(0.0003)
            self._fh.flush()
        except OSError as exc:
            raise MetricsSinkError(f"writing {self.path}: {exc}") from exc

    def _drain(self) -> None:
        while True:
            batch = self._queue.get()
            if batch is _SENTINEL:
                return
            try:
                self._write_batch(batch)
            except MetricsSinkError as exc:
                self._error = exc
                return

    def _check(self) -> None:
        if self._error is not None:
            raise MetricsSinkError(str(self._error)) from self._error

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
