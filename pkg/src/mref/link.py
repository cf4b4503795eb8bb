"""Store-and-forward model of a one-way deep-space link on a virtual clock.

Messages queue FIFO behind each other, serialize at ``data_rate`` and arrive
``one_way_delay`` seconds after their last byte leaves.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from mref.errors import LinkError


class MessageKind(str, enum.Enum):
    INSTRUCTION_SET = "INSTRUCTION_SET"
    NOTE_FILE = "NOTE_FILE"
    PHOTO_META = "PHOTO_META"
    TELEMETRY_BATCH = "TELEMETRY_BATCH"

    @property
    def direction(self) -> str:
        return "uplink" if self is MessageKind.INSTRUCTION_SET else "downlink"


@dataclass(frozen=True)
class LinkConfig:
    name: str
    one_way_delay: float
    data_rate: float

    def __post_init__(self):
        if not (math.isfinite(self.one_way_delay) and self.one_way_delay >= 0):
            raise LinkError("BAD_CONFIG", f"one_way_delay must be finite and >= 0, got {self.one_way_delay}")
        if not (math.isfinite(self.data_rate) and self.data_rate > 0):
            raise LinkError("BAD_CONFIG", f"data_rate must be finite and > 0, got {self.data_rate}")


MIN_RATE = 62.5
MAX_RATE = 4000.0

PRESETS = {
    # one-way delay is half the quoted round trip
    "lunar": LinkConfig("lunar", 1.3, MAX_RATE),
    "mars": LinkConfig("mars", 660.0, MAX_RATE),
}


@dataclass(frozen=True)
class Message:
    id: int
    payload_bytes: int
    kind: MessageKind


@dataclass(frozen=True)
class Transmission:
    message: Message
    t_submit: float
    t_tx_start: float
    t_tx_end: float
    t_delivered: float

    @property
    def t_rx_start(self) -> float:
        """When the first byte reaches the receiver."""
        return self.t_delivered - (self.t_tx_end - self.t_tx_start)

    def delivery_line(self) -> str:
        m = self.message
        return f"deliver t={self.t_delivered:.6f} id={m.id} kind={m.kind.value} bytes={m.payload_bytes}"

    def timeline_line(self) -> str:
        # full float precision so the timeline can be reloaded exactly
        m = self.message
        return (
            f"transmit id={m.id} kind={m.kind.value} bytes={m.payload_bytes} "
            f"submit={self.t_submit!r} tx_start={self.t_tx_start!r} "
            f"tx_end={self.t_tx_end!r} delivered={self.t_delivered!r}"
        )


class Link:
    """A single serial channel. Single owner, one logical timeline."""

    def __init__(self, config: LinkConfig):
        self.config = config
        self.now = 0.0
        self._last_submit = -math.inf
        self._busy_until = -math.inf
        self._ids: set[int] = set()
        self._in_flight: deque[Transmission] = deque()
        self.history: list[Transmission] = []

    def submit(self, message: Message, t_submit: float) -> int:
        if t_submit < self.now or t_submit < self._last_submit:
            raise LinkError(
                "NON_MONOTONIC_SUBMIT",
                f"submit at {t_submit} after clock {self.now} / previous submit {self._last_submit}",
            )
        if message.id in self._ids:
            raise LinkError("DUPLICATE_ID", f"message id {message.id} already used")
        if message.payload_bytes < 0:
            raise LinkError("BAD_MESSAGE", "payload_bytes must be >= 0")
        start = max(t_submit, self._busy_until)
        end = start + message.payload_bytes / self.config.data_rate
        tx = Transmission(message, t_submit, start, end, end + self.config.one_way_delay)
        self._ids.add(message.id)
        self._last_submit = t_submit
        self._busy_until = end
        self._in_flight.append(tx)
        self.history.append(tx)
        return message.id

    def next_delivery(self) -> float | None:
        return self._in_flight[0].t_delivered if self._in_flight else None

    def run_until(self, t: float) -> list[Transmission]:
        if t < self.now:
            raise LinkError("CLOCK_REGRESSION", f"run_until({t}) behind clock {self.now}")
        out = []
        # FIFO service with a constant delay delivers in submission order
        while self._in_flight and self._in_flight[0].t_delivered <= t:
            out.append(self._in_flight.popleft())
        self.now = t
        return sorted(out, key=lambda tx: (tx.t_delivered, tx.message.id))


@dataclass(frozen=True)
class BandwidthStats:
    window: float
    average_bps: float
    peak_window_bps: float
    total_bytes: int

    def format(self) -> str:
        return (
            f"window={self.window:.6f} average_bps={self.average_bps:.6f} "
            f"peak_window_bps={self.peak_window_bps:.6f} total_bytes={self.total_bytes}"
        )


def _window_index(t: float, origin: float, window: float) -> int:
    # windows are right-closed: (origin + k*w, origin + (k+1)*w], the origin itself falls in window 0
    return max(0, math.ceil((t - origin) / window - 1e-9) - 1)


def bandwidth_stats(events: Iterable[Transmission], window: float) -> BandwidthStats:
    """Receive-side throughput for delivered transmissions.

    Bytes of each message are counted as arriving uniformly between its
    first and last byte reaching the receiver. Windows are consecutive,
    of width ``window``, anchored at the earliest submit time; the average
    divides by the whole number of windows the traffic spans.
    """
    if not window > 0:
        raise LinkError("BAD_WINDOW", f"window must be > 0, got {window}")
    events = list(events)
    if not events:
        raise LinkError("NO_TRAFFIC", "no deliveries to summarize")
    origin = min(tx.t_submit for tx in events)
    last = max(tx.t_delivered for tx in events)
    n = _window_index(last, origin, window) + 1
    buckets = [0.0] * n
    total = 0
    for tx in events:
        size = tx.message.payload_bytes
        total += size
        a, b = tx.t_rx_start, tx.t_delivered
        k0, k1 = _window_index(a, origin, window), _window_index(b, origin, window)
        if k0 == k1:
            buckets[k1] += size
            continue
        # cumulative shares telescope, so no window inherits a running-sum error
        done = 0.0
        for k in range(k0, k1):
            upto = size * ((min(b, origin + (k + 1) * window) - a) / (b - a))
            buckets[k] += upto - done
            done = upto
        buckets[k1] += size - done
    return BandwidthStats(window, total / (n * window), max(buckets) / window, total)
