"""Deterministic event-driven simulation core.

Virtual time is an integer count of microseconds.  A single ordered event
queue with FIFO tie-breaking on equal timestamps drives one device and one
reader; random draws come from named, independently seeded substreams so
that a (config, seed) pair replays to a byte-identical trace.
"""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

US_PER_MS = 1_000
US_PER_S = 1_000_000

EVENT_KINDS = (
    "phase-transition",
    "reader-command",
    "timer-expiry",
    "measurement-window-close",
    "harvest-resample",
    "dispatch",
)


def ms_to_us(ms: float) -> int:
    return int(round(ms * US_PER_MS))


def s_to_us(s: float) -> int:
    return int(round(s * US_PER_S))


def us_to_ms(us: int) -> float:
    return us / US_PER_MS


def us_to_s(us: int) -> float:
    return us / US_PER_S


class SimulationError(RuntimeError):
    """Contract violation inside the simulation (fatal, not recoverable)."""


@dataclass(frozen=True)
class Distribution:
    """Specification of a random draw: ``uniform(a, b)`` or ``normal(mu, sigma)``."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "normal"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "uniform" and not self.b >= self.a:
            raise ValueError("uniform requires b >= a")
        if self.kind == "normal" and self.b < 0:
            raise ValueError("normal requires sigma >= 0")

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "uniform":
            return float(rng.uniform(self.a, self.b))
        # sigma == 0 must be exactly the mean, not a zero-width draw
        if self.b == 0.0:
            return float(self.a)
        return float(rng.normal(self.a, self.b))


@dataclass
class TraceEvent:
    time_us: int
    entity: str
    label: str
    detail: float = 0.0

    def as_csv_row(self) -> str:
        return f"{self.time_us},{self.entity},{self.label},{self.detail:.9g}"


class EventHandle:
    """Returned by :meth:`Simulator.schedule`; permits cancellation."""

    __slots__ = ("due_us", "seq", "kind", "callback", "payload", "cancelled", "delivered")

    def __init__(self, due_us: int, seq: int, kind: str, callback: Callable, payload: Any):
        self.due_us = due_us
        self.seq = seq
        self.kind = kind
        self.callback = callback
        self.payload = payload
        self.cancelled = False
        self.delivered = False

    def __lt__(self, other: "EventHandle") -> bool:
        return (self.due_us, self.seq) < (other.due_us, other.seq)


class Simulator:
    """Single-threaded virtual clock, event queue, trace and RNG substreams."""

    def __init__(self, seed: int | tuple):
        self.seed = seed
        self.now: int = 0
        self._heap: list[EventHandle] = []
        self._seq = 0
        self.trace: list[TraceEvent] = []
        self._streams: dict[str, np.random.Generator] = {}
        self.scheduled_count = 0
        self.delivered_count = 0
        self.cancelled_count = 0

    # -- randomness --------------------------------------------------------

    def stream(self, name: str) -> np.random.Generator:
        """Named RNG substream, derived from the simulator seed.

        The same (seed, name) pair always yields the same sequence,
        independent of draw order in other streams.
        """
        gen = self._streams.get(name)
        if gen is None:
            key = zlib.crc32(name.encode("utf-8"))
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(key,))
            gen = np.random.Generator(np.random.PCG64(ss))
            self._streams[name] = gen
        return gen

    def next_random(self, distribution: Distribution) -> float:
        return distribution.sample(self.stream("user"))

    # -- scheduling --------------------------------------------------------

    def schedule(
        self,
        delay_us: int | None = None,
        *,
        at_us: int | None = None,
        kind: str = "timer-expiry",
        callback: Callable[[int], None],
        payload: Any = None,
    ) -> EventHandle:
        """Schedule ``callback(now)`` at ``now + delay_us`` (or absolute ``at_us``).

        Scheduling in the past is a fatal contract violation.  Events with
        equal due times are delivered in insertion order.
        """
        if (delay_us is None) == (at_us is None):
            raise SimulationError("exactly one of delay_us / at_us required")
        due = self.now + delay_us if delay_us is not None else at_us
        if due < self.now:
            raise SimulationError(f"event scheduled in the past: due={due} now={self.now}")
        handle = EventHandle(due, self._seq, kind, callback, payload)
        self._seq += 1
        heapq.heappush(self._heap, handle)
        self.scheduled_count += 1
        return handle

    def cancel(self, handle: EventHandle | None) -> None:
        if handle is None or handle.cancelled or handle.delivered:
            return
        handle.cancelled = True
        self.cancelled_count += 1

    def run_until(self, t_end_us: int) -> list[TraceEvent]:
        """Deliver every event due at or before ``t_end_us``; returns the trace slice."""
        if t_end_us < self.now:
            raise SimulationError("run_until target is in the past")
        trace_mark = len(self.trace)
        while self._heap and self._heap[0].due_us <= t_end_us:
            handle = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            if handle.due_us < self.now:
                raise SimulationError("clock would move backwards")
            self.now = handle.due_us
            handle.delivered = True
            self.delivered_count += 1
            handle.callback(self.now)
        self.now = t_end_us
        return self.trace[trace_mark:]

    def pending(self) -> int:
        return sum(1 for h in self._heap if not h.cancelled)

    # -- trace -------------------------------------------------------------

    def record(self, entity: str, label: str, detail: float = 0.0) -> None:
        self.trace.append(TraceEvent(self.now, entity, label, detail))

    def trace_csv(self) -> str:
        """Newline-delimited ``time_us,entity,label,detail`` export (LF, UTF-8)."""
        lines = ["time_us,entity,label,detail"]
        lines.extend(ev.as_csv_row() for ev in self.trace)
        return "\n".join(lines) + "\n"
