"""Deterministic discrete-event kernel: a clock, a time-ordered queue, a loop."""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class EventKind(enum.Enum):
    DISPATCH = "Dispatch"
    CHECKPOINT_DUE = "CheckpointDue"
    JOB_COMPLETE = "JobComplete"
    RESOURCE_FAIL = "ResourceFail"
    RESOURCE_REPAIR = "ResourceRepair"
    REPLICA_WRITE_DONE = "ReplicaWriteDone"


class SchedulingError(ValueError):
    pass


class UnhandledEventError(RuntimeError):
    pass


@dataclass(eq=False)
class Event:
    fire_time: float
    seq: int
    kind: EventKind
    payload: Any = None
    cancelled: bool = field(default=False, repr=False)

    def summary(self) -> str:
        p = self.payload
        if isinstance(p, dict):
            return " ".join(f"{k}={p[k]}" for k in sorted(p))
        return "" if p is None else str(p)


Handler = Callable[[Event], None]


class Kernel:
    """Single-threaded event loop.

    Events fire in non-decreasing ``fire_time``; ties go to the earlier
    insertion. Cancelled events are dropped silently and never traced.
    """

    def __init__(self, trace: bool = False):
        self.now = 0.0
        self._queue: list[tuple[float, int, Event]] = []
        self._seq = 0
        self._handlers: dict[EventKind, Handler] = {}
        self._stopped = False
        self.processed = 0
        self.trace: list[str] | None = [] if trace else None

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_time: float, kind: EventKind, payload: Any = None) -> Event:
        if not fire_time >= self.now:  # also rejects NaN
            raise SchedulingError(f"cannot schedule {kind.value} at {fire_time} before now={self.now}")
        ev = Event(fire_time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._queue, (fire_time, ev.seq, ev))
        return ev

    def schedule_in(self, delay: float, kind: EventKind, payload: Any = None) -> Event:
        return self.schedule(self.now + delay, kind, payload)

    def cancel(self, ev: Event | None) -> None:
        if ev is not None:
            ev.cancelled = True

    def stop(self) -> None:
        """Finish the current event, then drain the queue without firing anything."""
        self._stopped = True

    def __len__(self) -> int:
        return sum(1 for _, _, ev in self._queue if not ev.cancelled)

    def pending(self) -> list[Event]:
        return [ev for _, _, ev in sorted(self._queue) if not ev.cancelled]

    def pop(self) -> Event | None:
        while self._queue:
            _, _, ev = heapq.heappop(self._queue)
            if not ev.cancelled:
                return ev
        return None

    def run(self, until: float = math.inf, after: Handler | None = None) -> float:
        """Process events up to ``until`` (inclusive) or exhaustion; return the clock.

        ``after`` is called with each event once its handler has returned.
        """
        queue = self._queue
        handlers = self._handlers
        trace = self.trace
        while queue and not self._stopped:
            if queue[0][0] > until:
                break
            _, _, ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            handler = handlers.get(ev.kind)
            if handler is None:
                raise UnhandledEventError(f"no handler for {ev.kind.value} at t={ev.fire_time}")
            self.now = ev.fire_time
            if trace is not None:
                trace.append(f"{ev.fire_time!r}\t{ev.kind.value}\t{ev.summary()}")
            handler(ev)
            self.processed += 1
            if after is not None:
                after(ev)
        if self._stopped:
            queue.clear()
        return self.now

    def write_trace(self, path) -> None:
        if self.trace is None:
            raise RuntimeError("kernel was created without tracing")
        with open(path, "w") as fh:
            for line in self.trace:
                fh.write(line + "\n")


STREAMS = {"gridlet-gen": 0, "fault-model": 1, "scheduler": 2}


def substream(seed: int, name: str, *sub: int) -> np.random.Generator:
    """Independent generator for a named subsystem (optionally per entity).

    Streams are keyed, not spawned in sequence, so extra draws in one
    subsystem never shift another.
    """
    key = (STREAMS[name], *sub)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))
