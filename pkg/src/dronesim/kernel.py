"""Deterministic discrete-event engine.

Simulated time is an integer count of 1 microsecond ticks, which divides
every message period used by the telemetry layer (2.5 ms, 4 ms, 20 ms,
100 ms) exactly. Events fire in (time, insertion order) so simultaneous
events from different sources dispatch deterministically. All pseudo
randomness is drawn from named streams derived from a single run seed,
so two runs of the same scenario produce bit-identical traces.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Callable

TICKS_PER_SECOND = 1_000_000


def ticks_from_s(seconds: float) -> int:
    """Convert seconds to integer ticks (rounded to nearest microsecond)."""
    return round(seconds * TICKS_PER_SECOND)


def s_from_ticks(ticks: int) -> float:
    return ticks / TICKS_PER_SECOND


class SchedulingError(Exception):
    """Raised when an event is scheduled in the simulated past."""


class EventHandle:
    """Cancellation token for a scheduled event."""

    __slots__ = ("fire_at", "seq", "cancelled", "fired")

    def __init__(self, fire_at: int, seq: int):
        self.fire_at = fire_at
        self.seq = seq
        self.cancelled = False
        self.fired = False


class RngStream:
    """Named deterministic random stream.

    Identical (seed, stream_id) pairs yield identical draw sequences
    regardless of the order in which other streams are used.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = seed
        self.stream_id = stream_id
        digest = hashlib.sha256(f"{seed}:{stream_id}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "little"))

    def gauss(self, mu: float, sigma: float) -> float:
        return self._rng.gauss(mu, sigma)

    def uniform(self, a: float, b: float) -> float:
        return self._rng.uniform(a, b)

    def randrange(self, n: int) -> int:
        return self._rng.randrange(n)

    def randbytes(self, n: int) -> bytes:
        return self._rng.randbytes(n)

    def random(self) -> float:
        return self._rng.random()


class Engine:
    """Single-threaded event loop with an integer-microsecond clock.

    Cores and network links are modeled as interleaved events on one
    timeline; there is no real parallelism, which is what makes runs
    reproducible. Independent engine instances share nothing and may be
    driven from different threads.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now: int = 0
        self._queue: list[tuple[int, int, EventHandle, Callable[[], None]]] = []
        self._seq = 0
        self._streams: dict[str, RngStream] = {}
        self._stopped = False
        self.dispatch_count = 0

    def rng(self, stream_id: str) -> RngStream:
        """Return the named random stream, creating it on first use."""
        if stream_id not in self._streams:
            self._streams[stream_id] = RngStream(self.seed, stream_id)
        return self._streams[stream_id]

    def schedule_at(self, fire_at: int, fn: Callable[[], None]) -> EventHandle:
        """Schedule fn to run at absolute tick fire_at.

        Scheduling in the past is rejected; scheduling at the current
        instant is allowed and runs after already-queued events for
        that instant.
        """
        if fire_at < self.now:
            raise SchedulingError(
                f"cannot schedule at t={fire_at} ticks; clock is {self.now}"
            )
        handle = EventHandle(fire_at, self._seq)
        heapq.heappush(self._queue, (fire_at, self._seq, handle, fn))
        self._seq += 1
        return handle

    def schedule_in(self, delay: int, fn: Callable[[], None]) -> EventHandle:
        return self.schedule_at(self.now + delay, fn)

    def cancel(self, handle: EventHandle) -> bool:
        """Cancel a pending event. Returns True iff it had not yet fired.

        Idempotent: cancelling twice returns False the second time. The
        queue entry is dropped lazily at dispatch time.
        """
        if handle.fired or handle.cancelled:
            return False
        handle.cancelled = True
        return True

    def stop(self) -> None:
        """Halt the run after the current event handler returns."""
        self._stopped = True

    def run_until(self, t_end: int) -> int:
        """Dispatch every event with fire_at <= t_end, then set clock to t_end.

        Returns the number of events dispatched by this call. If stop()
        was requested inside a handler the clock stays at the stopping
        instant instead of advancing to t_end.
        """
        if t_end < self.now:
            raise SchedulingError(f"t_end={t_end} is before clock {self.now}")
        dispatched = 0
        while self._queue and self._queue[0][0] <= t_end:
            fire_at, _seq, handle, fn = heapq.heappop(self._queue)
            if handle.cancelled:
                continue
            handle.fired = True
            self.now = fire_at
            fn()
            dispatched += 1
            self.dispatch_count += 1
            if self._stopped:
                return dispatched
        self.now = t_end
        return dispatched

    def every(
        self,
        period: int,
        fn: Callable[[], None],
        start: int = 0,
        until: int | None = None,
    ) -> Callable[[], None]:
        """Fire fn at start, start+period, ... (first firing inclusive).

        Returns a stopper callable that cancels the chain.
        """
        if period <= 0:
            raise ValueError("period must be positive")
        state = {"handle": None, "stopped": False}

        def tick():
            if state["stopped"]:
                return
            fn()
            nxt = self.now + period
            if until is None or nxt <= until:
                state["handle"] = self.schedule_at(nxt, tick)

        state["handle"] = self.schedule_at(max(start, self.now), tick)

        def stopper():
            state["stopped"] = True
            if state["handle"] is not None:
                self.cancel(state["handle"])

        return stopper
