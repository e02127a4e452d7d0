"""Simulated UDP-like unidirectional links between the two sides.

Fire-and-forget: a send either schedules a delivery after the link
latency (plus optional Gaussian jitter) or silently drops the frame.
Drops have two causes, both counted: the token-bucket rate limiter
standing in for the host's packet-rate firewall rule, and overflow of
the in-flight queue. Tokens replenish continuously at bucket_rate up
to bucket_burst, which preserves burst semantics a fixed-window
limiter would not.

The container side has exactly one link to the host and no other
egress, mirroring its sandboxed network namespace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .kernel import Engine, TICKS_PER_SECOND, ticks_from_s


@dataclass
class ChannelConfig:
    latency_s: float = 200e-6
    jitter_sigma_s: float = 0.0
    queue_capacity: int = 64
    bucket_rate: float = 2000.0  # frames/s
    bucket_burst: int = 32       # frames

    def validate(self) -> None:
        if self.latency_s < 0:
            raise ValueError("latency_s must be non-negative")
        if self.jitter_sigma_s < 0:
            raise ValueError("jitter_sigma_s must be non-negative")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be at least 1")
        if self.bucket_rate <= 0:
            raise ValueError("bucket_rate must be positive")
        if self.bucket_burst < 1:
            raise ValueError("bucket_burst must be at least 1")


@dataclass
class LinkStats:
    sent: int = 0
    delivered: int = 0
    dropped_ratelimit: int = 0
    dropped_overflow: int = 0
    in_flight: int = 0
    drop_log: list[tuple[int, str]] = field(default_factory=list)

    def conserved(self) -> bool:
        return self.sent == (
            self.delivered + self.dropped_ratelimit
            + self.dropped_overflow + self.in_flight
        )


ACCEPTED = "accepted"
DROPPED_RATELIMIT = "dropped_ratelimit"
DROPPED_OVERFLOW = "dropped_overflow"

_TOKEN_EPS = 1e-9


class Link:
    """One direction of the host/container boundary."""

    def __init__(self, engine: Engine, config: ChannelConfig, name: str = "link"):
        config.validate()
        self.engine = engine
        self.config = config
        self.name = name
        self.stats = LinkStats()
        self._handlers: list[Callable[[bytes, int], None]] = []
        self._tokens = float(config.bucket_burst)
        self._last_refill = 0
        self._jitter_rng = engine.rng(f"channel/{name}/jitter")
        self.accept_log: list[int] = []  # send ticks of accepted frames

    def on_deliver(self, handler: Callable[[bytes, int], None]) -> None:
        """Register handler(frame_bytes, delivery_tick). Handlers fire in
        registration order at delivery time."""
        self._handlers.append(handler)

    def _refill(self, now: int) -> None:
        if now > self._last_refill:
            delta = (now - self._last_refill) * self.config.bucket_rate / TICKS_PER_SECOND
            self._tokens = min(float(self.config.bucket_burst), self._tokens + delta)
            self._last_refill = now

    def send(self, frame: bytes) -> str:
        """Submit a frame at the current simulated instant.

        Returns one of ACCEPTED, DROPPED_RATELIMIT, DROPPED_OVERFLOW.
        Drops are silent toward the sender, as with UDP.
        """
        now = self.engine.now
        self.stats.sent += 1
        self._refill(now)
        if self._tokens < 1.0 - _TOKEN_EPS:
            self.stats.dropped_ratelimit += 1
            self.stats.drop_log.append((now, DROPPED_RATELIMIT))
            return DROPPED_RATELIMIT
        if self.stats.in_flight >= self.config.queue_capacity:
            self.stats.dropped_overflow += 1
            self.stats.drop_log.append((now, DROPPED_OVERFLOW))
            return DROPPED_OVERFLOW
        self._tokens -= 1.0
        delay = self.config.latency_s
        if self.config.jitter_sigma_s > 0.0:
            delay = max(0.0, delay + self._jitter_rng.gauss(0.0, self.config.jitter_sigma_s))
        self.stats.in_flight += 1
        self.accept_log.append(now)
        self.engine.schedule_in(max(ticks_from_s(delay), 0), lambda: self._deliver(frame))
        return ACCEPTED

    def _deliver(self, frame: bytes) -> None:
        self.stats.in_flight -= 1
        self.stats.delivered += 1
        for handler in self._handlers:
            handler(frame, self.engine.now)
