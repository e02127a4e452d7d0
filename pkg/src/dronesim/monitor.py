"""Security monitor and Simplex switching logic.

The monitor lives on the trusted host side. It watches the motor-output
frames arriving from the container controller and the drone's physical
attitude, and enforces two rules every check period:

  RX_INTERVAL  the gap since the last valid motor frame must not exceed
               a threshold; a long gap means the container controller
               has stalled or been killed.
  ATTITUDE     wrapped roll/pitch/yaw errors must stay inside their
               bounds; large errors mean the vehicle is in danger
               regardless of what the frames claim.

On the first violation the monitor kills the receiving path and latches
the actuation source to the safety controller. The switch is one-way
unless the (non-default) recovery flag is set. Rule order is fixed:
when both rules are violated at one check, RX_INTERVAL is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .control import attitude_error
from .kernel import TICKS_PER_SECOND, ticks_from_s
from .plant import VehicleState
from .protocol import MotorCommand


class ControlSource(Enum):
    CCE = "cce"
    SAFETY = "safety"


class Rule(Enum):
    RX_INTERVAL = "rx_interval"
    ATTITUDE = "attitude"


@dataclass
class MonitorConfig:
    rx_interval_threshold_s: float = 0.050
    attitude_bound_roll: float = 0.35   # rad
    attitude_bound_pitch: float = 0.35  # rad
    attitude_bound_yaw: float = 0.70    # rad
    check_period_s: float = 0.0025
    allow_recovery: bool = False

    def validate(self) -> None:
        for name in ("rx_interval_threshold_s", "attitude_bound_roll",
                     "attitude_bound_pitch", "attitude_bound_yaw",
                     "check_period_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Verdict:
    ok: bool
    violated_rule: Rule | None = None
    measured: float = 0.0

    def __post_init__(self):
        assert self.ok == (self.violated_rule is None)


@dataclass
class MonitorEvent:
    tick: int
    kind: str  # "violation", "switch", "warning"
    detail: str


@dataclass
class Monitor:
    config: MonitorConfig
    active_source: ControlSource = ControlSource.CCE
    last_cce_rx: int = 0
    receiver_alive: bool = True
    has_received: bool = False
    cce_candidate: MotorCommand | None = None
    malformed_count: int = 0
    violation_log: list[MonitorEvent] = field(default_factory=list)
    switch_tick: int | None = None

    def on_cce_motor_frame(self, cmd: MotorCommand, t: int) -> None:
        """Accept a decoded motor frame from the container side. Ignored
        entirely once the receiver has been killed."""
        if not self.receiver_alive:
            return
        self.last_cce_rx = t
        self.has_received = True
        self.cce_candidate = cmd

    def on_malformed_frame(self, t: int) -> None:
        """Count a frame that failed to decode; it does not refresh the
        receive timestamp."""
        self.malformed_count += 1

    def check(self, vehicle: VehicleState, reference_yaw: float, t: int) -> Verdict:
        """Evaluate both rules against the current instant. The receive
        gap is strict (exactly at threshold is fine); attitude bounds are
        strict as well (error equal to the bound passes)."""
        threshold = ticks_from_s(self.config.rx_interval_threshold_s)
        gap = t - self.last_cce_rx
        if gap > threshold:
            return Verdict(False, Rule.RX_INTERVAL, gap / TICKS_PER_SECOND)
        err = attitude_error(tuple(vehicle.attitude), reference_yaw)
        bounds = (self.config.attitude_bound_roll,
                  self.config.attitude_bound_pitch,
                  self.config.attitude_bound_yaw)
        for e, bound in zip(err, bounds):
            if abs(e) > bound:
                return Verdict(False, Rule.ATTITUDE, abs(e))
        return Verdict(True)

    def switch_to_safety(self, t: int, rule: Rule | None = None, measured: float = 0.0) -> None:
        """Kill the receiving path and latch the safety controller. A
        second call is a no-op with a logged warning."""
        if self.active_source is ControlSource.SAFETY:
            self.violation_log.append(MonitorEvent(t, "warning", "switch while already on safety"))
            return
        self.active_source = ControlSource.SAFETY
        self.receiver_alive = False
        self.switch_tick = t
        detail = f"rule={rule.value} measured={measured:.6g}" if rule else "manual"
        self.violation_log.append(MonitorEvent(t, "violation", detail))
        self.violation_log.append(MonitorEvent(t, "switch", "actuation source -> safety"))

    def recover(self, t: int) -> bool:
        """Re-arm the container path. Only available when the recovery
        flag is set; off by default and excluded from the shipped
        scenarios."""
        if not self.config.allow_recovery:
            return False
        self.active_source = ControlSource.CCE
        self.receiver_alive = True
        self.last_cce_rx = t
        self.violation_log.append(MonitorEvent(t, "warning", "recovered to container output"))
        return True

    def select_output(
        self,
        safety_out: tuple[float, float, float, float],
    ) -> tuple[tuple[float, float, float, float], ControlSource]:
        """Choose the throttle vector to actuate this tick. Before the
        first valid container frame arrives the safety controller flies
        (cold-start rule); afterwards the latched source decides. A stale
        container output is reused until the receive-interval rule trips."""
        if self.active_source is ControlSource.CCE and self.has_received:
            assert self.cce_candidate is not None
            if not all(math.isfinite(v) for v in self.cce_candidate.throttle):
                return safety_out, ControlSource.SAFETY
            return self.cce_candidate.throttle, ControlSource.CCE
        return safety_out, ControlSource.SAFETY
