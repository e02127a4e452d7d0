"""Scripted DoS attack injectors.

Three attack kinds run from inside the container environment:

  MemBandwidthAttack  a task that sweeps large arrays, loading the
                      shared memory controller from a container core.
  UdpFloodAttack      blasts frames at the host ingress link; payloads
                      are either garbage bytes or validly framed motor
                      commands with hostile bodies (the harder case for
                      the monitor, since they refresh its receive
                      timestamp while steering the vehicle).
  ControllerKillAttack stops the container controller task outright.

Attacks are installed against an AttackSurface that exposes only
container-side handles (its cores, its task, its single uplink), so an
attack cannot reach host cores, host tasks or monitor state even by
construction. Installing an attack that names a host core is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .channel import Link
from .governor import Governor, TaskSpec
from .kernel import Engine, RngStream, ticks_from_s
from .protocol import HCE_INGRESS_PORT, MessageKind, MotorCommand, encode


class TrustBoundaryError(ValueError):
    """An attack tried to reach outside the container environment."""


@dataclass(frozen=True)
class MemBandwidthAttack:
    start_s: float
    duration_s: float
    mem_demand_rate: float  # accesses per second
    on_core: int = 3

    kind = "mem_bandwidth"


@dataclass(frozen=True)
class UdpFloodAttack:
    start_s: float
    duration_s: float
    rate: float              # frames per second
    frame_size: int = 29
    target_port: int = HCE_INGRESS_PORT
    variant: str = "garbage"  # or "valid"

    kind = "udp_flood"


@dataclass(frozen=True)
class ControllerKillAttack:
    at_s: float

    kind = "controller_kill"


AttackSpec = MemBandwidthAttack | UdpFloodAttack | ControllerKillAttack

ATTACKER_TASK_PRIORITY = 1  # below everything else in the container
ATTACK_JOB_PERIOD_S = 0.002  # demand batch size; rate * period accesses per job


@dataclass
class AttackSurface:
    """Container-side handles an attack is allowed to touch."""

    engine: Engine
    governor: Governor
    cce_cores: tuple[int, ...]
    controller_task: str
    uplink: Link           # the one container -> host link
    uplink_port: int
    horizon_ticks: int
    stop_controller: Callable[[], None]


# Hostile motor bodies cycled by the valid-frame flood. The (a, b, a, b)
# shape is roll/pitch neutral on the X-quad mixer but spins the vehicle
# in yaw while holding roughly hover thrust, so the heading error walks
# out of the monitor's envelope while the frames look perfectly healthy.
_HOSTILE_PATTERNS = (
    (0.52, 0.32, 0.52, 0.32),
    (0.55, 0.35, 0.55, 0.35),
    (0.50, 0.30, 0.50, 0.30),
)


def flood_payload(
    rng: RngStream, variant: str, frame_size: int, seq: int, t: int
) -> bytes:
    """One flood frame. The garbage variant is random bytes of the
    configured size; the valid variant is a correctly framed motor
    command with an attacker-chosen body."""
    if variant == "valid":
        pattern = _HOSTILE_PATTERNS[seq % len(_HOSTILE_PATTERNS)]
        return encode(MessageKind.MOTOR, MotorCommand(pattern, True), seq, t)
    return rng.randbytes(max(frame_size, 1))


def install(attack: AttackSpec, surface: AttackSurface) -> None:
    """Register an attack's events on the simulation timeline.

    Raises TrustBoundaryError when the attack names a resource outside
    the container (a host core or a foreign port).
    """
    if isinstance(attack, MemBandwidthAttack):
        _install_mem(attack, surface)
    elif isinstance(attack, UdpFloodAttack):
        _install_flood(attack, surface)
    elif isinstance(attack, ControllerKillAttack):
        _install_kill(attack, surface)
    else:
        raise TypeError(f"unknown attack {attack!r}")


def _install_mem(attack: MemBandwidthAttack, surface: AttackSurface) -> None:
    if attack.on_core not in surface.cce_cores:
        raise TrustBoundaryError(
            f"memory attack pinned to core {attack.on_core}, "
            f"container cpuset is {sorted(surface.cce_cores)}"
        )
    if attack.mem_demand_rate < 0:
        raise ValueError("mem_demand_rate must be non-negative")
    if attack.mem_demand_rate == 0:
        return  # a zero-intensity attack leaves no trace
    spec = TaskSpec(
        name="attacker_membw",
        core=attack.on_core,
        priority=ATTACKER_TASK_PRIORITY,
        period_s=ATTACK_JOB_PERIOD_S,
        cpu_work_s=0.0,
        mem_demand=attack.mem_demand_rate * ATTACK_JOB_PERIOD_S,
    )
    surface.governor.register_task(spec, overrun="skip")
    start = ticks_from_s(attack.start_s)
    until = min(ticks_from_s(attack.start_s + attack.duration_s),
                surface.horizon_ticks)
    surface.governor.activate_periodic("attacker_membw", start, until)


def _install_flood(attack: UdpFloodAttack, surface: AttackSurface) -> None:
    if attack.target_port != surface.uplink_port:
        raise TrustBoundaryError(
            f"flood targets port {attack.target_port}; the container can "
            f"only reach port {surface.uplink_port}"
        )
    if attack.rate <= 0 or attack.duration_s <= 0:
        return
    if attack.variant not in ("garbage", "valid"):
        raise ValueError(f"unknown flood variant {attack.variant!r}")
    engine = surface.engine
    rng = engine.rng("attack/udp_flood")
    period = max(1, ticks_from_s(1.0 / attack.rate))
    start = ticks_from_s(attack.start_s)
    until = min(ticks_from_s(attack.start_s + attack.duration_s),
                surface.horizon_ticks)
    state = {"seq": 0}

    def blast():
        frame = flood_payload(rng, attack.variant, attack.frame_size,
                              state["seq"], engine.now)
        state["seq"] = (state["seq"] + 1) & 0xFF
        surface.uplink.send(frame)

    engine.every(period, blast, start=start, until=until)


def _install_kill(attack: ControllerKillAttack, surface: AttackSurface) -> None:
    at = ticks_from_s(attack.at_s)
    surface.engine.schedule_at(at, surface.stop_controller)
