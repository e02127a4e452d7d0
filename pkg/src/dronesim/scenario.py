"""Scenario files: a flat, human-editable key = value format.

Lines are `key = value` pairs; `#` starts a comment; blank lines are
ignored. Every key must be known, so a typo fails the load instead of
silently running a different experiment. The repeatable `attack` key
appends to the attack timeline:

    attack = mem_bandwidth start=10 duration=45 rate=4e7 core=3
    attack = udp_flood start=8 duration=50 rate=3000 size=29 port=14600 variant=valid
    attack = controller_kill at=12

Keys take SI-ish units spelled in their suffix (`_s`, `_ms`, `_us`,
`_deg`). The full key reference lives in the README; shipped presets
under presets/ double as worked examples.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .attacks import (
    AttackSpec,
    ControllerKillAttack,
    MemBandwidthAttack,
    UdpFloodAttack,
)
from .channel import ChannelConfig
from .control import ControllerGains, Setpoint
from .governor import MemGuardConfig
from .monitor import MonitorConfig
from .plant import CrashLimits, PhysicalParams, SensorNoise
from .protocol import HCE_INGRESS_PORT

N_CORES = 4
TRAJECTORY_HZ = 50


class ScenarioError(ValueError):
    """Parse or semantic error in a scenario; carries file line numbers
    where available."""


@dataclass
class TaskKnobs:
    controller_core: int = 3
    controller_priority: int = 50
    controller_cpu_us: float = 400.0
    controller_mem: float = 2000.0
    feeder_cpu_us: float = 30.0
    feeder_mem: float = 200.0


@dataclass
class Scenario:
    name: str = "unnamed"
    duration_s: float = 60.0
    seed: int = 1
    setpoint: Setpoint = field(default_factory=Setpoint)
    plant: PhysicalParams = field(default_factory=PhysicalParams)
    crash: CrashLimits = field(default_factory=CrashLimits)
    noise: SensorNoise = field(default_factory=SensorNoise)
    gains: ControllerGains = field(default_factory=ControllerGains)
    feed_link: ChannelConfig = field(
        default_factory=lambda: ChannelConfig(bucket_rate=5000.0, bucket_burst=64)
    )
    motor_link: ChannelConfig = field(
        default_factory=lambda: ChannelConfig(bucket_rate=2000.0, bucket_burst=32)
    )
    hce_cores: tuple[int, ...] = (0, 1, 2)
    cce_cores: tuple[int, ...] = (3,)
    tasks: TaskKnobs = field(default_factory=TaskKnobs)
    memory_service_rate: float = 1e7
    memguard: MemGuardConfig = field(default_factory=MemGuardConfig)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    attacks: list[AttackSpec] = field(default_factory=list)

    def copy(self) -> "Scenario":
        return copy.deepcopy(self)

    def validate(self) -> None:
        err = _semantic_errors(self)
        if err:
            raise ScenarioError("; ".join(err))


def _deg(v: float) -> float:
    return math.radians(v)


def _set_tuple_elem(obj, attr: str, index: int, value: float) -> None:
    t = list(getattr(obj, attr))
    t[index] = value
    setattr(obj, attr, tuple(t))


def _pair(obj, attr: str, axes: tuple[int, ...]):
    def setter(sc: Scenario, v: float):
        target = getattr(sc, obj)
        for i in axes:
            _set_tuple_elem(target, attr, i, v)
    return setter


def _scalar(obj, attr: str, conv=lambda v: v):
    def setter(sc: Scenario, v):
        setattr(getattr(sc, obj), attr, conv(v))
    return setter


def _cores(raw: str) -> tuple[int, ...]:
    try:
        cores = tuple(int(tok) for tok in raw.split(",") if tok.strip() != "")
    except ValueError:
        raise ScenarioError(f"core list {raw!r} must be comma-separated integers") from None
    return cores


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ScenarioError(f"expected a boolean, got {raw!r}")


def _setpoint_setter(index: int):
    def setter(sc: Scenario, v: float):
        pos = list(sc.setpoint.position)
        pos[index] = v
        sc.setpoint = Setpoint(tuple(pos), sc.setpoint.yaw)
    return setter


def _setpoint_yaw(sc: Scenario, v: float):
    sc.setpoint = Setpoint(sc.setpoint.position, _deg(v))


def _budget_setter(core: int):
    def setter(sc: Scenario, v: float):
        b = list(sc.memguard.budget_per_core)
        b[core] = v
        sc.memguard.budget_per_core = tuple(b)
    return setter


def _budget_cce(sc: Scenario, v: float):
    b = list(sc.memguard.budget_per_core)
    for core in sc.cce_cores:
        b[core] = v
    sc.memguard.budget_per_core = tuple(b)


# key -> (value parser, setter)
_KEYS: dict = {
    "name": (str, lambda sc, v: setattr(sc, "name", v)),
    "duration_s": (float, lambda sc, v: setattr(sc, "duration_s", v)),
    "seed": (int, lambda sc, v: setattr(sc, "seed", v)),

    "setpoint.x": (float, _setpoint_setter(0)),
    "setpoint.y": (float, _setpoint_setter(1)),
    "setpoint.z": (float, _setpoint_setter(2)),
    "setpoint.yaw_deg": (float, _setpoint_yaw),

    "plant.mass_kg": (float, _scalar("plant", "mass")),
    "plant.arm_length_m": (float, _scalar("plant", "arm_length")),
    "plant.inertia_xx": (float, lambda sc, v: _set_tuple_elem(sc.plant, "inertia_diag", 0, v)),
    "plant.inertia_yy": (float, lambda sc, v: _set_tuple_elem(sc.plant, "inertia_diag", 1, v)),
    "plant.inertia_zz": (float, lambda sc, v: _set_tuple_elem(sc.plant, "inertia_diag", 2, v)),
    "plant.max_thrust_per_motor_n": (float, _scalar("plant", "max_thrust_per_motor")),
    "plant.torque_coeff": (float, _scalar("plant", "torque_coeff")),
    "plant.gravity": (float, _scalar("plant", "gravity")),
    "plant.drag_coeff": (float, _scalar("plant", "drag_coeff")),

    "crash.max_tilt_deg": (float, _scalar("crash", "max_tilt", _deg)),
    "crash.max_horizontal_m": (float, _scalar("crash", "max_horizontal_dist")),

    "noise.accel_sigma": (float, _scalar("noise", "accel")),
    "noise.gyro_sigma": (float, _scalar("noise", "gyro")),
    "noise.attitude_sigma": (float, _scalar("noise", "attitude")),
    "noise.baro_sigma_m": (float, _scalar("noise", "baro")),
    "noise.gps_pos_sigma_m": (float, _scalar("noise", "gps_pos")),
    "noise.gps_vel_sigma": (float, _scalar("noise", "gps_vel")),

    "gains.pos_kp_xy": (float, _pair("gains", "pos_kp", (0, 1))),
    "gains.pos_kp_z": (float, _pair("gains", "pos_kp", (2,))),
    "gains.pos_ki_xy": (float, _pair("gains", "pos_ki", (0, 1))),
    "gains.pos_ki_z": (float, _pair("gains", "pos_ki", (2,))),
    "gains.pos_kd_xy": (float, _pair("gains", "pos_kd", (0, 1))),
    "gains.pos_kd_z": (float, _pair("gains", "pos_kd", (2,))),
    "gains.att_kp_rp": (float, _pair("gains", "att_kp", (0, 1))),
    "gains.att_kp_yaw": (float, _pair("gains", "att_kp", (2,))),
    "gains.rate_kp_rp": (float, _pair("gains", "rate_kp", (0, 1))),
    "gains.rate_kp_yaw": (float, _pair("gains", "rate_kp", (2,))),
    "gains.rate_ki_rp": (float, _pair("gains", "rate_ki", (0, 1))),
    "gains.rate_ki_yaw": (float, _pair("gains", "rate_ki", (2,))),
    "gains.rate_kd_rp": (float, _pair("gains", "rate_kd", (0, 1))),
    "gains.rate_kd_yaw": (float, _pair("gains", "rate_kd", (2,))),
    "gains.integrator_clamp": (float, _scalar("gains", "integrator_clamp")),
    "gains.max_tilt_cmd_deg": (float, _scalar("gains", "max_tilt_cmd", _deg)),
    "gains.max_accel_xy": (float, _scalar("gains", "max_accel_xy")),
    "gains.max_accel_z": (float, _scalar("gains", "max_accel_z")),
    "gains.safe_att_kp_rp": (float, _pair("gains", "safe_att_kp", (0, 1))),
    "gains.safe_att_kp_yaw": (float, _pair("gains", "safe_att_kp", (2,))),
    "gains.safe_att_kd_rp": (float, _pair("gains", "safe_att_kd", (0, 1))),
    "gains.safe_att_kd_yaw": (float, _pair("gains", "safe_att_kd", (2,))),
    "gains.safe_alt_kp": (float, _scalar("gains", "safe_alt_kp")),
    "gains.safe_alt_kd": (float, _scalar("gains", "safe_alt_kd")),

    "link.feed.latency_us": (float, _scalar("feed_link", "latency_s", lambda v: v * 1e-6)),
    "link.feed.jitter_us": (float, _scalar("feed_link", "jitter_sigma_s", lambda v: v * 1e-6)),
    "link.feed.capacity": (int, _scalar("feed_link", "queue_capacity")),
    "link.feed.rate": (float, _scalar("feed_link", "bucket_rate")),
    "link.feed.burst": (int, _scalar("feed_link", "bucket_burst")),
    "link.motor.latency_us": (float, _scalar("motor_link", "latency_s", lambda v: v * 1e-6)),
    "link.motor.jitter_us": (float, _scalar("motor_link", "jitter_sigma_s", lambda v: v * 1e-6)),
    "link.motor.capacity": (int, _scalar("motor_link", "queue_capacity")),
    "link.motor.rate": (float, _scalar("motor_link", "bucket_rate")),
    "link.motor.burst": (int, _scalar("motor_link", "bucket_burst")),

    "cores.hce": (_cores, lambda sc, v: setattr(sc, "hce_cores", v)),
    "cores.cce": (_cores, lambda sc, v: setattr(sc, "cce_cores", v)),

    "controller.core": (int, _scalar("tasks", "controller_core")),
    "controller.priority": (int, _scalar("tasks", "controller_priority")),
    "controller.cpu_us": (float, _scalar("tasks", "controller_cpu_us")),
    "controller.mem_accesses": (float, _scalar("tasks", "controller_mem")),
    "feeder.cpu_us": (float, _scalar("tasks", "feeder_cpu_us")),
    "feeder.mem_accesses": (float, _scalar("tasks", "feeder_mem")),

    "memory.service_rate": (float, lambda sc, v: setattr(sc, "memory_service_rate", v)),
    "memguard.enabled": (_bool, _scalar("memguard", "enabled")),
    "memguard.period_ms": (float, _scalar("memguard", "period_s", lambda v: v * 1e-3)),
    "memguard.budget_core0": (float, _budget_setter(0)),
    "memguard.budget_core1": (float, _budget_setter(1)),
    "memguard.budget_core2": (float, _budget_setter(2)),
    "memguard.budget_core3": (float, _budget_setter(3)),
    "memguard.budget": (float, _budget_cce),

    "monitor.rx_threshold_ms": (float, _scalar("monitor", "rx_interval_threshold_s", lambda v: v * 1e-3)),
    "monitor.roll_bound_deg": (float, _scalar("monitor", "attitude_bound_roll", _deg)),
    "monitor.pitch_bound_deg": (float, _scalar("monitor", "attitude_bound_pitch", _deg)),
    "monitor.yaw_bound_deg": (float, _scalar("monitor", "attitude_bound_yaw", _deg)),
    "monitor.check_period_ms": (float, _scalar("monitor", "check_period_s", lambda v: v * 1e-3)),
    "monitor.allow_recovery": (_bool, _scalar("monitor", "allow_recovery")),
}


def _parse_attack(raw: str, lineno: int) -> AttackSpec:
    tokens = raw.split()
    if not tokens:
        raise ScenarioError(f"line {lineno}: empty attack spec")
    kind, kv = tokens[0], {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ScenarioError(f"line {lineno}: attack token {tok!r} is not key=value")
        k, v = tok.split("=", 1)
        kv[k] = v

    def take_float(key, default=None):
        if key not in kv:
            if default is None:
                raise ScenarioError(f"line {lineno}: attack {kind} needs {key}=")
            return default
        try:
            return float(kv.pop(key))
        except ValueError:
            raise ScenarioError(f"line {lineno}: attack field {key} is not a number") from None

    if kind == "mem_bandwidth":
        spec = MemBandwidthAttack(
            start_s=take_float("start"),
            duration_s=take_float("duration"),
            mem_demand_rate=take_float("rate"),
            on_core=int(take_float("core", 3)),
        )
    elif kind == "udp_flood":
        variant = kv.pop("variant", "garbage")
        spec = UdpFloodAttack(
            start_s=take_float("start"),
            duration_s=take_float("duration"),
            rate=take_float("rate"),
            frame_size=int(take_float("size", 29)),
            target_port=int(take_float("port", HCE_INGRESS_PORT)),
            variant=variant,
        )
    elif kind == "controller_kill":
        spec = ControllerKillAttack(at_s=take_float("at"))
    else:
        raise ScenarioError(f"line {lineno}: unknown attack kind {kind!r}")
    if kv:
        raise ScenarioError(
            f"line {lineno}: unknown attack field(s) {', '.join(sorted(kv))}"
        )
    return spec


def parse_scenario(text: str, name_hint: str = "unnamed") -> Scenario:
    """Parse scenario text. Raises ScenarioError with a line number on
    the first malformed or unknown entry; semantic validation runs after
    the whole file is read."""
    sc = Scenario(name=name_hint)
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "attack":
            sc.attacks.append(_parse_attack(value, lineno))
            continue
        if key not in _KEYS:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        conv, setter = _KEYS[key]
        try:
            parsed = conv(value)
        except ScenarioError:
            raise
        except (TypeError, ValueError):
            raise ScenarioError(
                f"line {lineno}: bad value {value!r} for key {key}"
            ) from None
        setter(sc, parsed)
    sc.validate()
    return sc


def apply_override(sc: Scenario, key: str, value: str) -> None:
    """Set one dotted key on an already-loaded scenario (used by sweep
    and --seed style overrides)."""
    if key not in _KEYS:
        raise ScenarioError(f"unknown key {key!r}")
    conv, setter = _KEYS[key]
    try:
        setter(sc, conv(value))
    except ScenarioError:
        raise
    except (TypeError, ValueError):
        raise ScenarioError(f"bad value {value!r} for key {key}") from None


def _semantic_errors(sc: Scenario) -> list[str]:
    errs: list[str] = []
    if sc.duration_s <= 0:
        errs.append("duration_s must be positive")
    for label, cfg in (("plant", sc.plant), ("gains", sc.gains),
                       ("feed link", sc.feed_link), ("motor link", sc.motor_link),
                       ("monitor", sc.monitor)):
        try:
            cfg.validate()
        except ValueError as e:
            errs.append(f"{label}: {e}")
    try:
        sc.memguard.validate(N_CORES)
    except ValueError as e:
        errs.append(f"memguard: {e}")
    all_cores = set(range(N_CORES))
    if not sc.hce_cores or not set(sc.hce_cores) <= all_cores:
        errs.append(f"cores.hce must be a non-empty subset of {sorted(all_cores)}")
    if not sc.cce_cores or not set(sc.cce_cores) <= all_cores:
        errs.append(f"cores.cce must be a non-empty subset of {sorted(all_cores)}")
    if set(sc.hce_cores) & set(sc.cce_cores):
        errs.append("cores.hce and cores.cce must be disjoint")
    if sc.tasks.controller_core not in sc.cce_cores:
        errs.append(
            f"controller.core {sc.tasks.controller_core} is outside the "
            f"container cpuset {sorted(sc.cce_cores)}"
        )
    if sc.memory_service_rate <= 0:
        errs.append("memory.service_rate must be positive")
    for i, attack in enumerate(sc.attacks):
        if isinstance(attack, MemBandwidthAttack):
            if attack.on_core not in sc.cce_cores:
                errs.append(
                    f"attack[{i}]: memory attack on core {attack.on_core} "
                    "violates the trust boundary (not a container core)"
                )
            start = attack.start_s
        elif isinstance(attack, UdpFloodAttack):
            if attack.target_port != HCE_INGRESS_PORT:
                errs.append(
                    f"attack[{i}]: flood target port {attack.target_port} "
                    f"violates the trust boundary (container can only reach "
                    f"{HCE_INGRESS_PORT})"
                )
            start = attack.start_s
        else:
            start = attack.at_s
        if not 0 <= start <= sc.duration_s:
            errs.append(f"attack[{i}]: start time {start} outside [0, {sc.duration_s}]")
    return errs


def load_scenario(path_or_name: str | Path) -> Scenario:
    """Load a scenario from a file path or a shipped preset name."""
    path = Path(path_or_name)
    if path.exists():
        return parse_scenario(path.read_text(), name_hint=path.stem)
    name = str(path_or_name)
    if name in list_presets():
        text = (resources.files("dronesim") / "presets" / f"{name}.scn").read_text()
        return parse_scenario(text, name_hint=name)
    raise ScenarioError(f"no such file or preset: {path_or_name}")


def list_presets() -> list[str]:
    out = []
    for entry in (resources.files("dronesim") / "presets").iterdir():
        if entry.name.endswith(".scn"):
            out.append(entry.name[:-4])
    return sorted(out)
