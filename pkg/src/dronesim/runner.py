"""End-to-end run orchestration.

run() builds one engine per scenario, wires plant, links, governor,
monitor and both controllers together, injects the attack timeline and
runs to the configured duration or to the first crash. Runs start
in-air, hovering at the setpoint in position-control mode.

Data flow per actuation period (2.5 ms):

  host feeder tasks sample the plant at their nominal rates, frame the
  measurements and send them down the feed link; the container
  controller task runs at 400 Hz on its governed core, consumes the
  sensor snapshot captured when the job was released, and sends a motor
  frame back up the rate-limited motor link; the host receiver decodes
  arriving frames into the monitor; the actuation event asks the
  monitor which output to apply (the safety controller computes its
  own output every tick regardless) and steps the plant.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import attacks as attacks_mod
from .channel import Link
from .control import (
    ControllerState,
    SensorBundle,
    Setpoint,
    capture_hold,
    complex_control,
    safety_control,
)
from .governor import Governor, TaskSpec
from .kernel import Engine, TICKS_PER_SECOND, ticks_from_s
from .monitor import ControlSource, Monitor
from .plant import (
    CrashLimits,
    VehicleState,
    is_crashed,
    sample_baro,
    sample_gps,
    sample_imu,
    step,
)
from .protocol import (
    BaroSample,
    DecodeError,
    GpsSample,
    ImuSample,
    MessageKind,
    MotorCommand,
    RcSample,
    decode,
    encode,
)
from .scenario import TRAJECTORY_HZ, Scenario

ACTUATION_PERIOD_S = 0.0025
CONTROLLER_PERIOD_S = 0.0025

OUTCOME_STABLE = "STABLE"
OUTCOME_SWITCHED_STABLE = "SWITCHED_STABLE"
OUTCOME_CRASHED = "CRASHED"

CSV_HEADER = "t,x,y,z,roll,pitch,yaw,active_source"


@dataclass
class RunLog:
    scenario_name: str = ""
    seed: int = 0
    duration_s: float = 0.0
    outcome: str = OUTCOME_STABLE
    crash_time_s: float | None = None
    switch_time_s: float | None = None
    trajectory: list[list] = field(default_factory=list)  # [t,x,y,z,r,p,y,src]
    monitor_events: list[list] = field(default_factory=list)  # [t_s, kind, detail]
    frame_counts: dict = field(default_factory=dict)
    link_stats: dict = field(default_factory=dict)
    task_summary: dict = field(default_factory=dict)
    memguard_summary: dict = field(default_factory=dict)
    malformed_frames: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "RunLog":
        return cls(**json.loads(text))

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for row in self.trajectory:
            t, x, y, z, roll, pitch, yaw, src = row
            lines.append(
                f"{t:.6f},{x:.6f},{y:.6f},{z:.6f},"
                f"{roll:.6f},{pitch:.6f},{yaw:.6f},{src}"
            )
        return "\n".join(lines) + "\n"


def export(log: RunLog, fmt: str, path: str | Path) -> None:
    """Write a completed run log as csv or json."""
    path = Path(path)
    if fmt == "csv":
        path.write_text(log.to_csv())
    elif fmt == "json":
        path.write_text(log.to_json() + "\n")
    else:
        raise ValueError(f"unknown export format {fmt!r}")


class Simulation:
    """One scenario wired onto one engine. Mutable only through events."""

    def __init__(self, scenario: Scenario, record_periods: bool = False):
        scenario.validate()
        self.scenario = scenario
        sc = scenario
        self.engine = Engine(sc.seed)
        self.params = sc.plant
        self.gains = sc.gains
        self.setpoint = sc.setpoint
        self.crash_limits = CrashLimits(
            max_tilt=sc.crash.max_tilt,
            max_horizontal_dist=sc.crash.max_horizontal_dist,
            reference_xy=(sc.setpoint.position[0], sc.setpoint.position[1]),
            ground_z=sc.crash.ground_z,
        )
        self.state = VehicleState(
            position=np.array(sc.setpoint.position, dtype=float),
            attitude=np.array([0.0, 0.0, sc.setpoint.yaw]),
        )
        self.governor = Governor(
            self.engine, sc.memguard, sc.memory_service_rate,
            record_periods=record_periods,
        )
        self.feed_link = Link(self.engine, sc.feed_link, "feed")
        self.motor_link = Link(self.engine, sc.motor_link, "motor")
        self.monitor = Monitor(sc.monitor)
        self.hold_sp = Setpoint(
            (0.0, 0.0, sc.setpoint.position[2]), sc.setpoint.yaw
        )
        self.cce_bundle = SensorBundle()     # container view, fed by the link
        self.cce_state = ControllerState()
        self.safety_state = ControllerState()
        self.frame_counts = {k.name: 0 for k in MessageKind}
        self._seq = {k: 0 for k in MessageKind}
        self.crash_tick: int | None = None
        self.log = RunLog(sc.name, sc.seed, sc.duration_s)
        self.horizon = ticks_from_s(sc.duration_s)
        self._noise_rng = self.engine.rng("sensors/noise")
        self._build()

    # -- wiring --------------------------------------------------------

    def _send(self, kind: MessageKind, body, link: Link) -> None:
        frame = encode(kind, body, self._seq[kind], self.engine.now)
        self._seq[kind] = (self._seq[kind] + 1) & 0xFF
        self.frame_counts[kind.name] += 1
        link.send(frame)

    @staticmethod
    def _sat16(vec, lsb=1e-3):
        # drivers saturate at the sensor's fixed-point range, they do not fault
        lim = 32767 * lsb
        return tuple(-lim if v < -lim else lim if v > lim else v for v in vec)

    def _feeder_specs(self):
        sc = self.scenario
        hce = sc.hce_cores
        cpu = sc.tasks.feeder_cpu_us * 1e-6
        mem = sc.tasks.feeder_mem
        rates = {"imu": 250, "baro": 50, "gps": 10, "rc": 50}
        for i, (name, rate) in enumerate(rates.items()):
            yield TaskSpec(
                name=f"feeder_{name}",
                core=hce[i % len(hce)],
                priority=90,
                period_s=1.0 / rate,
                cpu_work_s=cpu,
                mem_demand=mem,
            )

    def _build(self) -> None:
        sc = self.scenario
        gov = self.governor

        def send_imu():
            accel, gyro, att = sample_imu(self.state, sc.noise, self._noise_rng)
            body = ImuSample(self._sat16(accel), self._sat16(gyro), att)
            self._send(MessageKind.IMU, body, self.feed_link)

        def send_gps():
            pos, vel = sample_gps(self.state, sc.noise, self._noise_rng)
            body = GpsSample(pos, self._sat16(vel), fix=3, nsat=12)
            self._send(MessageKind.GPS, body, self.feed_link)

        send = {
            "feeder_imu": send_imu,
            "feeder_baro": lambda: self._send(
                MessageKind.BARO,
                BaroSample(sample_baro(self.state, sc.noise, self._noise_rng), 101325, 2000),
                self.feed_link),
            "feeder_gps": send_gps,
            "feeder_rc": lambda: self._send(
                MessageKind.RC, RcSample((0.0, 0.0, 0.0, 0.0), 2), self.feed_link),
        }
        for spec in self._feeder_specs():
            sender = send[spec.name]
            gov.register_task(
                spec,
                on_complete=lambda job, fn=sender: fn(),
                overrun="skip",
            )
            gov.activate_periodic(spec.name, start_tick=0, until_tick=self.horizon)

        # placeholder host load per the reference priority ladder
        hce0 = sc.hce_cores[0]
        gov.register_task(TaskSpec("interrupt_stub", hce0, 40, period_s=0.02), overrun="skip")
        gov.activate_periodic("interrupt_stub", 0, self.horizon)
        gov.register_task(TaskSpec("safety_stub", hce0, 20, period_s=0.01), overrun="skip")
        gov.activate_periodic("safety_stub", 0, self.horizon)

        ctl = TaskSpec(
            name="cce_controller",
            core=sc.tasks.controller_core,
            priority=sc.tasks.controller_priority,
            period_s=CONTROLLER_PERIOD_S,
            cpu_work_s=sc.tasks.controller_cpu_us * 1e-6,
            mem_demand=sc.tasks.controller_mem,
        )
        gov.register_task(ctl, on_complete=self._controller_job_done, overrun="queue")
        gov.activate_periodic(
            "cce_controller", 0, self.horizon,
            payload_fn=lambda: self._snapshot_bundle(),
        )

        self.feed_link.on_deliver(self._cce_receive)
        self.motor_link.on_deliver(self._hce_receive)

        self.engine.every(ticks_from_s(ACTUATION_PERIOD_S), self._actuate,
                          start=ticks_from_s(ACTUATION_PERIOD_S), until=self.horizon)
        self.engine.every(ticks_from_s(sc.monitor.check_period_s), self._monitor_check,
                          start=0, until=self.horizon)
        self.engine.every(ticks_from_s(1.0 / TRAJECTORY_HZ), self._sample_trajectory,
                          start=0, until=self.horizon)

        surface = attacks_mod.AttackSurface(
            engine=self.engine,
            governor=gov,
            cce_cores=sc.cce_cores,
            controller_task="cce_controller",
            uplink=self.motor_link,
            uplink_port=attacks_mod.HCE_INGRESS_PORT,
            horizon_ticks=self.horizon,
            stop_controller=lambda: gov.deactivate("cce_controller"),
        )
        for attack in sc.attacks:
            attacks_mod.install(attack, surface)

    # -- container side --------------------------------------------------

    def _snapshot_bundle(self) -> SensorBundle:
        b = self.cce_bundle
        return SensorBundle(
            accel=b.accel, gyro=b.gyro, attitude=b.attitude, imu_t=b.imu_t,
            baro_alt=b.baro_alt, baro_t=b.baro_t,
            gps_pos=b.gps_pos, gps_vel=b.gps_vel, gps_t=b.gps_t,
            rc_channels=b.rc_channels, rc_mode=b.rc_mode, rc_t=b.rc_t,
        )

    def _cce_receive(self, frame: bytes, t: int) -> None:
        try:
            kind, body, _seq, _ts = decode(frame)
        except DecodeError:
            return
        b = self.cce_bundle
        if kind == MessageKind.IMU:
            b.accel, b.gyro, b.attitude, b.imu_t = body.accel, body.gyro, body.attitude, t
        elif kind == MessageKind.BARO:
            b.baro_alt, b.baro_t = body.alt_m, t
        elif kind == MessageKind.GPS:
            b.gps_pos, b.gps_vel, b.gps_t = body.pos_m, body.vel_ms, t
        elif kind == MessageKind.RC:
            b.rc_channels, b.rc_mode, b.rc_t = body.channels, body.mode, t

    def _controller_job_done(self, job) -> None:
        bundle = job.payload if job.payload is not None else self._snapshot_bundle()
        out, self.cce_state = complex_control(
            bundle, self.setpoint, self.cce_state, self.gains,
            self.params, CONTROLLER_PERIOD_S,
        )
        self._send(MessageKind.MOTOR, MotorCommand(out, True), self.motor_link)

    # -- host side -------------------------------------------------------

    def _hce_receive(self, frame: bytes, t: int) -> None:
        try:
            kind, body, _seq, _ts = decode(frame)
        except DecodeError:
            self.monitor.on_malformed_frame(t)
            return
        if kind != MessageKind.MOTOR:
            self.monitor.on_malformed_frame(t)
            return
        self.monitor.on_cce_motor_frame(body, t)

    def _host_bundle(self) -> SensorBundle:
        accel, gyro, att = sample_imu(self.state, self.scenario.noise, self._noise_rng)
        pos, vel = sample_gps(self.state, self.scenario.noise, self._noise_rng)
        return SensorBundle(
            accel=accel, gyro=gyro, attitude=att, imu_t=self.engine.now,
            baro_alt=sample_baro(self.state, self.scenario.noise, self._noise_rng),
            baro_t=self.engine.now,
            gps_pos=pos, gps_vel=vel, gps_t=self.engine.now,
        )

    def _actuate(self) -> None:
        host = self._host_bundle()
        safety_out, self.safety_state = safety_control(
            host, self.hold_sp, self.safety_state, self.gains,
            self.params, ACTUATION_PERIOD_S,
        )
        out, _src = self.monitor.select_output(safety_out)
        self.state = step(self.state, out, self.params, ACTUATION_PERIOD_S)
        if is_crashed(self.state, self.crash_limits):
            self.crash_tick = self.engine.now
            self._sample_trajectory()
            self.engine.stop()

    def _monitor_check(self) -> None:
        mon = self.monitor
        if mon.active_source is not ControlSource.CCE:
            return
        verdict = mon.check(self.state, self.setpoint.yaw, self.engine.now)
        if not verdict.ok:
            self.hold_sp = capture_hold(self._host_bundle(), self.hold_sp)
            mon.switch_to_safety(self.engine.now, verdict.violated_rule, verdict.measured)

    # -- logging -----------------------------------------------------------

    def _sample_trajectory(self) -> None:
        t = self.engine.now / TICKS_PER_SECOND
        if self.log.trajectory and self.log.trajectory[-1][0] == t:
            return
        src = self.monitor.active_source.value if self.monitor.has_received \
            or self.monitor.active_source is ControlSource.SAFETY else "safety"
        self.log.trajectory.append([
            t,
            float(self.state.position[0]),
            float(self.state.position[1]),
            float(self.state.position[2]),
            float(self.state.attitude[0]),
            float(self.state.attitude[1]),
            float(self.state.attitude[2]),
            src,
        ])

    def _finalize(self) -> RunLog:
        self.governor.finalize_records()
        log = self.log
        if self.crash_tick is not None:
            log.outcome = OUTCOME_CRASHED
            log.crash_time_s = self.crash_tick / TICKS_PER_SECOND
        elif self.monitor.switch_tick is not None:
            log.outcome = OUTCOME_SWITCHED_STABLE
        else:
            log.outcome = OUTCOME_STABLE
        if self.monitor.switch_tick is not None:
            log.switch_time_s = self.monitor.switch_tick / TICKS_PER_SECOND
        log.monitor_events = [
            [ev.tick / TICKS_PER_SECOND, ev.kind, ev.detail]
            for ev in self.monitor.violation_log
        ]
        log.frame_counts = dict(self.frame_counts)
        log.malformed_frames = self.monitor.malformed_count
        for link in (self.feed_link, self.motor_link):
            s = link.stats
            log.link_stats[link.name] = {
                "sent": s.sent, "delivered": s.delivered,
                "dropped_ratelimit": s.dropped_ratelimit,
                "dropped_overflow": s.dropped_overflow,
                "in_flight": s.in_flight,
            }
        summary: dict = {}
        for rec in self.governor.job_records:
            entry = summary.setdefault(
                rec.task, {"jobs": 0, "completed": 0, "max_response_us": 0.0,
                           "total_response_us": 0.0}
            )
            entry["jobs"] += 1
            if rec.response_ticks is not None:
                entry["completed"] += 1
                entry["max_response_us"] = max(entry["max_response_us"],
                                               float(rec.response_ticks))
                entry["total_response_us"] += float(rec.response_ticks)
        for name, entry in summary.items():
            done = entry.pop("completed")
            total = entry.pop("total_response_us")
            entry["completed"] = done
            entry["mean_response_us"] = round(total / done, 3) if done else 0.0
            entry["skipped"] = self.governor.tasks[name].skipped if name in self.governor.tasks else 0
        log.task_summary = summary
        log.memguard_summary = {
            "enabled": self.scenario.memguard.enabled,
            "budget_violations": self.governor.budget_violations,
            "max_served_per_period": [round(v, 3) for v in self.governor.max_served_per_period],
        }
        return log

    def run(self) -> RunLog:
        self.engine.run_until(self.horizon)
        return self._finalize()


def run_sim(scenario: Scenario, record_periods: bool = False) -> Simulation:
    """Run a scenario to completion; returns the Simulation whole so
    callers can inspect raw traces alongside the finalized log."""
    sim = Simulation(scenario, record_periods=record_periods)
    sim.run()
    return sim


def run(scenario: Scenario) -> RunLog:
    """Run a scenario and return its RunLog."""
    return run_sim(scenario).log
