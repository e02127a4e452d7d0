"""The two Simplex controllers.

complex_control is the feature-rich position-mode cascade that runs in
the governed container task: position PID -> desired acceleration ->
desired tilt and thrust -> attitude P -> rate PID -> X-quad mixer. It
flies to a 3D setpoint with a yaw hold.

safety_control is the minimal verified fallback that runs on the host:
PD attitude hold to level, yaw hold, altitude PD to the altitude
captured at switchover. It has no horizontal position loop; lateral
drift is tolerated in exchange for simplicity.

Both are pure functions of (sensor bundle, reference, state, gains, dt)
so the scheduler alone decides when they run. Derivative terms use
measurements, not errors, to avoid setpoint kick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .plant import PhysicalParams, wrap_angle

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Setpoint:
    position: tuple[float, float, float] = (0.0, 0.0, 1.5)
    yaw: float = 0.0


@dataclass
class SensorBundle:
    """Latest measurements available to a controller, each with its
    emission timestamp in ticks. Missing sensors are None until the
    first sample arrives."""

    accel: tuple[float, float, float] | None = None
    gyro: tuple[float, float, float] | None = None
    attitude: tuple[float, float, float] | None = None
    imu_t: int = -1
    baro_alt: float | None = None
    baro_t: int = -1
    gps_pos: tuple[float, float, float] | None = None
    gps_vel: tuple[float, float, float] | None = None
    gps_t: int = -1
    rc_channels: tuple[float, float, float, float] | None = None
    rc_mode: int = 0
    rc_t: int = -1

    def complete(self) -> bool:
        return (
            self.attitude is not None
            and self.gyro is not None
            and self.baro_alt is not None
            and self.gps_pos is not None
            and self.gps_vel is not None
        )

    def finite(self) -> bool:
        isfinite = math.isfinite
        for v in (self.accel, self.gyro, self.attitude, self.gps_pos, self.gps_vel):
            if v is not None and not (isfinite(v[0]) and isfinite(v[1]) and isfinite(v[2])):
                return False
        return self.baro_alt is None or isfinite(self.baro_alt)


@dataclass
class ControllerGains:
    # position loop: error (m) -> desired accel (m/s^2)
    pos_kp: tuple[float, float, float] = (1.6, 1.6, 5.0)
    pos_ki: tuple[float, float, float] = (0.02, 0.02, 0.6)
    pos_kd: tuple[float, float, float] = (2.0, 2.0, 3.6)  # on measured velocity
    # attitude loop: error (rad) -> rate setpoint (rad/s)
    att_kp: tuple[float, float, float] = (9.0, 9.0, 4.0)
    # rate loop: error (rad/s) -> angular accel (rad/s^2)
    rate_kp: tuple[float, float, float] = (55.0, 55.0, 30.0)
    rate_ki: tuple[float, float, float] = (8.0, 8.0, 4.0)
    rate_kd: tuple[float, float, float] = (0.8, 0.8, 0.0)  # on measured rate
    integrator_clamp: float = 2.0
    max_tilt_cmd: float = math.radians(25.0)
    max_accel_xy: float = 4.0   # m/s^2
    max_accel_z: float = 5.0    # m/s^2
    # safety controller (attitude + altitude hold)
    safe_att_kp: tuple[float, float, float] = (8.0, 8.0, 3.0)
    safe_att_kd: tuple[float, float, float] = (5.5, 5.5, 2.5)  # on body rates
    safe_alt_kp: float = 4.0
    safe_alt_kd: float = 3.0

    def validate(self) -> None:
        for name in ("pos_kp", "pos_ki", "pos_kd", "att_kp", "rate_kp",
                     "rate_ki", "rate_kd", "safe_att_kp", "safe_att_kd"):
            if any(g < 0 for g in getattr(self, name)):
                raise ValueError(f"{name} must be non-negative")
        if self.integrator_clamp <= 0:
            raise ValueError("integrator_clamp must be positive")


@dataclass
class ControllerState:
    pos_integ: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rate_integ: tuple[float, float, float] = (0.0, 0.0, 0.0)
    last_rate: tuple[float, float, float] = (0.0, 0.0, 0.0)
    last_output: tuple[float, float, float, float] | None = None
    fault: bool = False

    def copy(self) -> "ControllerState":
        return ControllerState(
            self.pos_integ, self.rate_integ, self.last_rate,
            self.last_output, self.fault,
        )


def attitude_error(
    attitude: tuple[float, float, float], reference_yaw: float
) -> tuple[float, float, float]:
    """Wrapped (roll, pitch, yaw) errors against level flight at the
    reference yaw. Each component lies in (-pi, pi]."""
    return (
        wrap_angle(attitude[0]),
        wrap_angle(attitude[1]),
        wrap_angle(attitude[2] - reference_yaw),
    )


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def _hold_or_hover(st: ControllerState, params: PhysicalParams):
    out = st.last_output
    if out is None:
        h = params.hover_throttle()
        out = (h, h, h, h)
    faulted = st.copy()
    faulted.fault = True
    return out, faulted


def _mix(
    thrust_n: float,
    aa_x: float, aa_y: float, aa_z: float,
    params: PhysicalParams,
) -> tuple[float, float, float, float]:
    """X-quad mixer: total thrust (N) and body angular accelerations
    (rad/s^2) to four throttles saturated into [0, 1]."""
    ix, iy, iz = params.inertia_diag
    d = params.arm_length / _SQRT2
    rx = aa_x * ix / (4.0 * d)             # tau_x split over 4 arms
    ry = aa_y * iy / (4.0 * d)
    rz = aa_z * iz / (4.0 * params.torque_coeff)
    base = thrust_n / 4.0
    t0 = base + rx - ry + rz   # (+x, +y), spin +
    t1 = base - rx - ry - rz   # (+x, -y), spin -
    t2 = base - rx + ry + rz   # (-x, -y), spin +
    t3 = base + rx + ry - rz   # (-x, +y), spin -
    m = params.max_thrust_per_motor
    return (
        _clamp(t0 / m, 0.0, 1.0),
        _clamp(t1 / m, 0.0, 1.0),
        _clamp(t2 / m, 0.0, 1.0),
        _clamp(t3 / m, 0.0, 1.0),
    )


def complex_control(
    bundle: SensorBundle,
    sp: Setpoint,
    st: ControllerState,
    gains: ControllerGains,
    params: PhysicalParams,
    dt: float,
) -> tuple[tuple[float, float, float, float], ControllerState]:
    """Position-mode cascade. Returns (throttle, next state).

    Non-finite or incomplete sensor data holds the previous output and
    flags a fault instead of propagating garbage to the motors.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not bundle.complete() or not bundle.finite():
        return _hold_or_hover(st, params)

    g = params.gravity
    clamp = gains.integrator_clamp
    px, py, pz = bundle.gps_pos
    vx, vy, vz = bundle.gps_vel
    roll, pitch, yaw = bundle.attitude
    gx, gy, gz = bundle.gyro

    # Position loop. Barometer drives the fast altitude channel.
    ex = sp.position[0] - px
    ey = sp.position[1] - py
    ez = sp.position[2] - float(bundle.baro_alt)
    i0 = _clamp(st.pos_integ[0] + ex * dt, -clamp, clamp)
    i1 = _clamp(st.pos_integ[1] + ey * dt, -clamp, clamp)
    i2 = _clamp(st.pos_integ[2] + ez * dt, -clamp, clamp)
    ax = _clamp(gains.pos_kp[0] * ex + gains.pos_ki[0] * i0 - gains.pos_kd[0] * vx,
                -gains.max_accel_xy, gains.max_accel_xy)
    ay = _clamp(gains.pos_kp[1] * ey + gains.pos_ki[1] * i1 - gains.pos_kd[1] * vy,
                -gains.max_accel_xy, gains.max_accel_xy)
    az = _clamp(gains.pos_kp[2] * ez + gains.pos_ki[2] * i2 - gains.pos_kd[2] * vz,
                -gains.max_accel_z, gains.max_accel_z)

    # Desired tilt from the horizontal acceleration demand (small-angle
    # inversion of the thrust direction), yaw-rotated into body terms.
    cy, sy = math.cos(yaw), math.sin(yaw)
    pitch_des = _clamp((ax * cy + ay * sy) / g, -gains.max_tilt_cmd, gains.max_tilt_cmd)
    roll_des = _clamp((ax * sy - ay * cy) / g, -gains.max_tilt_cmd, gains.max_tilt_cmd)

    tilt = math.cos(roll) * math.cos(pitch)
    if tilt < 0.5:
        tilt = 0.5
    thrust_n = _clamp(params.mass * (g + az) / tilt,
                      0.0, 4.0 * params.max_thrust_per_motor)

    # attitude P -> body rate setpoints
    rs_x = gains.att_kp[0] * wrap_angle(roll_des - roll)
    rs_y = gains.att_kp[1] * wrap_angle(pitch_des - pitch)
    rs_z = gains.att_kp[2] * wrap_angle(sp.yaw - yaw)

    # rate PID -> angular accelerations
    re_x, re_y, re_z = rs_x - gx, rs_y - gy, rs_z - gz
    r0 = _clamp(st.rate_integ[0] + re_x * dt, -clamp, clamp)
    r1 = _clamp(st.rate_integ[1] + re_y * dt, -clamp, clamp)
    r2 = _clamp(st.rate_integ[2] + re_z * dt, -clamp, clamp)
    aa_x = (gains.rate_kp[0] * re_x + gains.rate_ki[0] * r0
            - gains.rate_kd[0] * (gx - st.last_rate[0]) / dt)
    aa_y = (gains.rate_kp[1] * re_y + gains.rate_ki[1] * r1
            - gains.rate_kd[1] * (gy - st.last_rate[1]) / dt)
    aa_z = (gains.rate_kp[2] * re_z + gains.rate_ki[2] * r2
            - gains.rate_kd[2] * (gz - st.last_rate[2]) / dt)

    out = _mix(thrust_n, aa_x, aa_y, aa_z, params)
    nxt = ControllerState(
        pos_integ=(i0, i1, i2),
        rate_integ=(r0, r1, r2),
        last_rate=(gx, gy, gz),
        last_output=out,
        fault=False,
    )
    return out, nxt


def safety_control(
    bundle: SensorBundle,
    hold: Setpoint,
    st: ControllerState,
    gains: ControllerGains,
    params: PhysicalParams,
    dt: float,
) -> tuple[tuple[float, float, float, float], ControllerState]:
    """Attitude-and-altitude hold. hold.position[2] is the captured
    altitude, hold.yaw the captured heading; roll and pitch references
    are level."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if bundle.attitude is None or bundle.gyro is None or bundle.baro_alt is None \
            or not bundle.finite():
        return _hold_or_hover(st, params)

    roll, pitch, yaw = bundle.attitude
    gx, gy, gz = bundle.gyro
    e_roll, e_pitch, e_yaw = attitude_error((roll, pitch, yaw), hold.yaw)

    aa_x = -gains.safe_att_kp[0] * e_roll - gains.safe_att_kd[0] * gx
    aa_y = -gains.safe_att_kp[1] * e_pitch - gains.safe_att_kd[1] * gy
    aa_z = -gains.safe_att_kp[2] * e_yaw - gains.safe_att_kd[2] * gz

    alt_err = hold.position[2] - float(bundle.baro_alt)
    vz = bundle.gps_vel[2] if bundle.gps_vel is not None else 0.0
    a_z = _clamp(gains.safe_alt_kp * alt_err - gains.safe_alt_kd * vz,
                 -gains.max_accel_z, gains.max_accel_z)
    tilt = math.cos(roll) * math.cos(pitch)
    if tilt < 0.5:
        tilt = 0.5
    thrust_n = _clamp(params.mass * (params.gravity + a_z) / tilt,
                      0.0, 4.0 * params.max_thrust_per_motor)

    out = _mix(thrust_n, aa_x, aa_y, aa_z, params)
    nxt = ControllerState(
        pos_integ=st.pos_integ,
        rate_integ=st.rate_integ,
        last_rate=(gx, gy, gz),
        last_output=out,
        fault=False,
    )
    return out, nxt


def capture_hold(bundle: SensorBundle, fallback: Setpoint) -> Setpoint:
    """Hold reference for the safety controller at switchover time: the
    altitude is captured where the vehicle is, while roll, pitch and yaw
    steer back to the reference so the attitude envelope is re-entered
    rather than frozen at the violated heading."""
    alt = bundle.baro_alt if bundle.baro_alt is not None else fallback.position[2]
    return replace(fallback, position=(0.0, 0.0, float(alt)))
