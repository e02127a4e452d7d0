r"""Quadcopter rigid-body dynamics, sensor sampling and crash detection.

12-state model: position and velocity in a world frame with z up,
ZYX Euler attitude (roll, pitch, yaw) and body rates (p, q, r). Body
frame is x forward, y left, z up. Thrust acts along body z; torques
come from differential thrust through an X-quad mixer; a linear drag
force opposes velocity. Integration is semi-implicit Euler at the
400 Hz actuation period.

Motor layout (viewed from above, x up the page):

        m3   m0          m0 front-left  (+x, +y)   spin +
          \ /            m1 front-right (+x, -y)   spin -
           X             m2 back-right  (-x, -y)   spin +
          / \            m3 back-left   (-x, +y)   spin -
        m2   m1

Spin sign is the yaw reaction torque contributed per unit thrust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import RngStream

TWO_PI = 2.0 * math.pi
_INV_SQRT2 = 1.0 / math.sqrt(2.0)

# X-quad geometry: per-motor (x, y) arm direction factors and yaw
# reaction sign. Arm positions are at 45 degrees, distance arm_length.
MOTOR_X = (+_INV_SQRT2, +_INV_SQRT2, -_INV_SQRT2, -_INV_SQRT2)
MOTOR_Y = (+_INV_SQRT2, -_INV_SQRT2, -_INV_SQRT2, +_INV_SQRT2)
MOTOR_SPIN = (+1.0, -1.0, +1.0, -1.0)


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


@dataclass
class PhysicalParams:
    """Plant constants. Values are configuration, not contract."""

    mass: float = 1.2                  # kg
    arm_length: float = 0.16           # m, center to motor
    inertia_diag: tuple[float, float, float] = (0.011, 0.011, 0.021)  # kg m^2
    max_thrust_per_motor: float = 7.0  # N
    torque_coeff: float = 0.016        # N m yaw reaction per N thrust
    gravity: float = 9.81              # m/s^2
    drag_coeff: float = 0.35           # N s/m, linear

    def validate(self) -> None:
        for name in ("mass", "arm_length", "max_thrust_per_motor",
                     "torque_coeff", "gravity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if any(i <= 0 for i in self.inertia_diag):
            raise ValueError("inertia_diag must be positive")
        if self.drag_coeff < 0:
            raise ValueError("drag_coeff must be non-negative")

    def hover_throttle(self) -> float:
        """Per-motor throttle that exactly balances gravity when level."""
        return self.mass * self.gravity / (4.0 * self.max_thrust_per_motor)


@dataclass
class VehicleState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: np.ndarray = field(default_factory=lambda: np.zeros(3))  # roll, pitch, yaw
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))  # p, q, r

    def copy(self) -> "VehicleState":
        return VehicleState(
            self.position.copy(), self.velocity.copy(),
            self.attitude.copy(), self.body_rates.copy(),
        )

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.position).all()
            and np.isfinite(self.velocity).all()
            and np.isfinite(self.attitude).all()
            and np.isfinite(self.body_rates).all()
        )


def rotation_body_to_world(attitude) -> np.ndarray:
    """R = Rz(yaw) Ry(pitch) Rx(roll)."""
    r, p, y = attitude
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def motor_forces_and_torques(throttle, params: PhysicalParams):
    """Total thrust (N) and body torques (N m) from per-motor throttle."""
    d = params.arm_length
    k = params.torque_coeff
    total = tau_x = tau_y = tau_z = 0.0
    for i in range(4):
        t = throttle[i]
        t = 0.0 if t < 0.0 else 1.0 if t > 1.0 else t
        thrust = t * params.max_thrust_per_motor
        total += thrust
        tau_x += MOTOR_Y[i] * d * thrust
        tau_y -= MOTOR_X[i] * d * thrust
        tau_z += MOTOR_SPIN[i] * k * thrust
    return total, np.array([tau_x, tau_y, tau_z])


def euler_rates(attitude, body_rates):
    r, p, _ = attitude
    pr, qr, rr = body_rates
    cr, sr = math.cos(r), math.sin(r)
    cp = math.cos(p)
    tp = math.tan(p)
    if abs(cp) < 1e-6:
        cp = math.copysign(1e-6, cp)
    return (
        pr + qr * sr * tp + rr * cr * tp,
        qr * cr - rr * sr,
        (qr * sr + rr * cr) / cp,
    )


def step(
    state: VehicleState,
    throttle,
    params: PhysicalParams,
    dt: float,
) -> VehicleState:
    """Advance the plant one step of at most the 2.5 ms actuation period.

    Semi-implicit Euler: accelerations from the current state update the
    velocities, the new velocities update position and attitude.
    """
    if not 0.0 < dt <= 0.0025 + 1e-12:
        raise ValueError(f"dt={dt} outside (0, 2.5 ms]")
    if not state.is_finite():
        raise ValueError("non-finite vehicle state")

    total, tau = motor_forces_and_torques(throttle, params)
    roll, pitch, yaw = state.attitude
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)

    # thrust direction is the third column of R
    acc = total / params.mass
    drag = params.drag_coeff / params.mass
    vx, vy, vz = state.velocity
    ax = acc * (cy * sp * cr + sy * sr) - drag * vx
    ay = acc * (sy * sp * cr - cy * sr) - drag * vy
    az = acc * (cp * cr) - params.gravity - drag * vz

    ix, iy, iz = params.inertia_diag
    p, q, r = state.body_rates
    dp = (tau[0] + (iy - iz) * q * r) / ix
    dq = (tau[1] + (iz - ix) * p * r) / iy
    dr = (tau[2] + (ix - iy) * p * q) / iz

    nvx, nvy, nvz = vx + ax * dt, vy + ay * dt, vz + az * dt
    np_, nq, nr = p + dp * dt, q + dq * dt, r + dr * dt
    x, y, z = state.position
    d_roll, d_pitch, d_yaw = euler_rates((roll, pitch, yaw), (np_, nq, nr))
    return VehicleState(
        position=np.array([x + nvx * dt, y + nvy * dt, z + nvz * dt]),
        velocity=np.array([nvx, nvy, nvz]),
        attitude=np.array([
            wrap_angle(roll + d_roll * dt),
            wrap_angle(pitch + d_pitch * dt),
            wrap_angle(yaw + d_yaw * dt),
        ]),
        body_rates=np.array([np_, nq, nr]),
    )


@dataclass
class CrashLimits:
    max_tilt: float = math.radians(60.0)  # rad, roll or pitch
    max_horizontal_dist: float = 5.0      # m from reference point
    reference_xy: tuple[float, float] = (0.0, 0.0)
    ground_z: float = 0.0


def is_crashed(state: VehicleState, limits: CrashLimits) -> bool:
    """Ground contact inclusive; tilt and horizontal bounds strict."""
    if state.position[2] <= limits.ground_z:
        return True
    if abs(state.attitude[0]) > limits.max_tilt or abs(state.attitude[1]) > limits.max_tilt:
        return True
    dx = state.position[0] - limits.reference_xy[0]
    dy = state.position[1] - limits.reference_xy[1]
    return math.hypot(dx, dy) > limits.max_horizontal_dist


@dataclass
class SensorNoise:
    """Per-sensor Gaussian sigma; all default to exact measurements."""

    accel: float = 0.0
    gyro: float = 0.0
    attitude: float = 0.0
    baro: float = 0.0
    gps_pos: float = 0.0
    gps_vel: float = 0.0


STANDARD_PRESSURE_PA = 101_325


def sample_imu(state: VehicleState, noise: SensorNoise, rng: RngStream):
    """Accel (specific force, body frame), gyro and attitude passthrough.

    At quasi-static flight the accelerometer reads the gravity reaction
    rotated into the body frame. Attitude rides along so controllers do
    not need an estimator.
    """
    roll, pitch, _ = state.attitude
    g = 9.81
    # R^T (0, 0, g) is g times the bottom row of R
    accel = (-math.sin(pitch) * g,
             math.cos(pitch) * math.sin(roll) * g,
             math.cos(pitch) * math.cos(roll) * g)
    gyro = (float(state.body_rates[0]), float(state.body_rates[1]),
            float(state.body_rates[2]))
    att = (float(state.attitude[0]), float(state.attitude[1]),
           float(state.attitude[2]))
    if noise.accel:
        accel = tuple(v + rng.gauss(0, noise.accel) for v in accel)
    if noise.gyro:
        gyro = tuple(v + rng.gauss(0, noise.gyro) for v in gyro)
    if noise.attitude:
        att = tuple(v + rng.gauss(0, noise.attitude) for v in att)
    return accel, gyro, att


def sample_baro(state: VehicleState, noise: SensorNoise, rng: RngStream) -> float:
    alt = float(state.position[2])
    if noise.baro:
        alt += rng.gauss(0, noise.baro)
    return alt


def sample_gps(state: VehicleState, noise: SensorNoise, rng: RngStream):
    pos = (float(state.position[0]), float(state.position[1]),
           float(state.position[2]))
    vel = (float(state.velocity[0]), float(state.velocity[1]),
           float(state.velocity[2]))
    if noise.gps_pos:
        pos = tuple(v + rng.gauss(0, noise.gps_pos) for v in pos)
    if noise.gps_vel:
        vel = tuple(v + rng.gauss(0, noise.gps_vel) for v in vel)
    return pos, vel
