import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dronesim.control import (
    ControllerGains,
    ControllerState,
    SensorBundle,
    Setpoint,
    attitude_error,
    capture_hold,
    complex_control,
    safety_control,
)
from dronesim.plant import PhysicalParams, VehicleState, step

DT = 0.0025


def bundle_from_state(state: VehicleState) -> SensorBundle:
    return SensorBundle(
        accel=(0.0, 0.0, 9.81),
        gyro=tuple(state.body_rates),
        attitude=tuple(state.attitude),
        imu_t=0,
        baro_alt=float(state.position[2]),
        baro_t=0,
        gps_pos=tuple(state.position),
        gps_vel=tuple(state.velocity),
        gps_t=0,
    )


def closed_loop(state, controller, reference, seconds, params=None, gains=None):
    """Direct plant + controller loop with perfect, immediate sensing."""
    params = params or PhysicalParams()
    gains = gains or ControllerGains()
    st_ctl = ControllerState()
    n = int(round(seconds / DT))
    traj = []
    for _ in range(n):
        out, st_ctl = controller(
            bundle_from_state(state), reference, st_ctl, gains, params, DT
        )
        state = step(state, out, params, DT)
        traj.append(state)
    return state, traj


def test_complex_equilibrium_outputs_hover():
    params = PhysicalParams()
    sp = Setpoint(position=(0.0, 0.0, 1.5))
    state = VehicleState(position=np.array([0.0, 0.0, 1.5]))
    out, _ = complex_control(bundle_from_state(state), sp, ControllerState(),
                             ControllerGains(), params, DT)
    h = params.hover_throttle()
    for t in out:
        assert t == pytest.approx(h, abs=1e-6)


def test_setpoint_above_raises_all_throttles_equally():
    params = PhysicalParams()
    sp = Setpoint(position=(0.0, 0.0, 2.5))
    state = VehicleState(position=np.array([0.0, 0.0, 1.5]))
    out, _ = complex_control(bundle_from_state(state), sp, ControllerState(),
                             ControllerGains(), params, DT)
    h = params.hover_throttle()
    assert len(set(out)) == 1
    assert out[0] > h


def test_complex_closed_loop_settles_from_1m_offset():
    sp = Setpoint(position=(0.0, 0.0, 1.5))
    state = VehicleState(position=np.array([1.0, 0.0, 1.5]))
    final, traj = closed_loop(state, complex_control, sp, 8.0)
    xs = [s.position[0] for s in traj]
    assert abs(final.position[0]) < 0.02            # within 2% of the 1 m step
    assert min(xs) > -0.30                          # overshoot < 30%
    settle_idx = int(round(len(traj) * 7.0 / 8.0))
    assert all(abs(x) < 0.02 for x in xs[settle_idx:])


def test_safety_equilibrium_outputs_hover():
    params = PhysicalParams()
    hold = Setpoint(position=(0.0, 0.0, 1.5))
    state = VehicleState(position=np.array([0.0, 0.0, 1.5]))
    out, _ = safety_control(bundle_from_state(state), hold, ControllerState(),
                            ControllerGains(), params, DT)
    h = params.hover_throttle()
    for t in out:
        assert t == pytest.approx(h, abs=1e-6)


def test_safety_roll_correction_sign():
    # +roll needs negative roll torque: motors on the +y arms (m0, m3)
    # must drop below the -y pair (m1, m2) per the mixer layout.
    params = PhysicalParams()
    state = VehicleState(position=np.array([0.0, 0.0, 1.5]))
    state.attitude[0] = math.radians(10)
    out, _ = safety_control(bundle_from_state(state), Setpoint(position=(0, 0, 1.5)),
                            ControllerState(), ControllerGains(), params, DT)
    assert out[0] < out[1]
    assert out[3] < out[2]


def test_safety_levels_from_tilt_within_3s():
    hold = Setpoint(position=(0.0, 0.0, 1.5))
    state = VehicleState(position=np.array([0.0, 0.0, 1.5]))
    state.attitude[0] = math.radians(20)
    state.attitude[1] = math.radians(-15)
    final, traj = closed_loop(state, safety_control, hold, 3.0)
    assert abs(final.attitude[0]) < math.radians(2)
    assert abs(final.attitude[1]) < math.radians(2)


@pytest.mark.parametrize("roll,pitch", [(30, 0), (-30, 10), (25, -25), (0, 30)])
def test_safety_converges_from_any_30deg_attitude(roll, pitch):
    hold = Setpoint(position=(0.0, 0.0, 2.0))
    state = VehicleState(position=np.array([0.0, 0.0, 2.0]))
    state.attitude[0] = math.radians(roll)
    state.attitude[1] = math.radians(pitch)
    final, _ = closed_loop(state, safety_control, hold, 5.0)
    assert abs(final.attitude[0]) < math.radians(2)
    assert abs(final.attitude[1]) < math.radians(2)


def test_attitude_error_cases():
    assert attitude_error((0.0, 0.0, 0.5), 0.5) == (0.0, 0.0, 0.0)
    r = attitude_error((0.0, 0.0, math.radians(179)), math.radians(-179))
    assert r[2] == pytest.approx(math.radians(-2))
    r = attitude_error((math.radians(25), 0.0, 0.0), 0.0)
    assert r[0] == pytest.approx(0.4363, abs=1e-4)


finite = st.floats(min_value=-50.0, max_value=50.0)
angle = st.floats(min_value=-3.1, max_value=3.1)


@settings(max_examples=150)
@given(
    pos=st.tuples(finite, finite, finite),
    vel=st.tuples(finite, finite, finite),
    att=st.tuples(angle, angle, angle),
    rates=st.tuples(*[st.floats(min_value=-30, max_value=30)] * 3),
    integ=st.tuples(*[st.floats(min_value=-2, max_value=2)] * 3),
)
def test_output_always_saturated(pos, vel, att, rates, integ):
    bundle = SensorBundle(
        accel=(0, 0, 9.81), gyro=rates, attitude=att, imu_t=0,
        baro_alt=pos[2], baro_t=0, gps_pos=pos, gps_vel=vel, gps_t=0,
    )
    state = ControllerState(pos_integ=integ, rate_integ=integ)
    for controller in (complex_control, safety_control):
        out, _ = controller(bundle, Setpoint(), state, ControllerGains(),
                            PhysicalParams(), DT)
        for t in out:
            assert 0.0 <= t <= 1.0


def test_integrator_clamped_under_persistent_saturation():
    gains = ControllerGains()
    params = PhysicalParams()
    sp = Setpoint(position=(0.0, 0.0, 100.0))  # huge, keeps thrust saturated
    state = VehicleState(position=np.array([0.0, 0.0, 0.5]))
    ctl = ControllerState()
    for _ in range(4000):
        _, ctl = complex_control(bundle_from_state(state), sp, ctl, gains, params, DT)
        for v in ctl.pos_integ + ctl.rate_integ:
            assert abs(v) <= gains.integrator_clamp + 1e-12


def test_controller_purity():
    bundle = SensorBundle(
        accel=(0, 0, 9.81), gyro=(0.1, 0, 0), attitude=(0.05, 0, 0), imu_t=0,
        baro_alt=1.2, baro_t=0, gps_pos=(0.3, 0, 1.2), gps_vel=(0, 0.1, 0), gps_t=0,
    )
    args = (bundle, Setpoint(), ControllerState(), ControllerGains(),
            PhysicalParams(), DT)
    assert complex_control(*args)[0] == complex_control(*args)[0]
    assert safety_control(bundle, Setpoint(), ControllerState(), ControllerGains(),
                          PhysicalParams(), DT)[0] == \
        safety_control(bundle, Setpoint(), ControllerState(), ControllerGains(),
                       PhysicalParams(), DT)[0]


def test_non_finite_input_holds_previous_output():
    params = PhysicalParams()
    good = SensorBundle(
        accel=(0, 0, 9.81), gyro=(0, 0, 0), attitude=(0, 0, 0), imu_t=0,
        baro_alt=1.5, baro_t=0, gps_pos=(0, 0, 1.5), gps_vel=(0, 0, 0), gps_t=0,
    )
    out1, ctl = complex_control(good, Setpoint(), ControllerState(),
                                ControllerGains(), params, DT)
    bad = SensorBundle(
        accel=(0, 0, 9.81), gyro=(0, 0, 0), attitude=(float("nan"), 0, 0), imu_t=0,
        baro_alt=1.5, baro_t=0, gps_pos=(0, 0, 1.5), gps_vel=(0, 0, 0), gps_t=0,
    )
    out2, ctl2 = complex_control(bad, Setpoint(), ctl, ControllerGains(), params, DT)
    assert out2 == out1
    assert ctl2.fault


def test_incomplete_bundle_cold_start_outputs_hover():
    params = PhysicalParams()
    out, ctl = complex_control(SensorBundle(), Setpoint(), ControllerState(),
                               ControllerGains(), params, DT)
    h = params.hover_throttle()
    assert out == (h, h, h, h)
    assert ctl.fault


def test_capture_hold_keeps_reference_yaw_and_current_altitude():
    sp = Setpoint(position=(0.0, 0.0, 1.5), yaw=0.3)
    bundle = SensorBundle(attitude=(0.1, 0.0, 2.2), baro_alt=4.2)
    hold = capture_hold(bundle, sp)
    assert hold.position[2] == 4.2
    assert hold.yaw == 0.3
