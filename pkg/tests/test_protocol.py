import struct

import pytest
from hypothesis import given, settings, strategies as st

from dronesim import protocol
from dronesim.protocol import (
    BaroSample,
    DecodeError,
    EncodeError,
    FRAME_SIZES,
    GpsSample,
    ImuSample,
    MessageKind,
    MotorCommand,
    RcSample,
    decode,
    encode,
    nominal_rate,
)

finite16 = st.floats(min_value=-30.0, max_value=30.0)
angle = st.floats(min_value=-3.14159, max_value=3.14159)
stick = st.floats(min_value=-1.0, max_value=1.0)
throttle = st.floats(min_value=0.0, max_value=1.0)

imu_bodies = st.builds(
    ImuSample,
    accel=st.tuples(finite16, finite16, finite16),
    gyro=st.tuples(finite16, finite16, finite16),
    attitude=st.tuples(angle, angle, angle),
)
baro_bodies = st.builds(
    BaroSample,
    alt_m=st.floats(min_value=-1000.0, max_value=10000.0),
    pressure_pa=st.integers(min_value=0, max_value=2**32 - 1),
    temp_cdeg=st.integers(min_value=-32768, max_value=32767),
)
gps_bodies = st.builds(
    GpsSample,
    pos_m=st.tuples(*[st.floats(min_value=-100000.0, max_value=100000.0)] * 3),
    vel_ms=st.tuples(finite16, finite16, finite16),
    fix=st.integers(0, 255),
    nsat=st.integers(0, 255),
)
rc_bodies = st.builds(
    RcSample,
    channels=st.tuples(stick, stick, stick, stick),
    mode=st.integers(0, 255),
)
motor_bodies = st.builds(
    MotorCommand,
    throttle=st.tuples(throttle, throttle, throttle, throttle),
    armed=st.booleans(),
)
BODY_STRATEGIES = {
    MessageKind.IMU: imu_bodies,
    MessageKind.BARO: baro_bodies,
    MessageKind.GPS: gps_bodies,
    MessageKind.RC: rc_bodies,
    MessageKind.MOTOR: motor_bodies,
}
_EXAMPLES = {
    MessageKind.IMU: ImuSample((0.1, -9.8, 0.0), (0.01, 0.0, -0.02), (0.1, -0.2, 3.0)),
    MessageKind.BARO: BaroSample(1.5, 101325, 2000),
    MessageKind.GPS: GpsSample((1.0, -2.0, 3.0), (0.1, 0.0, -0.1), 3, 12),
    MessageKind.RC: RcSample((0.0, 0.5, -0.5, 1.0), 2),
    MessageKind.MOTOR: MotorCommand((0.42, 0.42, 0.42, 0.42), True),
}


@pytest.mark.parametrize("kind,size", [
    (MessageKind.IMU, 52),
    (MessageKind.BARO, 32),
    (MessageKind.GPS, 44),
    (MessageKind.RC, 50),
    (MessageKind.MOTOR, 29),
])
def test_frame_sizes_exact(kind, size):
    assert FRAME_SIZES[kind] == size
    frame = encode(kind, _EXAMPLES[kind], seq=0, timestamp_ticks=0)
    assert len(frame) == size


@pytest.mark.parametrize("kind,rate", [
    (MessageKind.IMU, 250),
    (MessageKind.BARO, 50),
    (MessageKind.GPS, 10),
    (MessageKind.RC, 50),
    (MessageKind.MOTOR, 400),
])
def test_nominal_rates(kind, rate):
    assert nominal_rate(kind) == rate


def test_ports():
    assert protocol.CCE_INGRESS_PORT == 14660
    assert protocol.HCE_INGRESS_PORT == 14600


def _assert_quantized_close(kind, body, decoded):
    if kind == MessageKind.IMU:
        for sent, got in zip(body.accel + body.gyro, decoded.accel + decoded.gyro):
            assert abs(sent - got) < 1e-3
        for sent, got in zip(body.attitude, decoded.attitude):
            assert abs(sent - got) < 1e-6
    elif kind == MessageKind.BARO:
        assert abs(body.alt_m - decoded.alt_m) < 1e-3
        assert body.pressure_pa == decoded.pressure_pa
        assert body.temp_cdeg == decoded.temp_cdeg
    elif kind == MessageKind.GPS:
        for sent, got in zip(body.pos_m, decoded.pos_m):
            assert abs(sent - got) < 1e-3
        for sent, got in zip(body.vel_ms, decoded.vel_ms):
            assert abs(sent - got) < 1e-3
        assert (body.fix, body.nsat) == (decoded.fix, decoded.nsat)
    elif kind == MessageKind.RC:
        for sent, got in zip(body.channels, decoded.channels):
            assert abs(sent - got) < 1e-4
        assert body.mode == decoded.mode
    else:
        for sent, got in zip(body.throttle, decoded.throttle):
            assert abs(sent - got) < 1 / 65535
        assert body.armed == decoded.armed


@pytest.mark.parametrize("kind", list(MessageKind))
@settings(max_examples=100)
@given(data=st.data(), seq=st.integers(0, 255), ts=st.integers(0, 2**32 - 1))
def test_roundtrip_within_quantization(kind, data, seq, ts):
    body = data.draw(BODY_STRATEGIES[kind])
    frame = encode(kind, body, seq, ts)
    got_kind, got_body, got_seq, got_ts = decode(frame)
    assert got_kind == kind
    assert got_seq == seq
    assert got_ts == ts
    _assert_quantized_close(kind, body, got_body)


@pytest.mark.parametrize("kind", list(MessageKind))
def test_roundtrip_is_exact_on_requantized_body(kind):
    # decode(encode(x)) == x once x sits on the quantization grid
    frame = encode(kind, _EXAMPLES[kind], 7, 123456)
    _, body, _, _ = decode(frame)
    frame2 = encode(kind, body, 7, 123456)
    _, body2, _, _ = decode(frame2)
    assert body == body2
    assert frame == frame2


def test_bit_flip_gives_bad_crc():
    frame = bytearray(encode(MessageKind.IMU, _EXAMPLES[MessageKind.IMU], 0, 0))
    frame[12] ^= 0x01
    with pytest.raises(DecodeError) as ei:
        decode(bytes(frame))
    assert ei.value.reason == DecodeError.BAD_CRC


def test_truncated_frame_gives_bad_length():
    frame = encode(MessageKind.IMU, _EXAMPLES[MessageKind.IMU], 0, 0)
    with pytest.raises(DecodeError) as ei:
        decode(frame[:10])
    assert ei.value.reason == DecodeError.BAD_LENGTH


def test_wrong_magic_rejected():
    frame = bytearray(encode(MessageKind.RC, _EXAMPLES[MessageKind.RC], 0, 0))
    frame[0] = 0xAA
    with pytest.raises(DecodeError) as ei:
        decode(bytes(frame))
    assert ei.value.reason == DecodeError.BAD_MAGIC


def test_unknown_msg_id_rejected_after_crc():
    payload = bytes(5)
    header = struct.pack("<BBBBI", protocol.MAGIC, 200, 0, len(payload), 0)
    body = header + payload
    frame = body + struct.pack("<H", protocol.crc16_ccitt(body))
    with pytest.raises(DecodeError) as ei:
        decode(frame)
    assert ei.value.reason == DecodeError.UNKNOWN_MSG_ID


def test_empty_and_tiny_inputs():
    with pytest.raises(DecodeError):
        decode(b"")
    with pytest.raises(DecodeError):
        decode(b"\xfd")


def test_pad_bytes_encode_zero_and_are_ignored():
    frame = bytearray(encode(MessageKind.MOTOR, _EXAMPLES[MessageKind.MOTOR], 0, 0))
    # MOTOR payload: 8 throttle bytes + 1 armed + 10 pad
    pad = frame[protocol.HEADER_LEN + 9 : protocol.HEADER_LEN + 19]
    assert pad == bytes(10)
    frame[protocol.HEADER_LEN + 9] = 0xEE  # nonzero pad, re-sign the frame
    crc = protocol.crc16_ccitt(bytes(frame[:-2]))
    frame[-2:] = struct.pack("<H", crc)
    kind, body, _, _ = decode(bytes(frame))
    assert kind == MessageKind.MOTOR
    assert body == decode(encode(MessageKind.MOTOR, _EXAMPLES[MessageKind.MOTOR], 0, 0))[1]


def test_out_of_range_field_error_names_field():
    with pytest.raises(EncodeError, match="gyro"):
        encode(MessageKind.IMU,
               ImuSample((0, 0, 0), (99.0, 0, 0), (0, 0, 0)), 0, 0)
    with pytest.raises(EncodeError, match="throttle"):
        encode(MessageKind.MOTOR, MotorCommand((1.5, 0, 0, 0), True), 0, 0)
    with pytest.raises(EncodeError, match="pressure_pa"):
        encode(MessageKind.BARO, BaroSample(0.0, -5, 0), 0, 0)


def test_wrong_body_type_rejected():
    with pytest.raises(EncodeError):
        encode(MessageKind.IMU, _EXAMPLES[MessageKind.BARO], 0, 0)


def test_seq_wraps_at_256():
    frame = encode(MessageKind.BARO, _EXAMPLES[MessageKind.BARO], 257, 0)
    assert decode(frame)[2] == 1


@settings(max_examples=300)
@given(data=st.binary(min_size=0, max_size=512))
def test_fuzz_decode_never_escapes(data):
    try:
        kind, body, seq, ts = decode(data)
        assert kind in MessageKind
    except DecodeError as e:
        assert e.reason in DecodeError.REASONS
