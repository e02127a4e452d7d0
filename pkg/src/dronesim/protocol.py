"""Byte-exact telemetry framing between the host and container sides.

Five message kinds cross the boundary. Sensor feeds go host -> container
on port 14660, motor output comes back container -> host on port 14600:

    kind    msg_id  payload  frame  rate
    IMU        1      42 B    52 B  250 Hz
    BARO       2      22 B    32 B   50 Hz
    GPS        3      34 B    44 B   10 Hz
    RC         4      40 B    50 B   50 Hz
    MOTOR      5      19 B    29 B  400 Hz

Frame layout (all little-endian):

    offset  size  field
    0       1     magic 0xFD
    1       1     msg_id
    2       1     seq (wrapping counter per sender, diagnostics only)
    3       1     payload_len
    4       4     timestamp_us (uint32, sender clock truncated)
    8       n     payload
    8+n     2     crc16 CCITT (poly 0x1021, init 0xFFFF) over bytes [0, 8+n)

Payload layouts:

    IMU  (42 B): accel  3 x int16, LSB 1e-3 m/s^2
                 gyro   3 x int16, LSB 1e-3 rad/s
                 attitude 3 x int32, LSB 1e-6 rad (roll, pitch, yaw)
                 pad 18 B reserved-zero
    BARO (22 B): alt int32, LSB 1e-3 m
                 pressure uint32, Pa
                 temp int16, centi-degC
                 pad 12 B reserved-zero
    GPS  (34 B): pos 3 x int32, mm
                 vel 3 x int16, mm/s
                 fix uint8, nsat uint8
                 pad 14 B reserved-zero
    RC   (40 B): channels 4 x int16, LSB 1e-4 (sticks in [-1, 1])
                 mode uint8
                 pad 31 B reserved-zero
    MOTOR(19 B): throttle 4 x uint16, LSB 1/65535 (range [0, 1])
                 armed uint8
                 pad 10 B reserved-zero

Pad bytes must encode as zero and are ignored on decode. Receivers use
seq for diagnostics only; frames are fire-and-forget, never reordered
back into sequence.
"""

from __future__ import annotations

import binascii
import struct
from dataclasses import dataclass
from enum import IntEnum

MAGIC = 0xFD
HEADER_LEN = 8
CRC_LEN = 2

CCE_INGRESS_PORT = 14660  # host -> container sensor feed
HCE_INGRESS_PORT = 14600  # container -> host motor output


class MessageKind(IntEnum):
    IMU = 1
    BARO = 2
    GPS = 3
    RC = 4
    MOTOR = 5


PAYLOAD_SIZES = {
    MessageKind.IMU: 42,
    MessageKind.BARO: 22,
    MessageKind.GPS: 34,
    MessageKind.RC: 40,
    MessageKind.MOTOR: 19,
}

FRAME_SIZES = {k: HEADER_LEN + n + CRC_LEN for k, n in PAYLOAD_SIZES.items()}

NOMINAL_RATES_HZ = {
    MessageKind.IMU: 250,
    MessageKind.BARO: 50,
    MessageKind.GPS: 10,
    MessageKind.RC: 50,
    MessageKind.MOTOR: 400,
}


def nominal_rate(kind: MessageKind) -> int:
    """Nominal transmission rate in Hz for a message kind."""
    return NOMINAL_RATES_HZ[kind]


class EncodeError(ValueError):
    """A field is outside its encodable fixed-point range."""


class DecodeError(ValueError):
    """Frame rejected; .reason is one of the REASONS constants."""

    BAD_MAGIC = "bad_magic"
    BAD_LENGTH = "bad_length"
    BAD_CRC = "bad_crc"
    UNKNOWN_MSG_ID = "unknown_msg_id"
    REASONS = (BAD_MAGIC, BAD_LENGTH, BAD_CRC, UNKNOWN_MSG_ID)

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


def crc16_ccitt(data: bytes) -> int:
    """CRC-16/CCITT (poly 0x1021, init 0xFFFF, no reflection)."""
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class ImuSample:
    accel: tuple[float, float, float]     # m/s^2
    gyro: tuple[float, float, float]      # rad/s
    attitude: tuple[float, float, float]  # rad, (roll, pitch, yaw)


@dataclass(frozen=True)
class BaroSample:
    alt_m: float
    pressure_pa: int
    temp_cdeg: int


@dataclass(frozen=True)
class GpsSample:
    pos_m: tuple[float, float, float]
    vel_ms: tuple[float, float, float]
    fix: int
    nsat: int


@dataclass(frozen=True)
class RcSample:
    channels: tuple[float, float, float, float]  # normalized sticks
    mode: int


@dataclass(frozen=True)
class MotorCommand:
    throttle: tuple[float, float, float, float]  # [0, 1] per motor
    armed: bool


BODY_TYPES = {
    MessageKind.IMU: ImuSample,
    MessageKind.BARO: BaroSample,
    MessageKind.GPS: GpsSample,
    MessageKind.RC: RcSample,
    MessageKind.MOTOR: MotorCommand,
}


def _fix_i16(value: float, lsb: float, field: str) -> int:
    q = round(value / lsb)
    if not -32768 <= q <= 32767:
        raise EncodeError(f"field {field}={value} exceeds int16 range at LSB {lsb}")
    return q


def _fix_i32(value: float, lsb: float, field: str) -> int:
    q = round(value / lsb)
    if not -(2**31) <= q <= 2**31 - 1:
        raise EncodeError(f"field {field}={value} exceeds int32 range at LSB {lsb}")
    return q


def _fix_u16(value: float, lsb: float, field: str) -> int:
    q = round(value / lsb)
    if not 0 <= q <= 65535:
        raise EncodeError(f"field {field}={value} exceeds uint16 range at LSB {lsb}")
    return q


def _encode_payload(kind: MessageKind, body) -> bytes:
    expected = BODY_TYPES[kind]
    if not isinstance(body, expected):
        raise EncodeError(f"body for {kind.name} must be {expected.__name__}")
    if kind == MessageKind.IMU:
        vals = [_fix_i16(v, 1e-3, f"accel[{i}]") for i, v in enumerate(body.accel)]
        vals += [_fix_i16(v, 1e-3, f"gyro[{i}]") for i, v in enumerate(body.gyro)]
        att = [_fix_i32(v, 1e-6, f"attitude[{i}]") for i, v in enumerate(body.attitude)]
        return struct.pack("<6h3i", *vals, *att) + bytes(18)
    if kind == MessageKind.BARO:
        if not 0 <= body.pressure_pa <= 2**32 - 1:
            raise EncodeError(f"field pressure_pa={body.pressure_pa} exceeds uint32 range")
        if not -32768 <= body.temp_cdeg <= 32767:
            raise EncodeError(f"field temp_cdeg={body.temp_cdeg} exceeds int16 range")
        return struct.pack(
            "<iIh", _fix_i32(body.alt_m, 1e-3, "alt_m"), body.pressure_pa, body.temp_cdeg
        ) + bytes(12)
    if kind == MessageKind.GPS:
        pos = [_fix_i32(v, 1e-3, f"pos_m[{i}]") for i, v in enumerate(body.pos_m)]
        vel = [_fix_i16(v, 1e-3, f"vel_ms[{i}]") for i, v in enumerate(body.vel_ms)]
        if not 0 <= body.fix <= 255:
            raise EncodeError(f"field fix={body.fix} exceeds uint8 range")
        if not 0 <= body.nsat <= 255:
            raise EncodeError(f"field nsat={body.nsat} exceeds uint8 range")
        return struct.pack("<3i3hBB", *pos, *vel, body.fix, body.nsat) + bytes(14)
    if kind == MessageKind.RC:
        ch = [_fix_i16(v, 1e-4, f"channels[{i}]") for i, v in enumerate(body.channels)]
        if not 0 <= body.mode <= 255:
            raise EncodeError(f"field mode={body.mode} exceeds uint8 range")
        return struct.pack("<4hB", *ch, body.mode) + bytes(31)
    if kind == MessageKind.MOTOR:
        th = [_fix_u16(v, 1 / 65535, f"throttle[{i}]") for i, v in enumerate(body.throttle)]
        return struct.pack("<4HB", *th, 1 if body.armed else 0) + bytes(10)
    raise EncodeError(f"unknown kind {kind}")


def _decode_payload(kind: MessageKind, payload: bytes):
    if kind == MessageKind.IMU:
        ax, ay, az, gx, gy, gz, r, p, y = struct.unpack_from("<6h3i", payload)
        return ImuSample(
            accel=(ax * 1e-3, ay * 1e-3, az * 1e-3),
            gyro=(gx * 1e-3, gy * 1e-3, gz * 1e-3),
            attitude=(r * 1e-6, p * 1e-6, y * 1e-6),
        )
    if kind == MessageKind.BARO:
        alt, pressure, temp = struct.unpack_from("<iIh", payload)
        return BaroSample(alt_m=alt * 1e-3, pressure_pa=pressure, temp_cdeg=temp)
    if kind == MessageKind.GPS:
        px, py, pz, vx, vy, vz, fix, nsat = struct.unpack_from("<3i3hBB", payload)
        return GpsSample(
            pos_m=(px * 1e-3, py * 1e-3, pz * 1e-3),
            vel_ms=(vx * 1e-3, vy * 1e-3, vz * 1e-3),
            fix=fix,
            nsat=nsat,
        )
    if kind == MessageKind.RC:
        c0, c1, c2, c3, mode = struct.unpack_from("<4hB", payload)
        return RcSample(
            channels=(c0 * 1e-4, c1 * 1e-4, c2 * 1e-4, c3 * 1e-4), mode=mode
        )
    assert kind == MessageKind.MOTOR
    t0, t1, t2, t3, armed = struct.unpack_from("<4HB", payload)
    lsb = 1 / 65535
    return MotorCommand(
        throttle=(t0 * lsb, t1 * lsb, t2 * lsb, t3 * lsb), armed=bool(armed)
    )


def encode(kind: MessageKind, body, seq: int, timestamp_ticks: int) -> bytes:
    """Encode a typed body into its fixed-size frame.

    seq wraps at 256; timestamp_ticks is truncated to 32 bits.
    Raises EncodeError naming the offending field when a value falls
    outside its fixed-point range.
    """
    payload = _encode_payload(kind, body)
    assert len(payload) == PAYLOAD_SIZES[kind]
    header = struct.pack(
        "<BBBBI", MAGIC, int(kind), seq & 0xFF, len(payload),
        timestamp_ticks & 0xFFFFFFFF,
    )
    frame = header + payload
    return frame + struct.pack("<H", crc16_ccitt(frame))


def decode(data: bytes) -> tuple[MessageKind, object, int, int]:
    """Decode a frame, returning (kind, body, seq, timestamp_us).

    Accepts arbitrary byte strings. Raises DecodeError with a reason of
    bad_magic, bad_length, bad_crc or unknown_msg_id; never reads past
    the input.
    """
    if len(data) >= 1 and data[0] != MAGIC:
        raise DecodeError(DecodeError.BAD_MAGIC, f"first byte 0x{data[0]:02x}")
    if len(data) < HEADER_LEN + CRC_LEN:
        raise DecodeError(DecodeError.BAD_LENGTH, f"{len(data)} bytes is shorter than any frame")
    _magic, msg_id, seq, payload_len, timestamp = struct.unpack_from("<BBBBI", data)
    if len(data) != HEADER_LEN + payload_len + CRC_LEN:
        raise DecodeError(
            DecodeError.BAD_LENGTH,
            f"frame is {len(data)} bytes but header declares {HEADER_LEN + payload_len + CRC_LEN}",
        )
    (crc_rx,) = struct.unpack_from("<H", data, HEADER_LEN + payload_len)
    if crc16_ccitt(data[: HEADER_LEN + payload_len]) != crc_rx:
        raise DecodeError(DecodeError.BAD_CRC)
    try:
        kind = MessageKind(msg_id)
    except ValueError:
        raise DecodeError(DecodeError.UNKNOWN_MSG_ID, f"msg_id {msg_id}") from None
    if payload_len != PAYLOAD_SIZES[kind]:
        raise DecodeError(
            DecodeError.BAD_LENGTH,
            f"{kind.name} payload must be {PAYLOAD_SIZES[kind]} bytes, got {payload_len}",
        )
    payload = data[HEADER_LEN : HEADER_LEN + payload_len]
    return kind, _decode_payload(kind, payload), seq, timestamp
