"""Binary codec for LIFX-style bulb control packets.

Wire layout (all integers little-endian)::

    offset  size  field
    ------  ----  ---------------------------------------------
     0      2     frame header: size (total packet length)
     2      2     frame header: protocol number + addressable/tagged bits
     4      4     frame header: source (client id)
     8      8     frame address: target (bulb id)
    16      6     frame address: reserved, zero
    22      1     frame address: flags (ack / res required)
    23      1     frame address: sequence
    24      8     protocol header: reserved, zero
    32      2     protocol header: message type
    34      2     protocol header: reserved, zero
    36      n     payload

SetColor (type 102, 13 bytes)::

    36  1  reserved, zero
    37  2  hue (0..65535 maps to 0..360 degrees)
    39  2  saturation
    41  2  brightness
    43  2  kelvin
    45  4  duration in ms

SetInfrared (type 122, 2 bytes)::

    36  2  power level (0 = off, 65535 = maximum)

Unknown message types decode to :class:`UnknownMessageType`, which keeps the
raw payload so captured traffic can be replayed byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Union

HEADER_SIZE = 36
DEFAULT_PROTOCOL_FLAGS = 0x3400  # protocol 1024, addressable

SET_COLOR = 102
SET_INFRARED = 122

_FRAME = struct.Struct("<HHI")
_ADDRESS = struct.Struct("<Q6sBB")
_PROTOCOL = struct.Struct("<QHH")
_SET_COLOR = struct.Struct("<BHHHHI")
_SET_INFRARED = struct.Struct("<H")

_U8 = 0xFF
_U16 = 0xFFFF
_U32 = 0xFFFFFFFF
_U64 = 0xFFFFFFFFFFFFFFFF


class ProtocolError(ValueError):
    pass


class TruncatedPacket(ProtocolError):
    """Input is shorter than the header block or the declared size."""


class MalformedPacket(ProtocolError):
    """Header is readable but inconsistent (bad size field, bad payload length)."""


def _check_range(name: str, value: int, hi: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= hi:
        raise ValueError(f"{name} must be an integer in [0, {hi}], got {value!r}")


@dataclass(frozen=True)
class FrameHeader:
    size: int = 0
    protocol_flags: int = DEFAULT_PROTOCOL_FLAGS
    source: int = 0

    def __post_init__(self):
        _check_range("size", self.size, _U16)
        _check_range("protocol_flags", self.protocol_flags, _U16)
        _check_range("source", self.source, _U32)


@dataclass(frozen=True)
class FrameAddress:
    target: int = 0
    flags: int = 0
    sequence: int = 0

    def __post_init__(self):
        _check_range("target", self.target, _U64)
        _check_range("flags", self.flags, _U8)
        # sequence is a wrap-around counter
        object.__setattr__(self, "sequence", int(self.sequence) % 256)


@dataclass(frozen=True)
class SetColor:
    hue: int
    saturation: int
    brightness: int
    kelvin: int = 3500
    duration_ms: int = 0

    message_type = SET_COLOR

    def __post_init__(self):
        for name in ("hue", "saturation", "brightness", "kelvin"):
            _check_range(name, getattr(self, name), _U16)
        _check_range("duration_ms", self.duration_ms, _U32)

    def to_bytes(self) -> bytes:
        return _SET_COLOR.pack(0, self.hue, self.saturation, self.brightness,
                               self.kelvin, self.duration_ms)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SetColor":
        if len(data) != _SET_COLOR.size:
            raise MalformedPacket(f"SetColor payload must be {_SET_COLOR.size} bytes, got {len(data)}")
        _, hue, sat, bri, kelvin, duration = _SET_COLOR.unpack(data)
        return cls(hue, sat, bri, kelvin, duration)


@dataclass(frozen=True)
class SetInfrared:
    power_level: int

    message_type = SET_INFRARED

    def __post_init__(self):
        _check_range("power_level", self.power_level, _U16)

    def to_bytes(self) -> bytes:
        return _SET_INFRARED.pack(self.power_level)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SetInfrared":
        if len(data) != _SET_INFRARED.size:
            raise MalformedPacket(f"SetInfrared payload must be 2 bytes, got {len(data)}")
        return cls(*_SET_INFRARED.unpack(data))


@dataclass(frozen=True)
class UnknownMessageType:
    """Opaque payload of a message type this codec does not interpret."""

    type_id: int
    data: bytes = b""

    def __post_init__(self):
        _check_range("type_id", self.type_id, _U16)
        if self.type_id in _PAYLOADS:
            raise ValueError(f"message type {self.type_id} has a typed payload class")
        object.__setattr__(self, "data", bytes(self.data))

    @property
    def message_type(self) -> int:
        return self.type_id

    def to_bytes(self) -> bytes:
        return self.data


Payload = Union[SetColor, SetInfrared, UnknownMessageType]

_PAYLOADS = {SET_COLOR: SetColor, SET_INFRARED: SetInfrared}


@dataclass(frozen=True)
class Packet:
    """A complete control message.

    ``frame.size`` is rewritten on construction to the encoded length, so a
    packet always satisfies the length invariant and round-trips exactly.
    """

    payload: Payload
    frame: FrameHeader = field(default_factory=FrameHeader)
    address: FrameAddress = field(default_factory=FrameAddress)

    def __post_init__(self):
        size = HEADER_SIZE + len(self.payload.to_bytes())
        if size > _U16:
            raise ValueError(f"packet of {size} bytes does not fit the 16-bit size field")
        if self.frame.size != size:
            object.__setattr__(self, "frame", FrameHeader(size, self.frame.protocol_flags,
                                                          self.frame.source))

    @property
    def message_type(self) -> int:
        return self.payload.message_type


def encode_packet(packet: Packet) -> bytes:
    body = packet.payload.to_bytes()
    size = HEADER_SIZE + len(body)
    return b"".join((
        _FRAME.pack(size, packet.frame.protocol_flags, packet.frame.source),
        _ADDRESS.pack(packet.address.target, bytes(6), packet.address.flags,
                      packet.address.sequence),
        _PROTOCOL.pack(0, packet.message_type, 0),
        body,
    ))


def decode_packet(data: bytes) -> Packet:
    """Parse one packet from the front of ``data``.

    Bytes beyond the declared size are ignored. Reserved fields are not
    checked, matching how a bulb treats them.
    """
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise TruncatedPacket(f"need at least {HEADER_SIZE} bytes, got {len(data)}")
    size, flags, source = _FRAME.unpack_from(data, 0)
    if size < HEADER_SIZE:
        raise MalformedPacket(f"declared size {size} is smaller than the header block")
    if len(data) < size:
        raise TruncatedPacket(f"declared size {size} exceeds available {len(data)} bytes")
    target, _reserved, addr_flags, sequence = _ADDRESS.unpack_from(data, 8)
    _, message_type, _ = _PROTOCOL.unpack_from(data, 24)
    body = data[HEADER_SIZE:size]

    cls = _PAYLOADS.get(message_type)
    payload = cls.from_bytes(body) if cls else UnknownMessageType(message_type, body)
    return Packet(payload, FrameHeader(size, flags, source),
                  FrameAddress(target, addr_flags, sequence))


def iter_packets(stream: bytes):
    """Yield packets from a concatenation of encoded packets."""
    offset = 0
    while offset < len(stream):
        packet = decode_packet(stream[offset:])
        yield packet
        offset += packet.frame.size


def send_datagram(packets, host: str, port: int = 56700) -> int:
    """Send packets over UDP. Lab use only; nothing here is acknowledged."""
    import socket

    sent = 0
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        for packet in packets:
            sent += sock.sendto(encode_packet(packet), (host, port))
    return sent
