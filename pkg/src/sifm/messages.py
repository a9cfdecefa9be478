"""Control-plane vocabulary and the binary codec for FC/MA and LMA/MAG messages.

Every message is framed by an 8-byte big-endian header::

    version (1B, always 0x05) | msg_type (1B) | length (2B, whole frame) | xid (4B)

followed by a fixed-size payload whose layout depends on ``msg_type``.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Union

VERSION = 0x05

U16 = 0xFFFF
U32 = 0xFFFF_FFFF
U64 = 0xFFFF_FFFF_FFFF_FFFF

# Identifiers are plain ints; these aliases only document intent.
MnId = int
MaId = int
Address = int


class Protocol(enum.IntEnum):
    TCPLIKE = 6
    UDPLIKE = 17


class Status(enum.IntEnum):
    DETACHED = 0
    ATTACHED = 1


class Result(enum.IntEnum):
    OK = 0
    ERROR = 1


class MsgType(enum.IntEnum):
    BINDING_UPDATE = 0x01
    BINDING_ACK = 0x02
    FLOW_MOD = 0x03
    PORT_STATUS = 0x04
    PROXY_BINDING_UPDATE = 0x11
    PROXY_BINDING_ACK = 0x12


class InstructionKind(enum.IntEnum):
    FORWARD = 1
    TUNNEL = 2
    DECAP_FORWARD = 3
    DROP = 4
    DEFAULT_ROUTE = 5


def format_address(addr: Address) -> str:
    return ".".join(str((addr >> s) & 0xFF) for s in (24, 16, 8, 0))


def parse_address(text: str) -> Address:
    parts = [int(p) for p in text.split(".")]
    if len(parts) != 4 or any(not 0 <= p <= 255 for p in parts):
        raise ValueError(f"not a dotted-quad address: {text!r}")
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3]


class FlowKey(NamedTuple):
    """Five-tuple identifying a flow; tuple ordering gives the canonical order."""

    src_addr: Address
    dst_addr: Address
    src_port: int
    dst_port: int
    protocol: Protocol

    def __str__(self) -> str:
        return (
            f"{format_address(self.src_addr)}:{self.src_port}->"
            f"{format_address(self.dst_addr)}:{self.dst_port}/{self.protocol.name}"
        )


MATCH_FIELDS = ("src_addr", "dst_addr", "src_port", "dst_port", "protocol", "ingress_port")


@dataclass(frozen=True)
class MatchFields:
    """Per-field exact-or-wildcard constraints; ``None`` means wildcard."""

    src_addr: Optional[Address] = None
    dst_addr: Optional[Address] = None
    src_port: Optional[int] = None
    dst_port: Optional[int] = None
    protocol: Optional[Protocol] = None
    ingress_port: Optional[int] = None

    def __post_init__(self) -> None:
        limits = (U32, U32, U16, U16, None, U32)
        for name, limit in zip(MATCH_FIELDS, limits):
            value = getattr(self, name)
            if value is None:
                continue
            if name == "protocol":
                object.__setattr__(self, name, Protocol(value))
            elif not 0 <= value <= limit:
                raise ValueError(f"{name}={value} out of range")

    @classmethod
    def exact(cls, key: FlowKey, ingress_port: Optional[int] = None) -> "MatchFields":
        return cls(*key, ingress_port=ingress_port)

    @property
    def is_table_miss(self) -> bool:
        return all(getattr(self, name) is None for name in MATCH_FIELDS)

    def matches(self, key: FlowKey, ingress_port: Optional[int] = None) -> bool:
        if self.src_addr is not None and self.src_addr != key.src_addr:
            return False
        if self.dst_addr is not None and self.dst_addr != key.dst_addr:
            return False
        if self.src_port is not None and self.src_port != key.src_port:
            return False
        if self.dst_port is not None and self.dst_port != key.dst_port:
            return False
        if self.protocol is not None and self.protocol != key.protocol:
            return False
        if self.ingress_port is not None and self.ingress_port != ingress_port:
            return False
        return True


@dataclass(frozen=True)
class Instruction:
    kind: InstructionKind
    arg: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", InstructionKind(self.kind))
        if self.kind in (InstructionKind.FORWARD, InstructionKind.DECAP_FORWARD):
            if not 0 <= self.arg <= U32:
                raise ValueError(f"port {self.arg} out of range")
        elif self.kind is InstructionKind.TUNNEL:
            if not 0 <= self.arg <= U64:
                raise ValueError(f"peer id {self.arg} out of range")
        elif self.arg != 0:
            raise ValueError(f"{self.kind.name} takes no argument")

    @classmethod
    def forward(cls, port: int) -> "Instruction":
        return cls(InstructionKind.FORWARD, port)

    @classmethod
    def tunnel(cls, peer: MaId) -> "Instruction":
        return cls(InstructionKind.TUNNEL, peer)

    @classmethod
    def decap_forward(cls, port: int) -> "Instruction":
        return cls(InstructionKind.DECAP_FORWARD, port)

    @classmethod
    def drop(cls) -> "Instruction":
        return cls(InstructionKind.DROP)

    @classmethod
    def default_route(cls) -> "Instruction":
        return cls(InstructionKind.DEFAULT_ROUTE)


DEFAULT_ROUTE = Instruction(InstructionKind.DEFAULT_ROUTE)


def _check(name: str, value: int, limit: int) -> None:
    if not isinstance(value, int) or not 0 <= value <= limit:
        raise ValueError(f"{name}={value!r} out of range")


@dataclass(frozen=True)
class BindingUpdate:
    mn_id: MnId
    ma_id: MaId
    mn_ip: Address
    ma_ip: Address
    port_id: int
    status: Status
    xid: int = 0

    def __post_init__(self) -> None:
        _check("mn_id", self.mn_id, U64)
        _check("ma_id", self.ma_id, U64)
        _check("mn_ip", self.mn_ip, U32)
        _check("ma_ip", self.ma_ip, U32)
        _check("port_id", self.port_id, U32)
        _check("xid", self.xid, U32)
        object.__setattr__(self, "status", Status(self.status))


@dataclass(frozen=True)
class BindingAck:
    mn_id: MnId
    ma_id: MaId
    result: Result
    old_mn_ip: Optional[Address] = None
    xid: int = 0

    def __post_init__(self) -> None:
        _check("mn_id", self.mn_id, U64)
        _check("ma_id", self.ma_id, U64)
        if self.old_mn_ip is not None:
            _check("old_mn_ip", self.old_mn_ip, U32)
        _check("xid", self.xid, U32)
        object.__setattr__(self, "result", Result(self.result))


@dataclass(frozen=True)
class FlowMod:
    ma_id: MaId
    match: MatchFields
    priority: int
    instruction: Instruction
    idle_timeout_us: int = 0
    xid: int = 0

    def __post_init__(self) -> None:
        _check("ma_id", self.ma_id, U64)
        _check("priority", self.priority, U16)
        _check("idle_timeout_us", self.idle_timeout_us, U64)
        _check("xid", self.xid, U32)
        if self.match.is_table_miss and self.priority != 0:
            raise ValueError("a fully wildcarded match must carry priority 0")


@dataclass(frozen=True)
class PortStatusUpdate:
    mn_id: MnId
    ma_id: MaId
    port_id: int
    status: Status
    xid: int = 0

    def __post_init__(self) -> None:
        _check("mn_id", self.mn_id, U64)
        _check("ma_id", self.ma_id, U64)
        _check("port_id", self.port_id, U32)
        _check("xid", self.xid, U32)
        object.__setattr__(self, "status", Status(self.status))


@dataclass(frozen=True)
class ProxyBindingUpdate:
    mn_id: MnId
    mag_id: MaId
    lifetime_s: int
    xid: int = 0

    def __post_init__(self) -> None:
        _check("mn_id", self.mn_id, U64)
        _check("mag_id", self.mag_id, U64)
        _check("lifetime_s", self.lifetime_s, U32)
        _check("xid", self.xid, U32)


@dataclass(frozen=True)
class ProxyBindingAck:
    mn_id: MnId
    mag_id: MaId
    home_prefix: Address
    result: Result
    xid: int = 0

    def __post_init__(self) -> None:
        _check("mn_id", self.mn_id, U64)
        _check("mag_id", self.mag_id, U64)
        _check("home_prefix", self.home_prefix, U32)
        _check("xid", self.xid, U32)
        object.__setattr__(self, "result", Result(self.result))


ControlMessage = Union[
    BindingUpdate, BindingAck, FlowMod, PortStatusUpdate, ProxyBindingUpdate, ProxyBindingAck
]


class DecodeErrorKind(enum.Enum):
    TRUNCATED = "truncated"
    BAD_VERSION = "bad_version"
    UNKNOWN_TYPE = "unknown_type"
    LENGTH_MISMATCH = "length_mismatch"
    MALFORMED = "malformed"


class DecodeError(ValueError):
    def __init__(self, kind: DecodeErrorKind, detail: str = "") -> None:
        super().__init__(f"{kind.value}: {detail}" if detail else kind.value)
        self.kind = kind


_HEADER = struct.Struct(">BBHI")
_BU = struct.Struct(">QQIIIB")
_BA = struct.Struct(">QQBBI")
_FLOWMOD = struct.Struct(">QBIIHHBIHBQQ")
_PORTSTATUS = struct.Struct(">QQIB")
_PBU = struct.Struct(">QQI")
_PBA = struct.Struct(">QQIB")

HEADER_SIZE = _HEADER.size
PAYLOAD_SIZE = {
    MsgType.BINDING_UPDATE: _BU.size,
    MsgType.BINDING_ACK: _BA.size,
    MsgType.FLOW_MOD: _FLOWMOD.size,
    MsgType.PORT_STATUS: _PORTSTATUS.size,
    MsgType.PROXY_BINDING_UPDATE: _PBU.size,
    MsgType.PROXY_BINDING_ACK: _PBA.size,
}

_TYPE_OF = {
    BindingUpdate: MsgType.BINDING_UPDATE,
    BindingAck: MsgType.BINDING_ACK,
    FlowMod: MsgType.FLOW_MOD,
    PortStatusUpdate: MsgType.PORT_STATUS,
    ProxyBindingUpdate: MsgType.PROXY_BINDING_UPDATE,
    ProxyBindingAck: MsgType.PROXY_BINDING_ACK,
}


def msg_type_of(msg: ControlMessage) -> MsgType:
    return _TYPE_OF[type(msg)]


def encoded_size(msg: ControlMessage) -> int:
    return HEADER_SIZE + PAYLOAD_SIZE[msg_type_of(msg)]


def _encode_payload(msg: ControlMessage) -> bytes:
    if isinstance(msg, BindingUpdate):
        return _BU.pack(msg.mn_id, msg.ma_id, msg.mn_ip, msg.ma_ip, msg.port_id, msg.status)
    if isinstance(msg, BindingAck):
        has_old = msg.old_mn_ip is not None
        return _BA.pack(msg.mn_id, msg.ma_id, msg.result, int(has_old), msg.old_mn_ip or 0)
    if isinstance(msg, FlowMod):
        m = msg.match
        bitmap = 0
        values = []
        for bit, name in enumerate(MATCH_FIELDS):
            value = getattr(m, name)
            if value is None:
                bitmap |= 1 << bit
                value = 0
            values.append(int(value))
        return _FLOWMOD.pack(
            msg.ma_id, bitmap, *values, msg.priority,
            msg.instruction.kind, msg.instruction.arg, msg.idle_timeout_us,
        )
    if isinstance(msg, PortStatusUpdate):
        return _PORTSTATUS.pack(msg.mn_id, msg.ma_id, msg.port_id, msg.status)
    if isinstance(msg, ProxyBindingUpdate):
        return _PBU.pack(msg.mn_id, msg.mag_id, msg.lifetime_s)
    if isinstance(msg, ProxyBindingAck):
        return _PBA.pack(msg.mn_id, msg.mag_id, msg.home_prefix, msg.result)
    raise TypeError(f"not a control message: {msg!r}")


def encode(msg: ControlMessage) -> bytes:
    payload = _encode_payload(msg)
    length = HEADER_SIZE + len(payload)
    return _HEADER.pack(VERSION, msg_type_of(msg), length, msg.xid) + payload


def _enum(cls, value: int, what: str):
    try:
        return cls(value)
    except ValueError:
        raise DecodeError(DecodeErrorKind.MALFORMED, f"bad {what} {value}") from None


def _decode_payload(msg_type: MsgType, xid: int, body: bytes) -> ControlMessage:
    if msg_type is MsgType.BINDING_UPDATE:
        mn, ma, mn_ip, ma_ip, port, status = _BU.unpack(body)
        return BindingUpdate(mn, ma, mn_ip, ma_ip, port, _enum(Status, status, "status"), xid)
    if msg_type is MsgType.BINDING_ACK:
        mn, ma, result, has_old, old_ip = _BA.unpack(body)
        if has_old not in (0, 1) or (not has_old and old_ip):
            raise DecodeError(DecodeErrorKind.MALFORMED, "bad old_mn_ip encoding")
        return BindingAck(
            mn, ma, _enum(Result, result, "result"), old_ip if has_old else None, xid
        )
    if msg_type is MsgType.FLOW_MOD:
        ma, bitmap, *rest = _FLOWMOD.unpack(body)
        values, (priority, kind, arg, timeout) = rest[:6], rest[6:]
        if bitmap >> len(MATCH_FIELDS):
            raise DecodeError(DecodeErrorKind.MALFORMED, f"bad wildcard bitmap {bitmap:#x}")
        fields = {}
        for bit, (name, value) in enumerate(zip(MATCH_FIELDS, values)):
            if bitmap & (1 << bit):
                if value:
                    raise DecodeError(DecodeErrorKind.MALFORMED, f"wildcarded {name} nonzero")
                fields[name] = None
            elif name == "protocol":
                fields[name] = _enum(Protocol, value, "protocol")
            else:
                fields[name] = value
        match = MatchFields(**fields)
        if match.is_table_miss and priority != 0:
            raise DecodeError(DecodeErrorKind.MALFORMED, "table-miss entry with priority")
        kind = _enum(InstructionKind, kind, "instruction kind")
        try:
            instruction = Instruction(kind, arg)
        except ValueError as exc:
            raise DecodeError(DecodeErrorKind.MALFORMED, str(exc)) from None
        return FlowMod(ma, match, priority, instruction, timeout, xid)
    if msg_type is MsgType.PORT_STATUS:
        mn, ma, port, status = _PORTSTATUS.unpack(body)
        return PortStatusUpdate(mn, ma, port, _enum(Status, status, "status"), xid)
    if msg_type is MsgType.PROXY_BINDING_UPDATE:
        mn, mag, lifetime = _PBU.unpack(body)
        return ProxyBindingUpdate(mn, mag, lifetime, xid)
    mn, mag, prefix, result = _PBA.unpack(body)
    return ProxyBindingAck(mn, mag, prefix, _enum(Result, result, "result"), xid)


def decode_from(buf: bytes, offset: int = 0) -> tuple[ControlMessage, int]:
    """Decode one frame starting at ``offset``; return it and the offset just past it."""
    view = memoryview(buf)[offset:]
    if len(view) < HEADER_SIZE:
        raise DecodeError(DecodeErrorKind.TRUNCATED, f"{len(view)} bytes, header needs 8")
    version, raw_type, length, xid = _HEADER.unpack_from(view)
    if version != VERSION:
        raise DecodeError(DecodeErrorKind.BAD_VERSION, f"version {version:#04x}")
    try:
        msg_type = MsgType(raw_type)
    except ValueError:
        raise DecodeError(DecodeErrorKind.UNKNOWN_TYPE, f"type {raw_type:#04x}") from None
    expected = HEADER_SIZE + PAYLOAD_SIZE[msg_type]
    if length != expected:
        raise DecodeError(
            DecodeErrorKind.LENGTH_MISMATCH, f"{msg_type.name} length {length}, expected {expected}"
        )
    if len(view) < length:
        raise DecodeError(DecodeErrorKind.TRUNCATED, f"{len(view)} of {length} bytes")
    msg = _decode_payload(msg_type, xid, bytes(view[HEADER_SIZE:length]))
    return msg, offset + length


def decode(buf: bytes) -> ControlMessage:
    """Decode the frame at the start of ``buf``; trailing bytes are left unread."""
    return decode_from(buf)[0]


def iter_decode(buf: bytes) -> Iterator[ControlMessage]:
    offset = 0
    while offset < len(buf):
        msg, offset = decode_from(buf, offset)
        yield msg


@dataclass
class XidCounter:
    """Monotone transaction-id source (wraps at 2**32)."""

    next_xid: int = 1
    issued: int = field(default=0, repr=False)

    def __call__(self) -> int:
        xid = self.next_xid
        self.next_xid = (self.next_xid + 1) & U32 or 1
        self.issued += 1
        return xid
