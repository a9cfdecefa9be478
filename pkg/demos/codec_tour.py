"""A walk through the control-message wire format.

Builds one message of each kind, shows its bytes, decodes it back, and then
shows how damaged frames are rejected with a typed error.

    python demos/codec_tour.py
"""

from sifm.messages import (
    BindingAck, BindingUpdate, DecodeError, FlowKey, FlowMod, Instruction, MatchFields,
    PortStatusUpdate, Protocol, ProxyBindingAck, ProxyBindingUpdate, Result, Status,
    decode, encode, iter_decode, parse_address,
)

UE = parse_address("10.0.0.2")
REMOTE = parse_address("172.16.0.1")
key = FlowKey(REMOTE, UE, 5001, 20001, Protocol.TCPLIKE)

messages = [
    BindingUpdate(1, 1, UE, parse_address("192.168.1.1"), 3, Status.ATTACHED, xid=1),
    BindingAck(1, 1, Result.OK, None, xid=1),
    FlowMod(1, MatchFields.exact(key), 100, Instruction.tunnel(2), xid=2),
    PortStatusUpdate(1, 1, 3, Status.DETACHED, xid=3),
    ProxyBindingUpdate(1, 2, 3600, xid=4),
    ProxyBindingAck(1, 2, parse_address("10.2.0.0"), Result.OK, xid=4),
]

print("1. Every message is an 8-byte header (version, type, length, xid) plus a fixed payload.\n")
for msg in messages:
    wire = encode(msg)
    assert decode(wire) == msg
    print(f"  {type(msg).__name__:<18} {len(wire):3d} bytes  {wire[:8].hex(' ')} | {wire[8:].hex()}")

print("\n2. Frames can be concatenated on a stream and split again.")
stream = b"".join(encode(m) for m in messages)
print(f"  {len(stream)} bytes -> {[type(m).__name__ for m in iter_decode(stream)]}")

print("\n3. Damaged frames raise DecodeError with a specific kind.")
wire = encode(messages[2])
damaged = {
    "cut short": wire[:20],
    "wrong version": b"\x04" + wire[1:],
    "unknown type": wire[:1] + b"\x7f" + wire[2:],
    "length field lies": wire[:2] + (len(wire) + 1).to_bytes(2, "big") + wire[4:],
    "bad instruction kind": wire[:8 + 28] + b"\xee" + wire[8 + 29:],
}
for label, buf in damaged.items():
    try:
        decode(buf)
        print(f"  {label:<22} decoded?!")
    except DecodeError as exc:
        print(f"  {label:<22} {exc.kind.name}: {exc}")
