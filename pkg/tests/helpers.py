"""Seeded generators shared by the property tests."""

from __future__ import annotations

import random

from sifm.messages import (
    MATCH_FIELDS,
    BindingAck,
    BindingUpdate,
    FlowKey,
    FlowMod,
    Instruction,
    InstructionKind,
    MatchFields,
    PortStatusUpdate,
    Protocol,
    ProxyBindingAck,
    ProxyBindingUpdate,
    Result,
    Status,
)

U16, U32, U64 = 0xFFFF, 0xFFFF_FFFF, 0xFFFF_FFFF_FFFF_FFFF


def _u(rng: random.Random, limit: int) -> int:
    # bias toward boundary values now and then
    roll = rng.random()
    if roll < 0.1:
        return 0
    if roll < 0.2:
        return limit
    return rng.randint(0, limit)


def random_match(rng: random.Random) -> MatchFields:
    values = {
        "src_addr": _u(rng, U32),
        "dst_addr": _u(rng, U32),
        "src_port": _u(rng, U16),
        "dst_port": _u(rng, U16),
        "protocol": rng.choice(list(Protocol)),
        "ingress_port": _u(rng, U32),
    }
    return MatchFields(**{k: (None if rng.random() < 0.4 else v) for k, v in values.items()})


def random_instruction(rng: random.Random) -> Instruction:
    kind = rng.choice(list(InstructionKind))
    if kind in (InstructionKind.FORWARD, InstructionKind.DECAP_FORWARD):
        return Instruction(kind, _u(rng, U32))
    if kind is InstructionKind.TUNNEL:
        return Instruction(kind, _u(rng, U64))
    return Instruction(kind)


def random_message(rng: random.Random, kind: int | None = None):
    kind = rng.randrange(6) if kind is None else kind
    xid = _u(rng, U32)
    if kind == 0:
        return BindingUpdate(_u(rng, U64), _u(rng, U64), _u(rng, U32), _u(rng, U32), _u(rng, U32),
                             rng.choice(list(Status)), xid)
    if kind == 1:
        old = None if rng.random() < 0.5 else _u(rng, U32)
        return BindingAck(_u(rng, U64), _u(rng, U64), rng.choice(list(Result)), old, xid)
    if kind == 2:
        match = random_match(rng)
        priority = 0 if match.is_table_miss else _u(rng, U16)
        return FlowMod(_u(rng, U64), match, priority, random_instruction(rng), _u(rng, U64), xid)
    if kind == 3:
        return PortStatusUpdate(_u(rng, U64), _u(rng, U64), _u(rng, U32), rng.choice(list(Status)), xid)
    if kind == 4:
        return ProxyBindingUpdate(_u(rng, U64), _u(rng, U64), _u(rng, U32), xid)
    return ProxyBindingAck(_u(rng, U64), _u(rng, U64), _u(rng, U32), rng.choice(list(Result)), xid)


# Small value domains so random packets actually hit random rules.

def small_key(rng: random.Random) -> FlowKey:
    return FlowKey(rng.randint(1, 3), rng.randint(1, 3), rng.randint(1, 2), rng.randint(1, 2),
                   rng.choice(list(Protocol)))


def small_match(rng: random.Random) -> MatchFields:
    fields = {
        "src_addr": rng.randint(1, 3),
        "dst_addr": rng.randint(1, 3),
        "src_port": rng.randint(1, 2),
        "dst_port": rng.randint(1, 2),
        "protocol": rng.choice(list(Protocol)),
        "ingress_port": rng.randint(1, 2),
    }
    wild = rng.random()
    return MatchFields(**{k: (None if rng.random() < wild else v) for k, v in fields.items()})


def small_ingress(rng: random.Random):
    return rng.choice([None, 1, 2])


assert len(MATCH_FIELDS) == 6
