"""Mobility Agent: the PGW/WAG role that signals attachments and applies flow rules."""

from __future__ import annotations

import bisect
import enum
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .messages import (
    DEFAULT_ROUTE,
    Address,
    BindingUpdate,
    FlowKey,
    FlowMod,
    Instruction,
    InstructionKind,
    MaId,
    MatchFields,
    MnId,
    PortStatusUpdate,
    Status,
    XidCounter,
)
from .packet import Packet

log = logging.getLogger(__name__)

# Well-known logical ports at every MA. UE ports are allocated from 1 upward.
TUNNEL_PORT = 0xFFFF_FF00
UPSTREAM_PORT = 0xFFFF_FF01


class AgentError(Exception):
    pass


class AlreadyAttached(AgentError):
    pass


class NotAttached(AgentError):
    pass


class PoolExhausted(AgentError):
    pass


class WrongMa(AgentError):
    pass


class FlowTableEntry:
    __slots__ = (
        "match", "priority", "instruction", "idle_timeout_us",
        "packet_count", "byte_count", "last_matched_at", "order",
    )

    def __init__(self, match, priority, instruction, idle_timeout_us, now, order):
        self.match = match
        self.priority = priority
        self.instruction = instruction
        self.idle_timeout_us = idle_timeout_us
        self.packet_count = 0
        self.byte_count = 0
        self.last_matched_at = now
        self.order = order

    def expired(self, now: int) -> bool:
        return self.idle_timeout_us > 0 and now - self.last_matched_at > self.idle_timeout_us

    def sort_key(self) -> tuple[int, int]:
        return (-self.priority, self.order)

    def __repr__(self) -> str:
        return (
            f"FlowTableEntry(prio={self.priority}, {self.instruction.kind.name}"
            f"({self.instruction.arg}), packets={self.packet_count})"
        )


class FlowTable:
    """Priority match-action table.

    Lookup returns the highest-priority live entry whose match holds; among
    equal priorities the earliest-installed entry wins. Replacing an entry
    (same match and priority) keeps its install position and zeroes its
    counters. Entries that constrain the full five-tuple are also indexed by
    key so the common per-flow rules cost a dict lookup instead of a scan.
    """

    def __init__(self) -> None:
        self._by_rule: dict[tuple[MatchFields, int], FlowTableEntry] = {}
        self._wild: list[FlowTableEntry] = []
        self._exact: dict[FlowKey, list[FlowTableEntry]] = {}
        self._next_order = 0
        self.lookups = 0
        self.hits = 0

    def __len__(self) -> int:
        return len(self._by_rule)

    def __iter__(self):
        return iter(sorted(self._by_rule.values(), key=FlowTableEntry.sort_key))

    @staticmethod
    def _exact_key(match: MatchFields) -> Optional[FlowKey]:
        if None in (match.src_addr, match.dst_addr, match.src_port, match.dst_port, match.protocol):
            return None
        return FlowKey(match.src_addr, match.dst_addr, match.src_port, match.dst_port, match.protocol)

    def install(
        self,
        match: MatchFields,
        priority: int,
        instruction: Instruction,
        idle_timeout_us: int = 0,
        now: int = 0,
    ) -> FlowTableEntry:
        entry = self._by_rule.get((match, priority))
        if entry is not None:
            entry.instruction = instruction
            entry.idle_timeout_us = idle_timeout_us
            entry.packet_count = 0
            entry.byte_count = 0
            entry.last_matched_at = now
            return entry
        entry = FlowTableEntry(match, priority, instruction, idle_timeout_us, now, self._next_order)
        self._next_order += 1
        self._by_rule[(match, priority)] = entry
        exact = self._exact_key(match)
        if exact is None:
            bisect.insort(self._wild, entry, key=FlowTableEntry.sort_key)
        else:
            bucket = self._exact.setdefault(exact, [])
            bisect.insort(bucket, entry, key=FlowTableEntry.sort_key)
        return entry

    def remove(self, entry: FlowTableEntry) -> None:
        del self._by_rule[(entry.match, entry.priority)]
        exact = self._exact_key(entry.match)
        if exact is None:
            self._wild.remove(entry)
        else:
            bucket = self._exact[exact]
            bucket.remove(entry)
            if not bucket:
                del self._exact[exact]

    def lookup(
        self, key: FlowKey, ingress_port: Optional[int], now: int, size_bytes: int = 0
    ) -> Optional[FlowTableEntry]:
        """Find the winning entry and bump its counters; ``None`` on table miss."""
        self.lookups += 1
        best = None
        bucket = self._exact.get(key)
        if bucket:
            for entry in bucket:
                port = entry.match.ingress_port
                if (port is None or port == ingress_port) and not entry.expired(now):
                    best = entry
                    break
        if self._wild:
            bound = best.sort_key() if best is not None else None
            for entry in self._wild:
                if bound is not None and entry.sort_key() > bound:
                    break
                if entry.match.matches(key, ingress_port) and not entry.expired(now):
                    best = entry
                    break
        if best is None:
            return None
        self.hits += 1
        best.packet_count += 1
        best.byte_count += size_bytes
        best.last_matched_at = now
        return best

    def expire(self, now: int) -> int:
        stale = [entry for entry in self._by_rule.values() if entry.expired(now)]
        for entry in stale:
            self.remove(entry)
        return len(stale)


def match_packet(
    table: FlowTable, pkt: Packet, ingress_port: Optional[int], now: int
) -> Instruction:
    entry = table.lookup(pkt.key, ingress_port, now, pkt.size_bytes)
    return DEFAULT_ROUTE if entry is None else entry.instruction


def expire_entries(table: FlowTable, now: int) -> int:
    return table.expire(now)


class Decision(enum.Enum):
    DELIVER_LOCAL = "deliver_local"
    SEND_TUNNEL = "send_tunnel"
    DROP = "drop"
    DEFAULT_PATH = "default_path"


class ForwardingDecision(NamedTuple):
    kind: Decision
    arg: int = 0


DEFAULT_PATH = ForwardingDecision(Decision.DEFAULT_PATH)
DROP = ForwardingDecision(Decision.DROP)


@dataclass
class AttachmentRecord:
    mn_id: MnId
    assigned_ip: Address
    port_id: int
    attached_at: int


class MobilityAgent:
    """One MA (PGW or WAG role).

    Addresses come from a sequential pool starting at ``pool_base``; a detached
    UE's address is quarantined for the rest of the run, so a re-attach always
    gets a fresh address.
    """

    def __init__(
        self,
        ma_id: MaId,
        tunnel_ip: Address,
        pool_base: Address,
        pool_size: int = 4096,
        terminates_tunnel: bool = True,
        name: str = "",
    ) -> None:
        if ma_id == 0:
            raise ValueError("ma_id must be nonzero")
        self.ma_id = ma_id
        self.tunnel_ip = tunnel_ip
        self.pool_base = pool_base
        self.pool_size = pool_size
        self.terminates_tunnel = terminates_tunnel
        self.name = name or f"ma{ma_id}"
        self.table = FlowTable()
        self.attachments: dict[MnId, AttachmentRecord] = {}
        self.by_address: dict[Address, AttachmentRecord] = {}
        self.quarantine: set[Address] = set()
        self.decap_errors = 0
        self._next_offset = 0
        self._next_port = 1
        self.xids = XidCounter()

    def _allocate_ip(self) -> Address:
        if self._next_offset >= self.pool_size:
            raise PoolExhausted(f"{self.name}: pool of {self.pool_size} addresses exhausted")
        addr = self.pool_base + self._next_offset
        self._next_offset += 1
        return addr

    def on_ue_attach(self, mn_id: MnId, now: int) -> tuple[AttachmentRecord, BindingUpdate]:
        if mn_id in self.attachments:
            raise AlreadyAttached(f"{self.name}: UE {mn_id} already attached")
        ip = self._allocate_ip()
        record = AttachmentRecord(mn_id, ip, self._next_port, now)
        self._next_port += 1
        self.attachments[mn_id] = record
        self.by_address[ip] = record
        bu = BindingUpdate(
            mn_id, self.ma_id, ip, self.tunnel_ip, record.port_id, Status.ATTACHED, self.xids()
        )
        return record, bu

    def on_ue_detach(self, mn_id: MnId, now: int) -> PortStatusUpdate:
        record = self.attachments.pop(mn_id, None)
        if record is None:
            raise NotAttached(f"{self.name}: UE {mn_id} not attached")
        del self.by_address[record.assigned_ip]
        self.quarantine.add(record.assigned_ip)
        return PortStatusUpdate(mn_id, self.ma_id, record.port_id, Status.DETACHED, self.xids())

    def apply_flow_mod(self, fm: FlowMod, now: int) -> FlowTableEntry:
        if fm.ma_id != self.ma_id:
            raise WrongMa(f"{self.name}: FlowMod for MA {fm.ma_id}")
        if fm.instruction.kind is InstructionKind.DECAP_FORWARD and not self.terminates_tunnel:
            raise AgentError(f"{self.name}: does not terminate tunnels")
        return self.table.install(fm.match, fm.priority, fm.instruction, fm.idle_timeout_us, now)

    def match_packet(self, pkt: Packet, ingress_port: Optional[int], now: int) -> Instruction:
        return match_packet(self.table, pkt, ingress_port, now)

    def route_downlink(
        self, pkt: Packet, ingress_port: Optional[int], now: int
    ) -> ForwardingDecision:
        instruction = self.match_packet(pkt, ingress_port, now)
        kind = instruction.kind
        if kind is InstructionKind.DEFAULT_ROUTE:
            return DEFAULT_PATH
        if kind is InstructionKind.TUNNEL:
            pkt.push_encap(self.ma_id, instruction.arg)
            return ForwardingDecision(Decision.SEND_TUNNEL, instruction.arg)
        if kind is InstructionKind.DECAP_FORWARD:
            if not pkt.encap:
                self.decap_errors += 1
                return DROP
            pkt.pop_encap()
            return ForwardingDecision(Decision.DELIVER_LOCAL, instruction.arg)
        if kind is InstructionKind.FORWARD:
            return ForwardingDecision(Decision.DELIVER_LOCAL, instruction.arg)
        return DROP

    def expire_entries(self, now: int) -> int:
        return self.table.expire(now)

    def attachment_for_port(self, port_id: int) -> Optional[AttachmentRecord]:
        for record in self.attachments.values():
            if record.port_id == port_id:
                return record
        return None
