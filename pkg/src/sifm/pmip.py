"""Proxy Mobile IPv6 baseline: a Local Mobility Anchor and Mobile Access Gateways.

The LMA anchors every UE at a stable home address and tunnels all downlink
traffic to the UE's current MAG. A MAG registers a newly attached UE with a
Proxy Binding Update and may only hand traffic to the UE once the Proxy
Binding Ack has arrived and it has sent the Router Advertisement; until then
downlink packets are held in a small per-UE buffer.
"""

from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .messages import (
    Address,
    MaId,
    MnId,
    ProxyBindingAck,
    ProxyBindingUpdate,
    Result,
    XidCounter,
)
from .packet import VIA_LMA, Packet

log = logging.getLogger(__name__)

DEFAULT_LIFETIME_S = 3600
PENDING_BUFFER_PACKETS = 64


@dataclass
class LmaBinding:
    mn_id: MnId
    home_address: Address
    current_mag: Optional[MaId]
    lifetime_s: int
    updated_at: int

    def expired(self, now: int) -> bool:
        return self.current_mag is not None and now - self.updated_at > self.lifetime_s * 1_000_000


class LocalMobilityAnchor:
    """Anchors UEs at home addresses that never change across MAGs."""

    def __init__(self, lma_id: MaId, pool_base: Address, pool_size: int = 65536) -> None:
        self.lma_id = lma_id
        self.pool_base = pool_base
        self.pool_size = pool_size
        self.bindings: dict[MnId, LmaBinding] = {}
        self.by_address: dict[Address, LmaBinding] = {}
        self.dropped = 0
        self._next_offset = 0

    def home_address_of(self, mn_id: MnId) -> Optional[Address]:
        binding = self.bindings.get(mn_id)
        return None if binding is None else binding.home_address

    def handle_pbu(self, pbu: ProxyBindingUpdate, now: int) -> ProxyBindingAck:
        binding = self.bindings.get(pbu.mn_id)
        if binding is None:
            if self._next_offset >= self.pool_size:
                return ProxyBindingAck(pbu.mn_id, pbu.mag_id, 0, Result.ERROR, pbu.xid)
            address = self.pool_base + self._next_offset
            self._next_offset += 1
            binding = LmaBinding(pbu.mn_id, address, None, pbu.lifetime_s, now)
            self.bindings[pbu.mn_id] = binding
            self.by_address[address] = binding
        if pbu.lifetime_s == 0:
            # Deregistration only detaches the binding from the MAG that sent it.
            if binding.current_mag == pbu.mag_id:
                binding.current_mag = None
        else:
            binding.current_mag = pbu.mag_id
            binding.lifetime_s = pbu.lifetime_s
        binding.updated_at = now
        return ProxyBindingAck(pbu.mn_id, pbu.mag_id, binding.home_address, Result.OK, pbu.xid)

    def route_downlink(self, pkt: Packet, now: int) -> Optional[MaId]:
        """Encapsulate toward the current MAG; ``None`` (and a drop) if unbound."""
        binding = self.by_address.get(pkt.key.dst_addr)
        if binding is None or binding.current_mag is None:
            self.dropped += 1
            return None
        pkt.via |= VIA_LMA
        pkt.push_encap(self.lma_id, binding.current_mag)
        return binding.current_mag

    def expire(self, now: int) -> int:
        stale = [b for b in self.bindings.values() if b.expired(now)]
        for binding in stale:
            binding.current_mag = None
        return len(stale)


class UeState(enum.Enum):
    PENDING = "pending"
    READY = "ready"


@dataclass
class _MagEntry:
    state: UeState
    home_address: Address = 0
    ra_sent: bool = False
    buffer: deque = field(default_factory=deque)


@dataclass
class RouterAdvertisement:
    mn_id: MnId
    mag_id: MaId
    home_prefix: Address


class DownlinkVerdict(enum.Enum):
    DELIVER = "deliver"
    BUFFERED = "buffered"
    DROPPED = "dropped"


class MobileAccessGateway:
    """One MAG (LTE-side or WiFi-side)."""

    def __init__(
        self,
        mag_id: MaId,
        buffer_limit: int = PENDING_BUFFER_PACKETS,
        lifetime_s: int = DEFAULT_LIFETIME_S,
        name: str = "",
    ) -> None:
        self.mag_id = mag_id
        self.buffer_limit = buffer_limit
        self.lifetime_s = lifetime_s
        self.name = name or f"mag{mag_id}"
        self.ues: dict[MnId, _MagEntry] = {}
        self.by_address: dict[Address, MnId] = {}
        self.buffer_drops = 0
        self.unknown_drops = 0
        self.xids = XidCounter()

    def on_attach(self, mn_id: MnId, now: int) -> ProxyBindingUpdate:
        entry = self.ues.get(mn_id)
        if entry is None:
            self.ues[mn_id] = _MagEntry(UeState.PENDING)
        return ProxyBindingUpdate(mn_id, self.mag_id, self.lifetime_s, self.xids())

    def on_detach(self, mn_id: MnId, now: int) -> ProxyBindingUpdate:
        entry = self.ues.pop(mn_id, None)
        if entry is not None:
            self.by_address.pop(entry.home_address, None)
            self.buffer_drops += len(entry.buffer)
        return ProxyBindingUpdate(mn_id, self.mag_id, 0, self.xids())

    def handle_pba(
        self, pba: ProxyBindingAck, now: int
    ) -> tuple[Optional[RouterAdvertisement], list[Packet]]:
        """Confirm a pending UE: returns the RA to send and the packets to flush."""
        entry = self.ues.get(pba.mn_id)
        if entry is None or pba.result is not Result.OK:
            return None, []
        entry.home_address = pba.home_prefix
        self.by_address[pba.home_prefix] = pba.mn_id
        if entry.state is UeState.READY:
            return None, []
        entry.state = UeState.READY
        entry.ra_sent = True
        flushed = list(entry.buffer)
        entry.buffer.clear()
        return RouterAdvertisement(pba.mn_id, self.mag_id, pba.home_prefix), flushed

    def is_ready(self, mn_id: MnId) -> bool:
        entry = self.ues.get(mn_id)
        return entry is not None and entry.state is UeState.READY

    def accept_downlink(self, pkt: Packet, mn_id: MnId, now: int) -> DownlinkVerdict:
        """Terminate the LMA tunnel and decide what happens to the packet."""
        if pkt.encap:
            pkt.pop_encap()
        entry = self.ues.get(mn_id)
        if entry is None:
            self.unknown_drops += 1
            return DownlinkVerdict.DROPPED
        if entry.state is UeState.READY:
            return DownlinkVerdict.DELIVER
        if len(entry.buffer) >= self.buffer_limit:
            self.buffer_drops += 1
            return DownlinkVerdict.DROPPED
        entry.buffer.append(pkt)
        return DownlinkVerdict.BUFFERED
