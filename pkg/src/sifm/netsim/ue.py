"""UE-side logical interface that hides the LTE and WiFi sub-interfaces."""

from __future__ import annotations

import enum
from typing import Callable, Optional

from ..messages import Address, MnId
from ..packet import VIA_LTE, VIA_WIFI, Packet


class SubInterface(enum.IntEnum):
    LTE = VIA_LTE
    WIFI = VIA_WIFI


class UeLogicalInterface:
    """Accepts any packet addressed to one of its bound addresses, whichever
    sub-interface it arrives on; upper layers see a single interface.

    Addresses stay bound after a sub-interface goes down so that flows started
    on it survive being moved elsewhere.
    """

    def __init__(self, mn_id: MnId) -> None:
        self.mn_id = mn_id
        self.bound: set[Address] = set()
        self.addresses: dict[SubInterface, Address] = {}
        self.active = 0
        self.rejected = 0
        self.received = 0
        self.on_receive: Optional[Callable[[Packet, SubInterface], None]] = None

    def attach(self, sub: SubInterface, address: Address) -> None:
        self.active |= sub
        self.addresses[sub] = address
        self.bound.add(address)

    def detach(self, sub: SubInterface) -> None:
        self.active &= ~sub
        self.addresses.pop(sub, None)

    def is_up(self, sub: SubInterface) -> bool:
        return bool(self.active & sub)

    def current_address(self) -> Optional[Address]:
        """Source address for new connections: LTE if up, else WiFi."""
        for sub in (SubInterface.LTE, SubInterface.WIFI):
            if self.active & sub:
                return self.addresses[sub]
        return None

    def uplink_interface(self) -> Optional[SubInterface]:
        if self.active & SubInterface.LTE:
            return SubInterface.LTE
        if self.active & SubInterface.WIFI:
            return SubInterface.WIFI
        return None

    def receive(self, pkt: Packet, sub: SubInterface) -> bool:
        if not self.active & sub or pkt.key.dst_addr not in self.bound:
            self.rejected += 1
            return False
        pkt.via |= sub
        self.received += 1
        if self.on_receive is not None:
            self.on_receive(pkt, sub)
        pkt.flow.receiver.on_packet(pkt)
        return True
