"""In-memory data-plane datagram shared by the protocol modules and the simulator."""

from __future__ import annotations

from typing import Optional

from .messages import FlowKey

ENCAP_OVERHEAD_BYTES = 20

# Bits recorded in Packet.via as the packet moves through the network.
VIA_LTE = 1
VIA_WIFI = 2
VIA_TUNNEL = 4
VIA_LMA = 8


class Packet:
    """One simulated datagram.

    ``encap`` is a stack of ``(outer_src, outer_dst)`` tunnel headers; each push
    adds :data:`ENCAP_OVERHEAD_BYTES` to the wire size. ``pushes``/``pops`` count
    tunnel operations over the whole trajectory.
    """

    __slots__ = (
        "key", "size_bytes", "created_at", "first_tx_at", "sent_at", "delivered_at",
        "encap", "seq", "flow", "via", "pushes", "pops", "is_ack", "ack_no", "retx",
    )

    def __init__(
        self,
        key: FlowKey,
        size_bytes: int,
        created_at: int,
        seq: int = 0,
        flow=None,
        first_tx_at: Optional[int] = None,
    ) -> None:
        self.key = key
        self.size_bytes = size_bytes
        self.created_at = created_at
        self.first_tx_at = created_at if first_tx_at is None else first_tx_at
        self.sent_at = self.first_tx_at
        self.delivered_at: Optional[int] = None
        self.encap: list[tuple[int, int]] = []
        self.seq = seq
        self.flow = flow
        self.via = 0
        self.pushes = 0
        self.pops = 0
        self.is_ack = False
        self.ack_no = 0
        self.retx = False

    @property
    def wire_size(self) -> int:
        return self.size_bytes + ENCAP_OVERHEAD_BYTES * len(self.encap)

    def push_encap(self, outer_src: int, outer_dst: int) -> None:
        self.encap.append((outer_src, outer_dst))
        self.pushes += 1
        self.via |= VIA_TUNNEL

    def pop_encap(self) -> tuple[int, int]:
        header = self.encap.pop()
        self.pops += 1
        return header

    def __repr__(self) -> str:
        return f"Packet({self.key}, seq={self.seq}, {self.size_bytes}B, encap={len(self.encap)})"
