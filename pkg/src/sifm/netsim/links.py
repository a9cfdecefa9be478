"""Calibrated link models: LTE downlink with RLC queues, a shared WiFi medium,
and plain FIFO pipes."""

from __future__ import annotations

import math
from collections import deque
from typing import Callable, Hashable, Optional

from ..packet import Packet
from .engine import Simulator

LTE_NOMINAL_BPS = 100e6
LTE_EFFECTIVE_BPS = 71e6
LTE_UPLINK_EFFECTIVE_BPS = 40e6
TTI_US = 1000
WIFI_PHY_BPS = 54e6
WIFI_TARGET_GOODPUT_BPS = 22e6
WIFI_CALIBRATION_FRAME_BYTES = 1500
WIFI_QUEUE_FRAMES = 500
DEFAULT_RLC_BUFFER_BYTES = 10 * 1024 * 1024


def wifi_overhead_us(
    target_bps: float = WIFI_TARGET_GOODPUT_BPS,
    frame_bytes: int = WIFI_CALIBRATION_FRAME_BYTES,
    phy_bps: float = WIFI_PHY_BPS,
) -> float:
    """Per-frame airtime overhead that makes saturation goodput equal ``target_bps``."""
    return frame_bytes * 8 * (1 / target_bps - 1 / phy_bps) * 1e6


WIFI_OVERHEAD_US = wifi_overhead_us()


def lte_tti_schedule(demands: dict[Hashable, float], capacity_bytes: float) -> dict[Hashable, float]:
    """Equal-share grants with redistribution (water filling).

    Every backlogged UE is offered ``capacity / n``; UEs that need less keep
    only what they need and the remainder is split among the others.
    """
    grants: dict[Hashable, float] = {}
    remaining = capacity_bytes
    ordered = sorted(demands.items(), key=lambda item: item[1])
    n = len(ordered)
    for i, (ue, demand) in enumerate(ordered):
        grant = min(demand, remaining / (n - i))
        grants[ue] = grant
        remaining -= grant
    return grants


class RlcQueue:
    """Per-UE drop-tail byte queue at the eNB.

    ``packets`` holds ``(wire_size, packet)`` pairs; ``served`` counts bytes of
    the head packet already sent over the air.
    """

    __slots__ = ("ue", "packets", "bytes", "served", "limit", "drops")

    def __init__(self, ue: Hashable, limit: int) -> None:
        self.ue = ue
        self.packets: deque[tuple[int, Packet]] = deque()
        self.bytes = 0
        self.served = 0.0
        self.limit = limit
        self.drops = 0

    def __len__(self) -> int:
        return len(self.packets)

    @property
    def demand(self) -> float:
        return self.bytes - self.served


def rlc_enqueue(queue: RlcQueue, pkt: Packet) -> bool:
    """Append ``pkt`` unless it would overflow the byte limit."""
    size = pkt.wire_size
    if queue.bytes + size > queue.limit:
        queue.drops += 1
        return False
    queue.packets.append((size, pkt))
    queue.bytes += size
    return True


class LteDownlink:
    """TTI-driven downlink scheduler over per-UE RLC queues.

    Grants are computed every TTI while any queue is backlogged; a packet is
    delivered (``deliver(ue, pkt)``) at the TTI boundary where its last byte
    is granted.
    """

    def __init__(
        self,
        sim: Simulator,
        deliver: Callable[[Hashable, Packet], None],
        capacity_bps: float = LTE_EFFECTIVE_BPS,
        tti_us: int = TTI_US,
        rlc_buffer_bytes: int = DEFAULT_RLC_BUFFER_BYTES,
    ) -> None:
        self.sim = sim
        self.deliver = deliver
        self.capacity_bps = capacity_bps
        self.tti_us = tti_us
        self.bytes_per_tti = capacity_bps * tti_us / 8e6
        self.rlc_buffer_bytes = rlc_buffer_bytes
        self.queues: dict[Hashable, RlcQueue] = {}
        self._active: dict[Hashable, RlcQueue] = {}
        self._tick_pending = False
        self.delivered_bytes = 0
        self.ticks = 0

    def queue(self, ue: Hashable) -> RlcQueue:
        q = self.queues.get(ue)
        if q is None:
            q = self.queues[ue] = RlcQueue(ue, self.rlc_buffer_bytes)
        return q

    def enqueue(self, ue: Hashable, pkt: Packet) -> bool:
        q = self.queue(ue)
        if not rlc_enqueue(q, pkt):
            return False
        self._active[ue] = q
        if not self._tick_pending:
            self._tick_pending = True
            tti = self.tti_us
            self.sim.schedule((self.sim.now // tti + 1) * tti, self._tick)
        return True

    def flush(self, ue: Hashable) -> list[Packet]:
        """Discard everything queued for ``ue`` (radio link lost)."""
        q = self.queues.get(ue)
        if q is None:
            return []
        dropped = [pkt for _, pkt in q.packets]
        q.packets.clear()
        q.bytes = 0
        q.served = 0.0
        self._active.pop(ue, None)
        return dropped

    def _tick(self) -> None:
        self.ticks += 1
        active = self._active
        # water filling over the backlogged queues, smallest demand first
        ordered = sorted(active.values(), key=lambda q: q.bytes - q.served)
        remaining = self.bytes_per_tti
        n = len(ordered)
        deliver = self.deliver
        delivered = 0
        for i, q in enumerate(ordered):
            demand = q.bytes - q.served
            share = remaining / (n - i)
            grant = demand if demand < share else share
            remaining -= grant
            served = q.served + grant
            packets = q.packets
            while packets:
                size = packets[0][0]
                if served < size - 1e-6:
                    break
                pkt = packets.popleft()[1]
                served -= size
                q.bytes -= size
                delivered += size
                deliver(q.ue, pkt)
            if packets:
                q.served = served if served > 0.0 else 0.0
            else:
                q.served = 0.0
                active.pop(q.ue, None)
        self.delivered_bytes += delivered
        if active:
            self.sim.after(self.tti_us, self._tick)
        else:
            self._tick_pending = False


class WifiMedium:
    """A single shared 802.11 medium: frames are serialized FIFO and each one
    costs a fixed overhead plus its payload at the PHY rate."""

    def __init__(
        self,
        sim: Simulator,
        phy_bps: float = WIFI_PHY_BPS,
        overhead_us: float = WIFI_OVERHEAD_US,
        queue_frames: int = WIFI_QUEUE_FRAMES,
    ) -> None:
        self.sim = sim
        self.phy_bps = phy_bps
        self.overhead_us = overhead_us
        self.queue_frames = queue_frames
        self._busy_until = 0.0
        self._completions: deque[int] = deque()
        self.drops = 0
        self.delivered_bytes = 0

    def airtime_us(self, payload_bytes: int) -> float:
        return self.overhead_us + payload_bytes * 8e6 / self.phy_bps

    def wifi_transmit(self, payload_bytes: int) -> Optional[int]:
        """Reserve the medium for one frame; returns its completion time or
        ``None`` if the transmit queue is full."""
        now = self.sim.now
        pending = self._completions
        while pending and pending[0] <= now:
            pending.popleft()
        if len(pending) >= self.queue_frames:
            self.drops += 1
            return None
        start = max(float(now), self._busy_until)
        self._busy_until = start + self.airtime_us(payload_bytes)
        done = int(math.ceil(self._busy_until))
        pending.append(done)
        return done

    def send(self, pkt: Packet, on_done: Callable, *args) -> bool:
        done = self.wifi_transmit(pkt.wire_size)
        if done is None:
            return False
        self.delivered_bytes += pkt.wire_size
        self.sim.schedule(done, on_done, *args)
        return True


class FifoLink:
    """Point-to-point pipe with serialization at ``rate_bps`` and a fixed
    propagation delay; unbounded FIFO."""

    def __init__(self, sim: Simulator, rate_bps: float, delay_us: int) -> None:
        self.sim = sim
        self.rate_bps = rate_bps
        self.delay_us = delay_us
        self._busy_until = 0.0

    def send(self, size_bytes: int, on_arrival: Callable, *args) -> int:
        start = max(float(self.sim.now), self._busy_until)
        self._busy_until = start + size_bytes * 8e6 / self.rate_bps
        arrival = int(math.ceil(self._busy_until)) + self.delay_us
        self.sim.schedule(arrival, on_arrival, *args)
        return arrival
