"""Minimal transports: a timeout-driven reliable flow and a plain datagram flow.

The reliable flow does slow start and congestion avoidance, retransmits only on
retransmission timeout (RFC 6298 estimator with Karn's rule and exponential
backoff), and after a timeout repairs one hole per partial acknowledgement.
The receiver buffers out-of-order segments and acknowledges cumulatively.
"""

from __future__ import annotations

import enum
from typing import Callable, Optional

from ..messages import FlowKey, MnId, Protocol
from ..packet import Packet
from .engine import Simulator

ACK_BYTES = 40
DEFAULT_WINDOW_CAP = 64
DEFAULT_MIN_RTO_US = 1_000_000
INITIAL_RTO_US = 1_000_000
MAX_RTO_US = 60_000_000
DEFAULT_MAX_RETRIES = 15
CLOCK_GRANULARITY_US = 1_000


class DelayOrigin(enum.Enum):
    """Where per-packet delay is measured from."""

    FIRST_TX = "first_tx"
    CREATED = "created"


class FlowStats:
    """Raw per-flow counters and the per-packet delivery log.

    ``sent``/``dropped`` count network transmissions whose send time is at or
    after ``warmup_us``; ``records`` holds ``(delivered_at, delay_us, bytes)``
    for every in-order delivery.
    """

    __slots__ = (
        "mn_id", "key", "protocol", "warmup_us", "generated", "sent", "dropped",
        "retransmissions", "resets", "duplicates", "records",
    )

    def __init__(self, mn_id: MnId, key: FlowKey, warmup_us: int = 0) -> None:
        self.mn_id = mn_id
        self.key = key
        self.protocol = Protocol(key.protocol)
        self.warmup_us = warmup_us
        self.generated = 0
        self.sent = 0
        self.dropped = 0
        self.retransmissions = 0
        self.resets = 0
        self.duplicates = 0
        self.records: list[tuple[int, int, int]] = []

    def on_transmit(self, pkt: Packet) -> None:
        if pkt.sent_at >= self.warmup_us:
            self.sent += 1

    def on_drop(self, pkt: Packet) -> None:
        if pkt.sent_at >= self.warmup_us:
            self.dropped += 1


class Flow:
    """Sender, receiver and statistics of one application flow."""

    __slots__ = ("key", "mn_id", "stats", "sender", "receiver", "rate_bps")

    def __init__(self, key: FlowKey, mn_id: MnId, stats: FlowStats, rate_bps: float) -> None:
        self.key = key
        self.mn_id = mn_id
        self.stats = stats
        self.rate_bps = rate_bps
        self.sender = None
        self.receiver = None

    @property
    def protocol(self) -> Protocol:
        return self.stats.protocol

    @property
    def reverse_key(self) -> FlowKey:
        k = self.key
        return FlowKey(k.dst_addr, k.src_addr, k.dst_port, k.src_port, k.protocol)


class ReliableSender:
    def __init__(
        self,
        sim: Simulator,
        flow: Flow,
        transmit: Callable[[Packet], None],
        payload_bytes: int = 1000,
        window_cap: int = DEFAULT_WINDOW_CAP,
        min_rto_us: int = DEFAULT_MIN_RTO_US,
        max_retries: int = DEFAULT_MAX_RETRIES,
    ) -> None:
        self.sim = sim
        self.flow = flow
        self.transmit = transmit
        self.payload_bytes = payload_bytes
        self.window_cap = window_cap
        self.min_rto_us = min_rto_us
        self.max_retries = max_retries
        self.cwnd = 1.0
        self.ssthresh = float("inf")
        self.created: list[int] = []
        self.first_tx: dict[int, int] = {}
        self.last_tx: dict[int, int] = {}
        self.retransmitted: set[int] = set()
        self.snd_una = 0
        self.next_seq = 0
        self.recover = 0
        self.srtt: Optional[float] = None
        self.rttvar = 0.0
        self.rto_us = INITIAL_RTO_US
        self.retries = 0
        self.timeouts = 0
        self.aborted = False
        self._deadline: Optional[int] = None
        self._timer_armed = False
        flow.sender = self

    # application side

    def app_send(self) -> None:
        """The application hands one segment to the transport."""
        self.created.append(self.sim.now)
        self.flow.stats.generated += 1
        self._pump()

    @property
    def in_flight(self) -> int:
        return self.next_seq - self.snd_una

    def _window(self) -> int:
        return min(int(self.cwnd), self.window_cap)

    def _pump(self) -> None:
        if self.aborted:
            return
        limit = self._window()
        while self.next_seq < len(self.created) and self.next_seq - self.snd_una < limit:
            self._send_segment(self.next_seq)
            self.next_seq += 1

    def _send_segment(self, seq: int) -> None:
        now = self.sim.now
        first = self.first_tx.get(seq)
        if first is None:
            first = self.first_tx[seq] = now
        else:
            self.retransmitted.add(seq)
            self.flow.stats.retransmissions += 1
        self.last_tx[seq] = now
        pkt = Packet(self.flow.key, self.payload_bytes, self.created[seq], seq, self.flow, first)
        pkt.sent_at = now
        pkt.retx = seq in self.retransmitted
        self.flow.stats.on_transmit(pkt)
        if self._deadline is None:
            self._arm()
        self.transmit(pkt)

    # acknowledgements

    def on_ack(self, ack_no: int) -> None:
        if self.aborted or ack_no <= self.snd_una:
            return
        now = self.sim.now
        newest = ack_no - 1
        if newest not in self.retransmitted and newest in self.last_tx:
            self._rtt_sample(now - self.last_tx[newest])
        for seq in range(self.snd_una, ack_no):
            self.first_tx.pop(seq, None)
            self.last_tx.pop(seq, None)
            self.retransmitted.discard(seq)
        self.snd_una = ack_no
        if self.next_seq < ack_no:
            self.next_seq = ack_no
        self.retries = 0
        if self.cwnd < self.ssthresh:
            self.cwnd += 1.0
        else:
            self.cwnd += 1.0 / self.cwnd
        if ack_no < self.recover:
            # partial ack after a timeout: the receiver is missing ``ack_no``
            self._send_segment(ack_no)
        if self.snd_una == self.next_seq:
            self._deadline = None
        else:
            self._arm()
        self._pump()

    def _rtt_sample(self, r: float) -> None:
        if self.srtt is None:
            self.srtt = r
            self.rttvar = r / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - r)
            self.srtt = 0.875 * self.srtt + 0.125 * r
        rto = self.srtt + max(CLOCK_GRANULARITY_US, 4 * self.rttvar)
        self.rto_us = int(min(MAX_RTO_US, max(self.min_rto_us, rto)))

    # retransmission timer (one lazily re-armed event)

    def _arm(self) -> None:
        self._deadline = self.sim.now + self.rto_us
        if not self._timer_armed:
            self._timer_armed = True
            self.sim.schedule(self._deadline, self._on_timer)

    def _on_timer(self) -> None:
        self._timer_armed = False
        if self._deadline is None or self.aborted:
            return
        if self.sim.now < self._deadline:
            self._timer_armed = True
            self.sim.schedule(self._deadline, self._on_timer)
            return
        self.on_timeout()

    def on_timeout(self) -> None:
        self.timeouts += 1
        self.retries += 1
        if self.retries > self.max_retries:
            self.aborted = True
            self.flow.stats.resets += 1
            self._deadline = None
            return
        self.ssthresh = max(self.cwnd / 2, 2.0)
        self.cwnd = 1.0
        self.rto_us = min(MAX_RTO_US, self.rto_us * 2)
        self.recover = self.next_seq
        self._deadline = None
        self._send_segment(self.snd_una)


class ReliableReceiver:
    def __init__(
        self,
        sim: Simulator,
        flow: Flow,
        send_ack: Callable[[Packet], None],
        delay_origin: DelayOrigin = DelayOrigin.FIRST_TX,
    ) -> None:
        self.sim = sim
        self.flow = flow
        self.send_ack = send_ack
        self.from_creation = delay_origin is DelayOrigin.CREATED
        self.expected = 0
        self.buffer: dict[int, Packet] = {}
        self.delivered_seqs: list[int] = []
        flow.receiver = self

    def on_packet(self, pkt: Packet) -> None:
        now = self.sim.now
        stats = self.flow.stats
        seq = pkt.seq
        if seq == self.expected:
            self._deliver(pkt, now, stats)
            buffer = self.buffer
            while self.expected in buffer:
                self._deliver(buffer.pop(self.expected), now, stats)
        elif seq > self.expected and seq not in self.buffer:
            self.buffer[seq] = pkt
        else:
            stats.duplicates += 1
        ack = Packet(self.flow.reverse_key, ACK_BYTES, now, seq, self.flow)
        ack.is_ack = True
        ack.ack_no = self.expected
        self.send_ack(ack)

    def _deliver(self, pkt: Packet, now: int, stats: FlowStats) -> None:
        pkt.delivered_at = now
        origin = pkt.created_at if self.from_creation else pkt.first_tx_at
        stats.records.append((now, now - origin, pkt.size_bytes))
        self.delivered_seqs.append(pkt.seq)
        self.expected += 1


class DatagramSender:
    def __init__(
        self, sim: Simulator, flow: Flow, transmit: Callable[[Packet], None], payload_bytes: int = 1000
    ) -> None:
        self.sim = sim
        self.flow = flow
        self.transmit = transmit
        self.payload_bytes = payload_bytes
        self.next_seq = 0
        flow.sender = self

    def app_send(self) -> None:
        now = self.sim.now
        pkt = Packet(self.flow.key, self.payload_bytes, now, self.next_seq, self.flow)
        self.next_seq += 1
        stats = self.flow.stats
        stats.generated += 1
        stats.on_transmit(pkt)
        self.transmit(pkt)

    def on_ack(self, ack_no: int) -> None:  # datagrams are never acknowledged
        pass


class DatagramReceiver:
    def __init__(self, sim: Simulator, flow: Flow) -> None:
        self.sim = sim
        self.flow = flow
        self.seen: set[int] = set()
        flow.receiver = self

    def on_packet(self, pkt: Packet) -> None:
        if pkt.seq in self.seen:
            self.flow.stats.duplicates += 1
            return
        self.seen.add(pkt.seq)
        now = self.sim.now
        pkt.delivered_at = now
        self.flow.stats.records.append((now, now - pkt.created_at, pkt.size_bytes))
