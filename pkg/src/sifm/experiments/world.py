"""Scenario topologies: the SIFM network (FC + PGW/WAG Mobility Agents) and the
PMIPv6 network (LMA + two MAGs), sharing one radio/transport substrate."""

from __future__ import annotations

import random
from collections import Counter, deque
from dataclasses import dataclass
from typing import Callable, Optional

from ..agent import TUNNEL_PORT, UPSTREAM_PORT, Decision, MobilityAgent
from ..controller import FlowController, Role
from ..messages import (
    Address,
    BindingAck,
    BindingUpdate,
    FlowKey,
    FlowMod,
    MnId,
    PortStatusUpdate,
    Protocol,
    ProxyBindingAck,
    ProxyBindingUpdate,
    decode,
    encode,
    parse_address,
)
from ..packet import Packet
from ..pmip import DownlinkVerdict, LocalMobilityAnchor, MobileAccessGateway
from ..netsim.engine import Simulator, millis, seconds
from ..netsim.links import LTE_UPLINK_EFFECTIVE_BPS, FifoLink, LteDownlink, WifiMedium
from ..netsim.mobility import MobilityEvent, MobilityKind, MobilityScript, apply_mobility
from ..netsim.traffic import APP_RATE_BPS, PAYLOAD_BYTES, TrafficKind, TrafficSource, generate_traffic
from ..netsim.transport import (
    DatagramReceiver,
    DatagramSender,
    Flow,
    FlowStats,
    ReliableReceiver,
    ReliableSender,
)
from ..netsim.ue import SubInterface, UeLogicalInterface
from .config import Architecture, MobilityMode, ScenarioConfig, map_offload_to_movers

REMOTE_HOST = parse_address("172.16.0.1")
PGW_POOL = parse_address("10.0.0.2")
WAG_POOL = parse_address("10.1.0.2")
LMA_POOL = parse_address("10.2.0.2")
PGW_TUNNEL_IP = parse_address("192.168.1.1")
WAG_TUNNEL_IP = parse_address("192.168.1.2")
PREFIX_MASK = 0xFFFF0000

PGW_ID = 1
WAG_ID = 2
LMA_ID = 100
LTE_MAG_ID = 1
WIFI_MAG_ID = 2

TCP_SRC_PORT = 5001
UDP_SRC_PORT = 5002
HOLD_BUFFER_PACKETS = 64


@dataclass
class HandoverRecord:
    mn_id: MnId
    flow: FlowKey
    trigger_us: int
    target: SubInterface
    completion_us: Optional[int] = None

    @property
    def delay_us(self) -> Optional[int]:
        return None if self.completion_us is None else self.completion_us - self.trigger_us


class ControlLink:
    """Point-to-point control channel: messages cross it as encoded bytes."""

    def __init__(self, sim: Simulator, delay_us: int) -> None:
        self.sim = sim
        self.delay_us = delay_us
        self.bytes_sent = 0
        self.messages = 0

    def send(self, msg, handler: Callable) -> None:
        wire = encode(msg)
        self.bytes_sent += len(wire)
        self.messages += 1
        self.sim.after(self.delay_us, self._arrive, wire, handler)

    @staticmethod
    def _arrive(wire: bytes, handler: Callable) -> None:
        handler(decode(wire))


class World:
    """Shared substrate: remote host, radios, UEs, applications and accounting."""

    architecture: Architecture

    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.sim = Simulator()
        self.duration_us = seconds(cfg.duration_s)
        self.warmup_us = seconds(cfg.warmup_s)
        self.d_data = millis(cfg.data_delay_ms)
        self.d_tunnel = millis(cfg.tunnel_delay_ms)
        self.d_control = millis(cfg.control_delay_ms)
        self.lte = LteDownlink(self.sim, self._lte_deliver, rlc_buffer_bytes=cfg.rlc_buffer_bytes)
        self.wifi = WifiMedium(self.sim)
        self.uplink = FifoLink(self.sim, LTE_UPLINK_EFFECTIVE_BPS, 0)
        self.control = ControlLink(self.sim, self.d_control)
        self.ues: dict[MnId, UeLogicalInterface] = {
            mn: UeLogicalInterface(mn) for mn in range(1, cfg.num_users + 1)
        }
        self.flows: list[Flow] = []
        self.flows_by_ue: dict[MnId, list[Flow]] = {mn: [] for mn in self.ues}
        self.drops: Counter = Counter()
        self.ack_drops = 0
        self.handovers: list[HandoverRecord] = []
        self._pending_ho: dict[tuple[MnId, FlowKey], HandoverRecord] = {}
        self._last_sub: dict[FlowKey, SubInterface] = {}
        self.delivered_data = 0
        self.delivered_via_lma = 0
        self.delivered_via_tunnel = 0
        self.encap_violations = 0
        self.packet_observers: list[Callable[[MnId, Packet, SubInterface], None]] = []
        self.movers = map_offload_to_movers(cfg.offload_percent, cfg.num_users).movers
        self.script = self.build_script()

    # scenario construction

    def build_script(self) -> MobilityScript:
        cfg = self.cfg
        events = [MobilityEvent(0, mn, MobilityKind.ATTACH_LTE) for mn in self.ues]
        if cfg.architecture is Architecture.NO_OFFLOAD:
            wifi_ues: tuple[int, ...] = ()
        elif cfg.mobility_mode is MobilityMode.STATIC_DUAL and cfg.architecture is Architecture.SIFM:
            wifi_ues = tuple(self.ues)
        else:
            wifi_ues = self.movers
        attach = seconds(cfg.wifi_attach_s)
        for mn in wifi_ues:
            events.append(MobilityEvent(attach, mn, MobilityKind.ATTACH_WIFI))
            if cfg.mobility_mode is MobilityMode.MOVING and cfg.wifi_detach_s is not None:
                events.append(MobilityEvent(seconds(cfg.wifi_detach_s), mn, MobilityKind.DETACH_WIFI))
        if cfg.lte_detach_s is not None:
            for mn in wifi_ues:
                events.append(MobilityEvent(seconds(cfg.lte_detach_s), mn, MobilityKind.DETACH_LTE))
        return MobilityScript(events)

    def start(self) -> None:
        apply_mobility(self.sim, self.script, self._on_mobility)
        start = seconds(self.cfg.app_start_s)
        for mn in self.ues:
            self.sim.schedule(start, self._start_apps, mn)

    def run(self) -> None:
        self.start()
        self.sim.run(until=self.duration_us)

    def _start_apps(self, mn: MnId) -> None:
        address = self.ues[mn].current_address()
        if address is None:
            # not configured yet (e.g. PMIPv6 still waiting for its RA)
            self.sim.after(millis(1), self._start_apps, mn)
            return
        self.start_flow(mn, Protocol.TCPLIKE, address, TCP_SRC_PORT)
        self.start_flow(mn, Protocol.UDPLIKE, address, UDP_SRC_PORT)

    def start_flow(
        self, mn: MnId, protocol: Protocol, dst: Address, src_port: int, dst_port: Optional[int] = None
    ) -> Flow:
        cfg = self.cfg
        key = FlowKey(REMOTE_HOST, dst, src_port, dst_port or 20000 + mn, protocol)
        flow = Flow(key, mn, FlowStats(mn, key, self.warmup_us), APP_RATE_BPS)
        if protocol is Protocol.TCPLIKE:
            ReliableSender(
                self.sim, flow, self._from_remote, PAYLOAD_BYTES,
                window_cap=cfg.window_cap_segments, min_rto_us=millis(cfg.min_rto_ms),
            )
            ReliableReceiver(self.sim, flow, self._ue_send_ack, cfg.delay_origin)
        else:
            DatagramSender(self.sim, flow, self._from_remote, PAYLOAD_BYTES)
            DatagramReceiver(self.sim, flow)
        self.flows.append(flow)
        self.flows_by_ue[mn].append(flow)
        self.on_flow_started(flow)
        source = TrafficSource(cfg.traffic, APP_RATE_BPS, PAYLOAD_BYTES)
        rng = random.Random(f"{cfg.seed}/{mn}/{src_port}/{int(protocol)}")
        phase = int(rng.random() * source.mean_interarrival_us) if cfg.traffic is TrafficKind.CBR else 0
        arrivals = generate_traffic(source, self.duration_us, rng, self.sim.now + phase)
        first = next(arrivals, None)
        if first is not None:
            self.sim.schedule(first, self._app_tick, flow, arrivals)
        return flow

    def _app_tick(self, flow: Flow, arrivals) -> None:
        flow.sender.app_send()
        nxt = next(arrivals, None)
        if nxt is not None:
            self.sim.schedule(nxt, self._app_tick, flow, arrivals)

    def on_flow_started(self, flow: Flow) -> None:
        pass

    # remote host

    def _from_remote(self, pkt: Packet) -> None:
        self.sim.after(self.d_data, self.downlink_ingress, pkt)

    def _ack_at_remote(self, pkt: Packet) -> None:
        pkt.flow.sender.on_ack(pkt.ack_no)

    def downlink_ingress(self, pkt: Packet) -> None:
        raise NotImplementedError

    # radios and UE

    def drop(self, pkt: Packet, reason: str) -> None:
        self.drops[reason] += 1
        if pkt.is_ack:
            self.ack_drops += 1
        else:
            pkt.flow.stats.on_drop(pkt)

    def radio_send(self, mn: MnId, sub: SubInterface, pkt: Packet) -> None:
        if not self.ues[mn].is_up(sub):
            self.drop(pkt, "radio_down")
        elif sub is SubInterface.LTE:
            if not self.lte.enqueue(mn, pkt):
                self.drop(pkt, "rlc_overflow")
        elif not self.wifi.send(pkt, self._wifi_arrive, mn, pkt):
            self.drop(pkt, "wifi_queue")

    def _lte_deliver(self, mn: MnId, pkt: Packet) -> None:
        self._arrive(mn, pkt, SubInterface.LTE)

    def _wifi_arrive(self, mn: MnId, pkt: Packet) -> None:
        self._arrive(mn, pkt, SubInterface.WIFI)

    def _arrive(self, mn: MnId, pkt: Packet, sub: SubInterface) -> None:
        ue = self.ues[mn]
        if not ue.receive(pkt, sub):
            self.drop(pkt, "ue_rejected")
            return
        self.delivered_data += 1
        if pkt.encap or pkt.pushes != pkt.pops:
            self.encap_violations += 1
        if pkt.pushes:
            self.delivered_via_tunnel += 1
        if pkt.via & 8:
            self.delivered_via_lma += 1
        if self._last_sub.get(pkt.key) is not sub:
            self._last_sub[pkt.key] = sub
            record = self._pending_ho.get((mn, pkt.key))
            if record is not None and record.target is sub:
                record.completion_us = self.sim.now
                self.handovers.append(record)
                del self._pending_ho[(mn, pkt.key)]
        for observer in self.packet_observers:
            observer(mn, pkt, sub)

    def _ue_send_ack(self, ack: Packet) -> None:
        mn = ack.flow.mn_id
        sub = self.ues[mn].uplink_interface()
        if sub is None:
            self.drop(ack, "no_uplink")
        elif sub is SubInterface.LTE:
            self.uplink.send(ack.size_bytes, self.uplink_ingress, mn, ack, sub)
        elif not self.wifi.send(ack, self.uplink_ingress, mn, ack, sub):
            self.drop(ack, "wifi_queue")

    def uplink_ingress(self, mn: MnId, pkt: Packet, sub: SubInterface) -> None:
        raise NotImplementedError

    # mobility bookkeeping

    def _mark_handover(self, mn: MnId, target: SubInterface) -> None:
        now = self.sim.now
        for flow in self.flows_by_ue[mn]:
            self._pending_ho.pop((mn, flow.key), None)
            if self._last_sub.get(flow.key) is not target:
                self._pending_ho[(mn, flow.key)] = HandoverRecord(mn, flow.key, now, target)

    def _on_mobility(self, event: MobilityEvent) -> None:
        kind = event.kind
        if kind is not MobilityKind.ATTACH_LTE or event.time_us > 0:
            target = {
                MobilityKind.ATTACH_WIFI: SubInterface.WIFI,
                MobilityKind.DETACH_LTE: SubInterface.WIFI,
                MobilityKind.ATTACH_LTE: SubInterface.LTE,
                MobilityKind.DETACH_WIFI: SubInterface.LTE,
            }[kind]
            self._mark_handover(event.mn_id, target)
        self.on_mobility(event)

    def on_mobility(self, event: MobilityEvent) -> None:
        raise NotImplementedError

    # metrics helpers

    def tunnel_checks(self) -> dict[str, int]:
        return {
            "delivered": self.delivered_data,
            "via_tunnel": self.delivered_via_tunnel,
            "via_lma": self.delivered_via_lma,
            "encap_violations": self.encap_violations,
        }


class _MaNode:
    def __init__(self, agent: MobilityAgent, sub: SubInterface) -> None:
        self.agent = agent
        self.sub = sub
        self.held: dict[Address, deque] = {}
        self.ports: dict[int, MnId] = {}


class SifmWorld(World):
    """Flow Controller plus PGW and WAG Mobility Agents; both MAs attach to the
    Internet directly and share a pre-established IP-in-IP tunnel."""

    architecture = Architecture.SIFM

    def __init__(self, cfg: ScenarioConfig) -> None:
        super().__init__(cfg)
        self.fc = FlowController(cfg.offload_policy())
        self.pgw = _MaNode(MobilityAgent(PGW_ID, PGW_TUNNEL_IP, PGW_POOL, name="pgw"), SubInterface.LTE)
        self.wag = _MaNode(MobilityAgent(WAG_ID, WAG_TUNNEL_IP, WAG_POOL, name="wag"), SubInterface.WIFI)
        self.nodes = {PGW_ID: self.pgw, WAG_ID: self.wag}
        self.by_prefix = {PGW_POOL & PREFIX_MASK: self.pgw, WAG_POOL & PREFIX_MASK: self.wag}
        self.fc.register_ma(PGW_ID, Role.LTE, PGW_TUNNEL_IP)
        self.fc.register_ma(WAG_ID, Role.WIFI, WAG_TUNNEL_IP)
        self.flow_mods_applied = 0
        self.acks_received: list[BindingAck] = []

    def on_flow_started(self, flow: Flow) -> None:
        self.fc.register_flow(flow.mn_id, flow.key, flow.rate_bps)

    # data plane

    def downlink_ingress(self, pkt: Packet) -> None:
        node = self.by_prefix.get(pkt.key.dst_addr & PREFIX_MASK)
        if node is None:
            self.drop(pkt, "no_route")
        else:
            self._route(node, pkt, UPSTREAM_PORT)

    def _tunnel_arrive(self, node: _MaNode, pkt: Packet) -> None:
        self._route(node, pkt, TUNNEL_PORT)

    def _route(self, node: _MaNode, pkt: Packet, ingress: int) -> None:
        agent = node.agent
        decision = agent.route_downlink(pkt, ingress, self.sim.now)
        kind = decision.kind
        if kind is Decision.DEFAULT_PATH:
            if pkt.encap:
                self.drop(pkt, "tunnel_miss")
                return
            record = agent.by_address.get(pkt.key.dst_addr)
            if record is not None:
                self.radio_send(record.mn_id, node.sub, pkt)
            elif pkt.key.dst_addr in agent.quarantine:
                self._hold(node, pkt)
            else:
                self.drop(pkt, "no_route")
        elif kind is Decision.SEND_TUNNEL:
            self.sim.after(self.d_tunnel, self._tunnel_arrive, self.nodes[decision.arg], pkt)
        elif kind is Decision.DELIVER_LOCAL:
            mn = node.ports.get(decision.arg)
            if mn is None:
                self.drop(pkt, "stale_port")
            else:
                self.radio_send(mn, node.sub, pkt)
        else:
            self.drop(pkt, "flow_rule")

    def _hold(self, node: _MaNode, pkt: Packet) -> None:
        """Keep packets for a just-detached address until the FC's rules arrive."""
        queue = node.held.setdefault(pkt.key.dst_addr, deque())
        if len(queue) >= HOLD_BUFFER_PACKETS:
            self.drop(pkt, "hold_overflow")
        else:
            queue.append(pkt)

    def _replay_held(self, node: _MaNode) -> None:
        if not node.held:
            return
        held, node.held = node.held, {}
        for queue in held.values():
            for pkt in queue:
                self._route(node, pkt, UPSTREAM_PORT)

    def uplink_ingress(self, mn: MnId, pkt: Packet, sub: SubInterface) -> None:
        self.sim.after(self.d_data, self._ack_at_remote, pkt)

    # control plane

    def on_mobility(self, event: MobilityEvent) -> None:
        mn, kind = event.mn_id, event.kind
        node = self.pgw if kind.network == "lte" else self.wag
        agent = node.agent
        ue = self.ues[mn]
        now = self.sim.now
        if kind.is_attach:
            record, bu = agent.on_ue_attach(mn, now)
            node.ports[record.port_id] = mn
            ue.attach(node.sub, record.assigned_ip)
            self.control.send(bu, self._fc_binding_update)
        else:
            ps = agent.on_ue_detach(mn, now)
            node.ports.pop(ps.port_id, None)
            ue.detach(node.sub)
            if node.sub is SubInterface.LTE:
                for pkt in self.lte.flush(mn):
                    self.drop(pkt, "radio_lost")
            self.control.send(ps, self._fc_port_status)

    def _fc_binding_update(self, bu: BindingUpdate) -> None:
        ack, mods = self.fc.handle_binding_update(bu, self.sim.now)
        self.control.send(ack, self._ma_binding_ack)
        self._send_flow_mods(mods)

    def _fc_port_status(self, ps: PortStatusUpdate) -> None:
        self._send_flow_mods(self.fc.handle_port_status_update(ps, self.sim.now))

    def _send_flow_mods(self, mods: list[FlowMod]) -> None:
        for fm in mods:
            self.control.send(fm, self._ma_flow_mod)

    def _ma_binding_ack(self, ack: BindingAck) -> None:
        self.acks_received.append(ack)

    def _ma_flow_mod(self, fm: FlowMod) -> None:
        node = self.nodes[fm.ma_id]
        node.agent.apply_flow_mod(fm, self.sim.now)
        self.flow_mods_applied += 1
        self._replay_held(node)


class PmipWorld(World):
    """LMA anchoring every UE, with one MAG per access network.

    A UE is served by one MAG at a time. Moving between access networks is
    break-before-make: the old MAG deregisters the UE (PBU with lifetime 0)
    and, once that is acknowledged, the UE completes attachment at the new
    MAG, which registers it and sends the Router Advertisement after the PBA.
    """

    architecture = Architecture.PMIPV6

    def __init__(self, cfg: ScenarioConfig) -> None:
        super().__init__(cfg)
        self.lma = LocalMobilityAnchor(LMA_ID, LMA_POOL)
        self.mags = {
            SubInterface.LTE: MobileAccessGateway(LTE_MAG_ID, name="lte-mag"),
            SubInterface.WIFI: MobileAccessGateway(WIFI_MAG_ID, name="wifi-mag"),
        }
        self.sub_of_mag = {LTE_MAG_ID: SubInterface.LTE, WIFI_MAG_ID: SubInterface.WIFI}
        self.coverage: dict[MnId, set[SubInterface]] = {mn: set() for mn in self.ues}
        self.serving: dict[MnId, Optional[SubInterface]] = {mn: None for mn in self.ues}
        self.signalling: list[tuple[int, str, MnId, int]] = []
        self._dereg: dict[MnId, tuple[int, int]] = {}

    # data plane

    def downlink_ingress(self, pkt: Packet) -> None:
        mag_id = self.lma.route_downlink(pkt, self.sim.now)
        if mag_id is None:
            self.drop(pkt, "lma_unbound")
            return
        self.sim.after(self.d_tunnel, self._mag_arrive, self.sub_of_mag[mag_id], pkt)

    def _mag_arrive(self, sub: SubInterface, pkt: Packet) -> None:
        binding = self.lma.by_address.get(pkt.key.dst_addr)
        mn = binding.mn_id
        verdict = self.mags[sub].accept_downlink(pkt, mn, self.sim.now)
        if verdict is DownlinkVerdict.DELIVER:
            self.radio_send(mn, sub, pkt)
        elif verdict is DownlinkVerdict.DROPPED:
            self.drop(pkt, "mag")

    def uplink_ingress(self, mn: MnId, pkt: Packet, sub: SubInterface) -> None:
        # MAG -> LMA reverse tunnel -> Internet
        self.sim.after(self.d_tunnel + self.d_data, self._ack_at_remote, pkt)

    # control plane

    def on_mobility(self, event: MobilityEvent) -> None:
        mn = event.mn_id
        sub = SubInterface.LTE if event.kind.network == "lte" else SubInterface.WIFI
        if event.kind.is_attach:
            self.coverage[mn].add(sub)
        else:
            self.coverage[mn].discard(sub)
        self._reselect(mn)

    def _preferred(self, mn: MnId) -> Optional[SubInterface]:
        covered = self.coverage[mn]
        if SubInterface.WIFI in covered:
            return SubInterface.WIFI
        if SubInterface.LTE in covered:
            return SubInterface.LTE
        return None

    def _reselect(self, mn: MnId) -> None:
        target = self._preferred(mn)
        current = self.serving[mn]
        if target is current or mn in self._dereg:
            return
        if current is None:
            self._attach(mn, target)
            return
        # break before make
        self.serving[mn] = None
        self.ues[mn].detach(current)
        if current is SubInterface.LTE:
            for pkt in self.lte.flush(mn):
                self.drop(pkt, "radio_lost")
        pbu = self.mags[current].on_detach(mn, self.sim.now)
        self._dereg[mn] = (pbu.mag_id, pbu.xid)
        self._log("dereg_pbu", mn, pbu.mag_id)
        self.control.send(pbu, self._lma_pbu)

    def _attach(self, mn: MnId, sub: Optional[SubInterface]) -> None:
        self.serving[mn] = sub
        if sub is None:
            return
        pbu = self.mags[sub].on_attach(mn, self.sim.now)
        self._log("pbu", mn, pbu.mag_id)
        self.control.send(pbu, self._lma_pbu)

    def _lma_pbu(self, pbu: ProxyBindingUpdate) -> None:
        self._log("lma_pbu", pbu.mn_id, pbu.mag_id)
        pba = self.lma.handle_pbu(pbu, self.sim.now)
        self.control.send(pba, self._mag_pba)

    def _mag_pba(self, pba: ProxyBindingAck) -> None:
        sub = self.sub_of_mag[pba.mag_id]
        mn = pba.mn_id
        self._log("pba", mn, pba.mag_id)
        if self._dereg.get(mn) == (pba.mag_id, pba.xid):
            # the old MAG's deregistration is acknowledged: attach at the new one
            del self._dereg[mn]
            self._attach(mn, self._preferred(mn))
            return
        if self.serving[mn] is not sub:
            return
        ra, flushed = self.mags[sub].handle_pba(pba, self.sim.now)
        if ra is None:
            return
        self._log("ra", mn, pba.mag_id)
        self.ues[mn].attach(sub, ra.home_prefix)
        for pkt in flushed:
            self.radio_send(mn, sub, pkt)

    def _log(self, what: str, mn: MnId, mag_id: int) -> None:
        self.signalling.append((self.sim.now, what, mn, mag_id))


def build_world(cfg: ScenarioConfig) -> World:
    if cfg.architecture is Architecture.PMIPV6:
        return PmipWorld(cfg)
    return SifmWorld(cfg)
