"""Flow Controller: binding cache, offload policy and FlowMod generation."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .agent import TUNNEL_PORT
from .messages import (
    Address,
    BindingAck,
    BindingUpdate,
    FlowKey,
    FlowMod,
    Instruction,
    MaId,
    MatchFields,
    MnId,
    PortStatusUpdate,
    Protocol,
    Result,
    Status,
)

log = logging.getLogger(__name__)

FLOW_RULE_PRIORITY = 100
WIFI_EFFECTIVE_BPS = 22e6


class Role(enum.Enum):
    LTE = "lte"
    WIFI = "wifi"


@dataclass
class BindingCacheEntry:
    mn_id: MnId
    ma_id: MaId
    mn_ip: Address
    ma_ip: Address
    port_id: int
    status: Status
    updated_at: int


class BindingCache:
    def __init__(self) -> None:
        self._by_mn: dict[MnId, dict[MaId, BindingCacheEntry]] = {}

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_mn.values())

    def __iter__(self):
        for per_ma in self._by_mn.values():
            yield from per_ma.values()

    def get(self, mn_id: MnId, ma_id: MaId) -> Optional[BindingCacheEntry]:
        return self._by_mn.get(mn_id, {}).get(ma_id)

    def upsert(self, entry: BindingCacheEntry) -> None:
        if entry.status is Status.ATTACHED and not entry.mn_ip:
            raise ValueError("an attached binding needs a nonzero mn_ip")
        self._by_mn.setdefault(entry.mn_id, {})[entry.ma_id] = entry

    def lookup(self, mn_id: MnId) -> list[BindingCacheEntry]:
        return list(self._by_mn.get(mn_id, {}).values())

    def attached(self, mn_id: MnId) -> list[BindingCacheEntry]:
        return [e for e in self.lookup(mn_id) if e.status is Status.ATTACHED]


class PolicyKind(enum.Enum):
    NO_OFFLOAD = "no_offload"
    FULL_ON_WIFI_ATTACH = "full"
    SELECTIVE = "selective"


@dataclass(frozen=True)
class OffloadPolicy:
    kind: PolicyKind
    protocols: frozenset = frozenset()
    budget_bps: float = 0.0

    @classmethod
    def no_offload(cls) -> "OffloadPolicy":
        return cls(PolicyKind.NO_OFFLOAD)

    @classmethod
    def full(cls) -> "OffloadPolicy":
        return cls(PolicyKind.FULL_ON_WIFI_ATTACH)

    @classmethod
    def selective(cls, protocols: Iterable[Protocol], budget_bps: float) -> "OffloadPolicy":
        return cls(PolicyKind.SELECTIVE, frozenset(Protocol(p) for p in protocols), budget_bps)

    @property
    def label(self) -> str:
        if self.kind is not PolicyKind.SELECTIVE:
            return self.kind.value
        names = sorted(p.name.replace("LIKE", "").lower() for p in self.protocols)
        return "selective-" + "+".join(names)


@dataclass
class FlowInfo:
    key: FlowKey
    rate_bps: float

    @property
    def protocol(self) -> Protocol:
        return self.key.protocol


class FlowDirectory:
    """Active flows per UE with their offered rates."""

    def __init__(self) -> None:
        self._flows: dict[MnId, dict[FlowKey, FlowInfo]] = {}

    def add(self, mn_id: MnId, key: FlowKey, rate_bps: float) -> None:
        if rate_bps < 0:
            raise ValueError("offered rate must be nonnegative")
        self._flows.setdefault(mn_id, {})[key] = FlowInfo(key, rate_bps)

    def remove(self, mn_id: MnId, key: FlowKey) -> None:
        self._flows.get(mn_id, {}).pop(key, None)

    def flows(self, mn_id: MnId) -> list[FlowInfo]:
        return sorted(self._flows.get(mn_id, {}).values(), key=lambda f: f.key)


class Assignment(NamedTuple):
    via_lte: list
    via_wifi: list


def compute_flow_assignment(
    policy: OffloadPolicy,
    flows: list[FlowInfo],
    dual_attached: bool,
    budget_bps: Optional[float] = None,
) -> Assignment:
    """Split a UE's flows between LTE and WiFi.

    SELECTIVE walks the eligible flows in canonical key order and stops at the
    first one that would push the cumulative rate over the budget.
    ``budget_bps`` overrides the policy budget (the controller passes what is
    left of the network-wide budget).
    """
    ordered = sorted(flows, key=lambda f: f.key)
    keys = [f.key for f in ordered]
    if not dual_attached or policy.kind is PolicyKind.NO_OFFLOAD:
        return Assignment(keys, [])
    if policy.kind is PolicyKind.FULL_ON_WIFI_ATTACH:
        return Assignment([], keys)
    budget = policy.budget_bps if budget_bps is None else budget_bps
    via_wifi, used = [], 0.0
    for f in ordered:
        if f.protocol not in policy.protocols:
            continue
        if used + f.rate_bps > budget + 1e-9:
            break
        used += f.rate_bps
        via_wifi.append(f.key)
    moved = set(via_wifi)
    return Assignment([k for k in keys if k not in moved], via_wifi)


@dataclass
class _MaInfo:
    role: Role
    tunnel_ip: Address


@dataclass
class FlowController:
    """Single-threaded FC; every handler is run-to-completion."""

    policy: OffloadPolicy = field(default_factory=OffloadPolicy.no_offload)
    wifi_capacity_bps: float = WIFI_EFFECTIVE_BPS
    rule_priority: int = FLOW_RULE_PRIORITY

    def __post_init__(self) -> None:
        if self.policy.kind is PolicyKind.SELECTIVE and self.policy.budget_bps > self.wifi_capacity_bps:
            raise ValueError("selective budget exceeds the effective WiFi capacity")
        self.cache = BindingCache()
        self.directory = FlowDirectory()
        self.mas: dict[MaId, _MaInfo] = {}
        self.warnings: list[str] = []
        # (mn_id, flow) -> MA currently carrying a flow away from its anchor
        self.diverted: dict[tuple[MnId, FlowKey], MaId] = {}
        self.offloaded_bps = 0.0
        self._rates: dict[tuple[MnId, FlowKey], float] = {}

    def register_ma(self, ma_id: MaId, role: Role, tunnel_ip: Address = 0) -> None:
        self.mas[ma_id] = _MaInfo(role, tunnel_ip)

    def register_flow(self, mn_id: MnId, key: FlowKey, rate_bps: float) -> None:
        self.directory.add(mn_id, key, rate_bps)

    def lookup_bindings(self, mn_id: MnId) -> list[BindingCacheEntry]:
        return self.cache.lookup(mn_id)

    def _warn(self, text: str) -> None:
        log.warning(text)
        self.warnings.append(text)

    def handle_binding_update(
        self, bu: BindingUpdate, now: int
    ) -> tuple[BindingAck, list[FlowMod]]:
        if bu.ma_id not in self.mas or bu.status is not Status.ATTACHED:
            self._warn(f"rejecting BU from MA {bu.ma_id} for UE {bu.mn_id}")
            return BindingAck(bu.mn_id, bu.ma_id, Result.ERROR, None, bu.xid), []
        previous = self.cache.get(bu.mn_id, bu.ma_id)
        duplicate = previous is not None and (
            previous.mn_ip, previous.ma_ip, previous.port_id, previous.status
        ) == (bu.mn_ip, bu.ma_ip, bu.port_id, bu.status)
        others = [e for e in self.cache.attached(bu.mn_id) if e.ma_id != bu.ma_id]
        if duplicate:
            previous.updated_at = now
        else:
            self.cache.upsert(BindingCacheEntry(
                bu.mn_id, bu.ma_id, bu.mn_ip, bu.ma_ip, bu.port_id, bu.status, now
            ))
        old_ip = others[0].mn_ip if others else None
        ack = BindingAck(bu.mn_id, bu.ma_id, Result.OK, old_ip, bu.xid)
        if duplicate or not others:
            return ack, []
        return ack, self._apply_policy(bu.mn_id)

    def handle_port_status_update(self, ps: PortStatusUpdate, now: int) -> list[FlowMod]:
        entry = self.cache.get(ps.mn_id, ps.ma_id)
        if entry is None:
            self._warn(f"port status for unknown binding (UE {ps.mn_id}, MA {ps.ma_id})")
            return []
        entry.status = ps.status
        entry.port_id = ps.port_id
        entry.updated_at = now
        if ps.status is not Status.DETACHED:
            return []
        survivors = self.cache.attached(ps.mn_id)
        if not survivors:
            return []
        target = survivors[0]
        mods = []
        for info in self.directory.flows(ps.mn_id):
            anchor = self._anchor_of(ps.mn_id, info.key)
            if anchor is None:
                continue
            if anchor.ma_id == ps.ma_id:
                mods += self._divert(ps.mn_id, info, anchor, target, force=True)
            elif self.diverted.get((ps.mn_id, info.key)) == ps.ma_id:
                mods += self._restore(ps.mn_id, info, anchor)
        return mods

    # flow placement helpers

    def _anchor_of(self, mn_id: MnId, key: FlowKey) -> Optional[BindingCacheEntry]:
        for e in self.cache.lookup(mn_id):
            if e.mn_ip == key.dst_addr:
                return e
        return None

    def _entry_with_role(self, mn_id: MnId, role: Role) -> Optional[BindingCacheEntry]:
        for e in self.cache.attached(mn_id):
            if self.mas[e.ma_id].role is role:
                return e
        return None

    def _apply_policy(self, mn_id: MnId) -> list[FlowMod]:
        lte = self._entry_with_role(mn_id, Role.LTE)
        wifi = self._entry_with_role(mn_id, Role.WIFI)
        if lte is None or wifi is None:
            return []
        # Only flows anchored at the LTE side are candidates for offload.
        flows = [f for f in self.directory.flows(mn_id) if f.key.dst_addr == lte.mn_ip]
        mine = sum(self._rates.get((mn_id, f.key), 0.0) for f in flows)
        remaining = max(0.0, self.policy.budget_bps - (self.offloaded_bps - mine))
        assignment = compute_flow_assignment(self.policy, flows, True, budget_bps=remaining)
        by_key = {f.key: f for f in flows}
        mods = []
        for key in assignment.via_wifi:
            mods += self._divert(mn_id, by_key[key], lte, wifi)
        for key in assignment.via_lte:
            if (mn_id, key) in self.diverted:
                mods += self._restore(mn_id, by_key[key], lte)
        return mods

    def _divert(self, mn_id, info: FlowInfo, anchor, target, force=False) -> list[FlowMod]:
        slot = (mn_id, info.key)
        if not force and self.diverted.get(slot) == target.ma_id:
            return []
        if slot not in self._rates:
            self._rates[slot] = info.rate_bps
            self.offloaded_bps += info.rate_bps
        self.diverted[slot] = target.ma_id
        exact = MatchFields.exact(info.key)
        return [
            FlowMod(anchor.ma_id, exact, self.rule_priority, Instruction.tunnel(target.ma_id)),
            FlowMod(
                target.ma_id,
                MatchFields.exact(info.key, ingress_port=TUNNEL_PORT),
                self.rule_priority,
                Instruction.decap_forward(target.port_id),
            ),
        ]

    def _restore(self, mn_id, info: FlowInfo, anchor) -> list[FlowMod]:
        slot = (mn_id, info.key)
        self.diverted.pop(slot, None)
        self.offloaded_bps -= self._rates.pop(slot, 0.0)
        exact = MatchFields.exact(info.key)
        return [FlowMod(anchor.ma_id, exact, self.rule_priority, Instruction.default_route())]
