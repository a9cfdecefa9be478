import itertools
import random

from hypothesis import given
from hypothesis import strategies as st

from sifm.agent import TUNNEL_PORT
from sifm.controller import (
    BindingCache,
    BindingCacheEntry,
    FlowController,
    FlowInfo,
    OffloadPolicy,
    Role,
    compute_flow_assignment,
)
from sifm.messages import (
    BindingUpdate,
    FlowKey,
    InstructionKind,
    PortStatusUpdate,
    Protocol,
    Result,
    Status,
    encode,
    parse_address,
)
import pytest

PGW, WAG = 1, 2
RH = parse_address("172.16.0.1")
LTE_IP = parse_address("10.0.0.2")
WIFI_IP = parse_address("10.1.0.2")
TCP, UDP = Protocol.TCPLIKE, Protocol.UDPLIKE


def key(port, proto=TCP, dst=LTE_IP):
    return FlowKey(RH, dst, port, 20001, proto)


def make_fc(policy=OffloadPolicy.full()):
    fc = FlowController(policy)
    fc.register_ma(PGW, Role.LTE, parse_address("192.168.1.1"))
    fc.register_ma(WAG, Role.WIFI, parse_address("192.168.1.2"))
    return fc


def bu(ma, ip, port=1, mn=1, xid=5):
    return BindingUpdate(mn, ma, ip, 0, port, Status.ATTACHED, xid)


def test_first_binding_update():
    fc = make_fc()
    ack, mods = fc.handle_binding_update(bu(PGW, LTE_IP), 0)
    assert ack.result is Result.OK and ack.old_mn_ip is None and ack.xid == 5
    assert mods == []


def test_wifi_attach_full_policy_moves_both_flows():
    fc = make_fc()
    fc.handle_binding_update(bu(PGW, LTE_IP), 0)
    fc.register_flow(1, key(5001), 1e6)
    fc.register_flow(1, key(5002, UDP), 1e6)
    ack, mods = fc.handle_binding_update(bu(WAG, WIFI_IP, port=3), 10)
    assert ack.result is Result.OK and ack.old_mn_ip == LTE_IP
    tunnels = [m for m in mods if m.ma_id == PGW]
    decaps = [m for m in mods if m.ma_id == WAG]
    assert len(tunnels) == len(decaps) == 2
    assert all(m.instruction.kind is InstructionKind.TUNNEL and m.instruction.arg == WAG for m in tunnels)
    assert all(m.instruction.kind is InstructionKind.DECAP_FORWARD and m.instruction.arg == 3 for m in decaps)
    assert all(m.match.ingress_port == TUNNEL_PORT for m in decaps)


def test_duplicate_binding_update_is_idempotent():
    fc = make_fc()
    fc.handle_binding_update(bu(PGW, LTE_IP), 0)
    fc.register_flow(1, key(5001), 1e6)
    fc.handle_binding_update(bu(WAG, WIFI_IP), 1)
    before = [(e.mn_id, e.ma_id, e.mn_ip, e.port_id, e.status) for e in fc.lookup_bindings(1)]
    ack, mods = fc.handle_binding_update(bu(WAG, WIFI_IP), 50)
    after = fc.lookup_bindings(1)
    assert ack.result is Result.OK and mods == []
    assert [(e.mn_id, e.ma_id, e.mn_ip, e.port_id, e.status) for e in after] == before
    assert fc.cache.get(1, WAG).updated_at == 50


def test_unknown_ma_and_detached_bu_rejected():
    fc = make_fc()
    ack, mods = fc.handle_binding_update(bu(9, LTE_IP), 0)
    assert ack.result is Result.ERROR and mods == []
    ack, _ = fc.handle_binding_update(BindingUpdate(1, PGW, LTE_IP, 0, 1, Status.DETACHED, 2), 0)
    assert ack.result is Result.ERROR


def test_lte_detach_moves_three_flows():
    fc = make_fc(OffloadPolicy.no_offload())
    fc.handle_binding_update(bu(PGW, LTE_IP, port=1), 0)
    for port in (5001, 5002, 5003):
        fc.register_flow(1, key(port), 1e6)
    fc.handle_binding_update(bu(WAG, WIFI_IP, port=4), 1)
    mods = fc.handle_port_status_update(PortStatusUpdate(1, PGW, 1, Status.DETACHED), 2)
    tunnels = [m for m in mods if m.instruction.kind is InstructionKind.TUNNEL]
    decaps = [m for m in mods if m.instruction.kind is InstructionKind.DECAP_FORWARD]
    assert len(tunnels) == 3 and all(m.ma_id == PGW for m in tunnels)
    assert len(decaps) == 3 and all(m.ma_id == WAG for m in decaps)
    # handover completeness: one TUNNEL and one DECAP per flow
    assert sorted(m.match.src_port for m in tunnels) == sorted(m.match.src_port for m in decaps) == [5001, 5002, 5003]
    statuses = {e.ma_id: e.status for e in fc.lookup_bindings(1)}
    assert statuses == {PGW: Status.DETACHED, WAG: Status.ATTACHED}


def test_detach_without_other_attachment():
    fc = make_fc()
    fc.handle_binding_update(bu(PGW, LTE_IP), 0)
    fc.register_flow(1, key(5001), 1e6)
    assert fc.handle_port_status_update(PortStatusUpdate(1, PGW, 1, Status.DETACHED), 1) == []
    assert fc.lookup_bindings(1)[0].status is Status.DETACHED


def test_port_status_for_unknown_binding():
    fc = make_fc()
    assert fc.handle_port_status_update(PortStatusUpdate(42, PGW, 1, Status.DETACHED), 0) == []
    assert len(fc.warnings) == 1


def test_wifi_detach_restores_diverted_flows():
    fc = make_fc()
    fc.handle_binding_update(bu(PGW, LTE_IP), 0)
    fc.register_flow(1, key(5001), 1e6)
    fc.handle_binding_update(bu(WAG, WIFI_IP), 1)
    mods = fc.handle_port_status_update(PortStatusUpdate(1, WAG, 1, Status.DETACHED), 2)
    assert [(m.ma_id, m.instruction.kind) for m in mods] == [(PGW, InstructionKind.DEFAULT_ROUTE)]
    assert fc.diverted == {} and fc.offloaded_bps == 0


def test_lookup_bindings():
    fc = make_fc()
    assert fc.lookup_bindings(7) == []
    fc.handle_binding_update(bu(PGW, LTE_IP), 0)
    fc.handle_binding_update(bu(WAG, WIFI_IP), 0)
    assert {e.status for e in fc.lookup_bindings(1)} == {Status.ATTACHED}
    assert len(fc.lookup_bindings(1)) == 2


def test_binding_cache_rejects_zero_ip_when_attached():
    cache = BindingCache()
    with pytest.raises(ValueError):
        cache.upsert(BindingCacheEntry(1, 1, 0, 0, 1, Status.ATTACHED, 0))


def test_selective_budget_above_capacity_rejected():
    with pytest.raises(ValueError):
        FlowController(OffloadPolicy.selective([TCP], 30e6))


def test_selective_budget_is_shared_across_ues():
    fc = make_fc(OffloadPolicy.selective([TCP, UDP], 3e6))
    moved = 0
    for mn in (1, 2):
        lte = LTE_IP + mn
        fc.handle_binding_update(bu(PGW, lte, mn=mn), 0)
        fc.register_flow(mn, key(5001, TCP, lte), 1e6)
        fc.register_flow(mn, key(5002, UDP, lte), 1e6)
        _, mods = fc.handle_binding_update(bu(WAG, WIFI_IP + mn, mn=mn), 1)
        moved += sum(m.instruction.kind is InstructionKind.TUNNEL for m in mods)
    assert moved == 3 and fc.offloaded_bps == 3e6


# compute_flow_assignment


def flows(*specs):
    return [FlowInfo(key(5000 + i, proto), rate) for i, (proto, rate) in enumerate(specs)]


def test_selective_tcp_example():
    fl = flows((TCP, 1e6), (UDP, 1e6))
    a = compute_flow_assignment(OffloadPolicy.selective([TCP], 11e6), fl, True)
    assert a.via_wifi == [fl[0].key] and a.via_lte == [fl[1].key]


def test_zero_budget_keeps_everything_on_lte():
    fl = flows((TCP, 1e6), (UDP, 1e6))
    a = compute_flow_assignment(OffloadPolicy.selective([TCP], 0), fl, True)
    assert a.via_wifi == [] and len(a.via_lte) == 2


def test_three_of_four_by_canonical_order():
    fl = flows(*[(TCP, 1e6), (UDP, 1e6), (TCP, 1e6), (UDP, 1e6)])
    a = compute_flow_assignment(OffloadPolicy.selective([TCP, UDP], 3e6), fl, True)
    assert a.via_wifi == sorted(f.key for f in fl)[:3]


def test_no_offload_and_full_and_single_attachment():
    fl = flows((TCP, 1e6), (UDP, 1e6))
    assert compute_flow_assignment(OffloadPolicy.no_offload(), fl, True).via_wifi == []
    assert len(compute_flow_assignment(OffloadPolicy.full(), fl, True).via_wifi) == 2
    assert compute_flow_assignment(OffloadPolicy.full(), fl, False).via_wifi == []


flow_lists = st.lists(
    st.tuples(st.integers(1, 60000), st.sampled_from([TCP, UDP]), st.floats(0, 5e6)),
    max_size=8, unique_by=lambda t: (t[0], t[1]),
)


@given(flow_lists, st.sets(st.sampled_from([TCP, UDP])), st.floats(0, 22e6))
def test_selective_partition_budget_and_prefix(specs, protocols, budget):
    fl = [FlowInfo(key(port, proto), rate) for port, proto, rate in specs]
    policy = OffloadPolicy.selective(protocols, budget)
    a = compute_flow_assignment(policy, fl, True)
    all_keys = sorted(f.key for f in fl)
    assert sorted(a.via_lte + a.via_wifi) == all_keys
    assert not set(a.via_lte) & set(a.via_wifi)
    rate = {f.key: f.rate_bps for f in fl}
    assert sum(rate[k] for k in a.via_wifi) <= budget + 1e-6
    # brute force: longest feasible prefix of the eligible flows in canonical order
    eligible = [k for k in all_keys if k.protocol in protocols]
    best = []
    for n in range(len(eligible) + 1):
        prefix = eligible[:n]
        if sum(rate[k] for k in prefix) <= budget + 1e-9:
            best = prefix
        else:
            break
    assert a.via_wifi == best


def test_determinism_of_message_sequences():
    def replay():
        rng = random.Random(11)
        fc = make_fc(OffloadPolicy.selective([TCP], 5e6))
        out = []
        for step in range(300):
            mn = rng.randint(1, 4)
            lte, wifi = LTE_IP + mn, WIFI_IP + mn
            if step % 7 == 0:
                fc.register_flow(mn, key(5000 + step, rng.choice([TCP, UDP]), lte), 1e6)
            choice = rng.random()
            if choice < 0.4:
                ack, mods = fc.handle_binding_update(bu(PGW, lte, mn=mn), step)
                out += [encode(ack)] + [encode(m) for m in mods]
            elif choice < 0.8:
                ack, mods = fc.handle_binding_update(bu(WAG, wifi, mn=mn), step)
                out += [encode(ack)] + [encode(m) for m in mods]
            else:
                ma = rng.choice([PGW, WAG])
                out += [encode(m) for m in fc.handle_port_status_update(
                    PortStatusUpdate(mn, ma, 1, Status.DETACHED), step)]
            pairs = [(e.mn_id, e.ma_id) for e in fc.cache]
            assert len(pairs) == len(set(pairs))
        return out

    assert replay() == replay()
