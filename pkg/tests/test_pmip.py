from sifm.messages import (
    FlowKey,
    Protocol,
    ProxyBindingAck,
    ProxyBindingUpdate,
    Result,
    parse_address,
)
from sifm.packet import VIA_LMA, Packet
from sifm.pmip import DownlinkVerdict, LocalMobilityAnchor, MobileAccessGateway

POOL = parse_address("10.2.0.2")
LTE_MAG, WIFI_MAG = 1, 2


def key(dst):
    return FlowKey(parse_address("172.16.0.1"), dst, 5001, 20001, Protocol.UDPLIKE)


def test_first_pbu_gets_pool_head():
    lma = LocalMobilityAnchor(100, POOL)
    pba = lma.handle_pbu(ProxyBindingUpdate(1, LTE_MAG, 3600, 7), 0)
    assert pba.result is Result.OK and pba.home_prefix == POOL and pba.xid == 7
    assert lma.bindings[1].current_mag == LTE_MAG


def test_home_address_is_stable_across_mags():
    lma = LocalMobilityAnchor(100, POOL)
    lma.handle_pbu(ProxyBindingUpdate(2, LTE_MAG, 3600), 0)
    first = lma.handle_pbu(ProxyBindingUpdate(1, LTE_MAG, 3600), 0).home_prefix
    for i, mag in enumerate([WIFI_MAG, LTE_MAG, WIFI_MAG] * 3):
        assert lma.handle_pbu(ProxyBindingUpdate(1, mag, 0 if i % 4 == 3 else 3600), i).home_prefix == first
    assert len(lma.bindings) == 2


def test_repeated_pbu_same_mag():
    lma = LocalMobilityAnchor(100, POOL)
    a = lma.handle_pbu(ProxyBindingUpdate(1, LTE_MAG, 3600, 1), 0)
    b = lma.handle_pbu(ProxyBindingUpdate(1, LTE_MAG, 3600, 1), 5)
    assert a == b and len(lma.bindings) == 1


def test_lma_routes_to_current_mag():
    lma = LocalMobilityAnchor(100, POOL)
    home = lma.handle_pbu(ProxyBindingUpdate(1, LTE_MAG, 3600), 0).home_prefix
    p = Packet(key(home), 1000, 0)
    assert lma.route_downlink(p, 0) == LTE_MAG
    assert p.encap == [(100, LTE_MAG)] and p.via & VIA_LMA
    lma.handle_pbu(ProxyBindingUpdate(1, WIFI_MAG, 3600), 1)
    assert lma.route_downlink(Packet(key(home), 1000, 0), 1) == WIFI_MAG
    assert lma.route_downlink(Packet(key(home + 99), 1000, 0), 1) is None
    assert lma.dropped == 1


def test_deregistration_only_from_current_mag():
    lma = LocalMobilityAnchor(100, POOL)
    lma.handle_pbu(ProxyBindingUpdate(1, WIFI_MAG, 3600), 0)
    lma.handle_pbu(ProxyBindingUpdate(1, LTE_MAG, 0), 1)  # stale MAG: ignored
    assert lma.bindings[1].current_mag == WIFI_MAG
    lma.handle_pbu(ProxyBindingUpdate(1, WIFI_MAG, 0), 2)
    assert lma.bindings[1].current_mag is None


def test_lifetime_expiry_logic():
    lma = LocalMobilityAnchor(100, POOL)
    lma.handle_pbu(ProxyBindingUpdate(1, LTE_MAG, 1), 0)
    assert lma.expire(500_000) == 0
    assert lma.expire(1_500_000) == 1
    assert lma.bindings[1].current_mag is None


def test_mag_attach_buffer_then_flush_after_pba():
    mag = MobileAccessGateway(WIFI_MAG, buffer_limit=3)
    pbu = mag.on_attach(1, 0)
    assert (pbu.mn_id, pbu.mag_id, pbu.lifetime_s) == (1, WIFI_MAG, 3600)
    again = mag.on_attach(1, 1)
    assert again.xid != pbu.xid
    packets = [Packet(key(POOL), 1000, 0, seq=i) for i in range(5)]
    for p in packets:
        p.push_encap(100, WIFI_MAG)
    verdicts = [mag.accept_downlink(p, 1, 2) for p in packets]
    assert verdicts == [DownlinkVerdict.BUFFERED] * 3 + [DownlinkVerdict.DROPPED] * 2
    assert all(not p.encap for p in packets)
    ra, flushed = mag.handle_pba(ProxyBindingAck(1, WIFI_MAG, POOL, Result.OK, pbu.xid), 3)
    assert ra is not None and ra.home_prefix == POOL
    assert [p.seq for p in flushed] == [0, 1, 2]
    assert mag.accept_downlink(Packet(key(POOL), 1000, 0), 1, 4) is DownlinkVerdict.DELIVER
    # a second PBA does not produce a second RA
    assert mag.handle_pba(ProxyBindingAck(1, WIFI_MAG, POOL, Result.OK), 5) == (None, [])


def test_mag_unknown_ue_and_detach():
    mag = MobileAccessGateway(LTE_MAG)
    assert mag.accept_downlink(Packet(key(POOL), 1000, 0), 1, 0) is DownlinkVerdict.DROPPED
    mag.on_attach(1, 0)
    dereg = mag.on_detach(1, 1)
    assert dereg.lifetime_s == 0
    assert not mag.is_ready(1)
    assert mag.handle_pba(ProxyBindingAck(1, LTE_MAG, POOL, Result.OK), 2) == (None, [])
