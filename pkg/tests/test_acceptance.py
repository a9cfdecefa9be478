"""The ten acceptance criteria. A summary line per criterion is printed at the
end of the pytest run (see conftest.py)."""

from __future__ import annotations

import json
import os
import random
import subprocess
import sys
import time
from functools import lru_cache
from statistics import fmean

import pytest

from sifm.agent import FlowTable, match_packet
from sifm.experiments import ScenarioConfig, run_scenario
from sifm.experiments.calibration import lte_backlogged_throughput, wifi_saturation_goodput
from sifm.experiments.config import KB, MB
from sifm.experiments.world import SifmWorld, build_world
from sifm.messages import DEFAULT_ROUTE, DecodeError, Instruction, Protocol, decode, encode
from sifm.netsim.engine import seconds
from sifm.packet import Packet

from helpers import random_message, small_ingress, small_key, small_match

SEEDS = (1, 2, 3, 4, 5)


def criterion(number, title):
    return pytest.mark.criterion(number, title)


@lru_cache(maxsize=None)
def result(architecture, users, offload, seed, **extra):
    cfg = ScenarioConfig(architecture=architecture, num_users=users, offload_percent=offload,
                         seed=seed, **extra)
    return run_scenario(cfg)


def mean_over_seeds(architecture, users, offload, field):
    values = []
    for seed in SEEDS:
        row = result(architecture, users, offload, seed).summary
        values.append(getattr(row.overall, field))
    return fmean(values)


# 1 ---------------------------------------------------------------------------


@criterion(1, "codec soundness: round trip, truncation/mutation fuzz, < 10 s")
def test_criterion_1_codec_soundness(record_property):
    start = time.perf_counter()
    rng = random.Random(1)
    for i in range(10_000):
        m = random_message(rng, i % 6)
        assert decode(encode(m)) == m
    crashes = 0
    for kind in range(6):
        for _ in range(3):
            wire = encode(random_message(rng, kind))
            for i in range(len(wire)):
                for buf in (wire[:i], wire[:i] + wire[i + 1:]):
                    with pytest.raises(DecodeError):
                        decode(buf)
                for value in range(256):
                    if value == wire[i]:
                        continue
                    try:
                        decode(wire[:i] + bytes([value]) + wire[i + 1:])
                    except DecodeError:
                        pass
                    except Exception:  # anything untyped is a failure
                        crashes += 1
    elapsed = time.perf_counter() - start
    record_property("detail", f"codec checks took {elapsed:.2f} s, untyped failures: {crashes}")
    assert crashes == 0
    assert elapsed < 10


# 2 ---------------------------------------------------------------------------


def _oracle(entries, key, ingress):
    hits = [(p, order, ins) for order, (m, p, ins) in enumerate(entries) if m.matches(key, ingress)]
    if not hits:
        return DEFAULT_ROUTE
    return min(hits, key=lambda h: (-h[0], h[1]))[2]


@criterion(2, "flow-table oracle: 10^4 random cases, zero mismatches, < 10 s")
def test_criterion_2_flow_table_oracle(record_property):
    start = time.perf_counter()
    rng = random.Random(2)
    mismatches = 0
    for _ in range(10_000):
        table, entries = FlowTable(), []
        for _ in range(rng.randint(0, 8)):
            m = small_match(rng)
            p = 0 if m.is_table_miss else rng.randint(0, 4)
            ins = Instruction.forward(rng.randint(1, 99))
            table.install(m, p, ins)
            for j, (m2, p2, _) in enumerate(entries):
                if (m2, p2) == (m, p):
                    entries[j] = (m, p, ins)
                    break
            else:
                entries.append((m, p, ins))
        key, ingress = small_key(rng), small_ingress(rng)
        if match_packet(table, Packet(key, 100, 0), ingress, 0) != _oracle(entries, key, ingress):
            mismatches += 1
    elapsed = time.perf_counter() - start
    record_property("detail", f"{mismatches} mismatches in {elapsed:.2f} s")
    assert mismatches == 0
    assert elapsed < 10


# 3 ---------------------------------------------------------------------------


@criterion(3, "WiFi calibration: 1500-byte saturation goodput 22 Mbps +/- 10%, < 5 s")
def test_criterion_3_wifi_calibration(record_property):
    start = time.perf_counter()
    goodput = wifi_saturation_goodput(duration_s=5.0)
    elapsed = time.perf_counter() - start
    record_property("detail", f"WiFi goodput {goodput / 1e6:.2f} Mbps in {elapsed:.2f} s")
    assert abs(goodput - 22e6) <= 0.1 * 22e6
    assert elapsed < 5


# 4 ---------------------------------------------------------------------------


@criterion(4, "LTE calibration: 71 Mbps +/- 10%; 30 users x 2 Mbps -> mean delay < 300 ms, < 30 s")
def test_criterion_4_lte_calibration(record_property):
    start = time.perf_counter()
    rate = lte_backlogged_throughput(num_ues=30, duration_s=5.0)
    row = run_scenario(ScenarioConfig(architecture="SIFM", num_users=30, offload_percent=0)).summary
    elapsed = time.perf_counter() - start
    record_property("detail", f"LTE {rate / 1e6:.2f} Mbps; 30-user mean delay "
                              f"{row.overall.delay_ms:.1f} ms; {elapsed:.1f} s")
    assert abs(rate - 71e6) <= 0.1 * 71e6
    assert row.overall.delay_ms < 300
    assert elapsed < 30


# 5 ---------------------------------------------------------------------------


@criterion(5, "congestion trend at 40 users and light-load inversion at 10 users (5-seed means)")
@pytest.mark.parametrize("architecture", ["SIFM", "PMIPV6"])
def test_criterion_5_congestion_trend(architecture, record_property):
    d0 = mean_over_seeds(architecture, 40, 0, "delay_ms")
    d50 = mean_over_seeds(architecture, 40, 50, "delay_ms")
    t0 = mean_over_seeds(architecture, 40, 0, "tput_mbps")
    t50 = mean_over_seeds(architecture, 40, 50, "tput_mbps")
    l0 = mean_over_seeds(architecture, 10, 0, "delay_ms")
    l75 = mean_over_seeds(architecture, 10, 75, "delay_ms")
    record_property("detail", f"{architecture}: 40 users delay {d0:.1f} -> {d50:.1f} ms, "
                              f"tput {t0:.3f} -> {t50:.3f} Mbps; 10 users delay {l0:.1f} -> {l75:.1f} ms")
    assert d50 < d0
    assert t50 > t0
    assert l75 > l0


# 6 ---------------------------------------------------------------------------


@criterion(6, "RLC sweep: 50 users, NO_OFFLOAD, delay strictly decreasing in buffer size")
def test_criterion_6_rlc_sweep(record_property):
    buffers = (10 * KB, 100 * KB, 2 * MB, 10 * MB)
    delays = [
        run_scenario(ScenarioConfig(architecture="NO_OFFLOAD", num_users=50, rlc_buffer_bytes=b)).summary
        .overall.delay_ms
        for b in buffers
    ]
    record_property("detail", "mean delay (ms) for 10KB/100KB/2MB/10MB: "
                              + " / ".join(f"{d:.1f}" for d in delays))
    assert all(a > b for a, b in zip(delays, delays[1:]))


# 7 ---------------------------------------------------------------------------


def _handover_means():
    delays = {}
    for arch in ("SIFM", "PMIPV6"):
        records = [h for seed in SEEDS for h in result(arch, 40, 50, seed).handovers]
        delays[arch] = [h.delay_us / 1000 for h in records]
    return delays


@criterion(7, "handover delay: PMIPv6 > SIFM over >= 20 handovers; gap >= one PBU/PBA round trip")
def test_criterion_7_direction(record_property):
    delays = _handover_means()
    sifm, pmip = fmean(delays["SIFM"]), fmean(delays["PMIPV6"])
    record_property("detail", f"handover delay SIFM {sifm:.2f} ms ({len(delays['SIFM'])} handovers), "
                              f"PMIPv6 {pmip:.2f} ms ({len(delays['PMIPV6'])} handovers)")
    assert len(delays["SIFM"]) >= 20 and len(delays["PMIPV6"]) >= 20
    assert pmip > sifm


@criterion(7, "handover delay: PMIPv6 > SIFM over >= 20 handovers; gap >= one PBU/PBA round trip")
def test_criterion_7_gap(record_property):
    delays = _handover_means()
    gap = fmean(delays["PMIPV6"]) - fmean(delays["SIFM"])
    rtt = 2 * ScenarioConfig().control_delay_ms
    record_property("detail", f"gap {gap:.2f} ms vs one PBU/PBA round trip {rtt:.2f} ms")
    assert gap >= rtt


# 8 ---------------------------------------------------------------------------

PAPER_IMPROVEMENT = {"tcp": (22.72, 7.02), "udp": (21.39, 16.32)}


@criterion(8, "selective offload: SIFM TCP-only/UDP-only beat PMIPv6 on the offloaded class")
@pytest.mark.parametrize("users", [40, 50])
def test_criterion_8_selective_offload(users, record_property):
    def row(arch, policy=None):
        extra = {"mobility_mode": "STATIC_DUAL"}
        if policy:
            extra["policy"] = policy
        offload = 0 if arch == "NO_OFFLOAD" else 50
        return result(arch, users, offload, 1, **extra).summary

    base = row("NO_OFFLOAD")
    pmip = row("PMIPV6")
    improvement = {}
    for cls in ("tcp", "udp"):
        sifm = row("SIFM", cls)
        ref = getattr(base, cls).delay_ms
        improvement[cls] = (
            100 * (ref - getattr(sifm, cls).delay_ms) / ref,
            100 * (ref - getattr(pmip, cls).delay_ms) / ref,
        )
        paper = PAPER_IMPROVEMENT[cls]
        within = all(p / 3 <= v <= p * 3 for v, p in zip(improvement[cls], paper))
        record_property("detail", f"{users} users {cls.upper()}: SIFM {improvement[cls][0]:.1f}% vs "
                                  f"PMIPv6 {improvement[cls][1]:.1f}% improvement (reference "
                                  f"{paper[0]}% vs {paper[1]}%; within 3x: {within})")
    for cls in ("tcp", "udp"):
        assert improvement[cls][0] > improvement[cls][1]


# 9 ---------------------------------------------------------------------------

SEAMLESS_SCENARIOS = {
    "moving": dict(num_users=10, offload_percent=50),
    "moving-lte-loss": dict(num_users=10, offload_percent=50, wifi_detach_s=None, lte_detach_s=8.0),
    # after losing LTE every flow shares the 22 Mbps WiFi medium, so the
    # population is kept small enough (5 UEs x 4 Mbps) for WiFi to carry it
    "static-tcp-lte-loss": dict(num_users=5, offload_percent=50, mobility_mode="STATIC_DUAL",
                                policy="tcp", lte_detach_s=8.0),
    "static-udp": dict(num_users=20, offload_percent=50, mobility_mode="STATIC_DUAL", policy="udp"),
}


@criterion(9, "seamlessness: no resets, continuous in-order delivery, one tunnel pass after DETACHED")
@pytest.mark.parametrize("name", sorted(SEAMLESS_SCENARIOS))
def test_criterion_9_seamlessness(name, record_property):
    cfg = ScenarioConfig(architecture="SIFM", **SEAMLESS_SCENARIOS[name])
    world = build_world(cfg)
    assert isinstance(world, SifmWorld)
    detach_at = seconds(cfg.lte_detach_s) if cfg.lte_detach_s is not None else None
    moved_ues = {e.mn_id for e in world.script if e.time_us > 0}
    after_detach = []
    bad_after_detach = []

    def observe(mn, pkt, sub):
        if detach_at is None or mn not in moved_ues or pkt.is_ack:
            return
        if pkt.sent_at + world.d_data >= detach_at:
            after_detach.append(pkt)
            if not (pkt.pushes == pkt.pops == 1):
                bad_after_detach.append(pkt)

    world.packet_observers.append(observe)
    world.run()
    reliable = [f for f in world.flows if f.protocol is Protocol.TCPLIKE and f.mn_id in moved_ues]
    resets = sum(f.stats.resets for f in world.flows)
    gaps = 0
    for flow in reliable:
        seqs = flow.receiver.delivered_seqs
        assert seqs == list(range(len(seqs)))
        last = max(r[0] for r in flow.stats.records)
        # delivery keeps going to the end of the run, i.e. across every handover
        if last < world.duration_us - seconds(1):
            gaps += 1
    record_property("detail", f"{name}: {len(world.handovers)} handovers, {resets} resets, "
                              f"{world.encap_violations} encap violations, "
                              f"{len(after_detach)} packets after DETACHED "
                              f"({len(bad_after_detach)} not tunnelled exactly once)")
    assert world.handovers
    assert resets == 0
    assert gaps == 0
    assert world.encap_violations == 0
    if detach_at is not None:
        assert after_detach and not bad_after_detach


# 10 --------------------------------------------------------------------------


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "sifm.experiments", *args],
                          capture_output=True, text=True)


@criterion(10, "determinism: identical CSV on repeat; full sweep grid under 10 minutes")
def test_criterion_10_determinism(tmp_path, record_property):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({"architecture": "PMIPV6", "num_users": 20, "offload_percent": 50}))
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.csv"
        proc = _cli("run", "--config", str(cfg), "--seed", "11", "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    record_property("detail", f"two runs, {len(outs[0])} bytes each, identical: {outs[0] == outs[1]}")
    assert outs[0] == outs[1]


@criterion(10, "determinism: identical CSV on repeat; full sweep grid under 10 minutes")
def test_criterion_10_full_grid_time(tmp_path, record_property):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({
        "architectures": ["SIFM", "PMIPV6"],
        "num_users": [10, 20, 30, 40, 50],
        "offload_percent": [0, 25, 50, 75],
        "repeats": 1,
    }))
    out = tmp_path / "grid.csv"
    start = time.perf_counter()
    proc = _cli("sweep", "--grid", str(grid), "--out", str(out), "--parallel", str(os.cpu_count() or 1))
    elapsed = time.perf_counter() - start
    rows = out.read_text().splitlines()[1:] if out.exists() else []
    record_property("detail", f"{len(rows)} scenarios in {elapsed:.0f} s on {os.cpu_count()} CPU(s)")
    assert proc.returncode == 0, proc.stderr
    assert len(rows) == 40
    assert elapsed < 600
