"""Link calibration checks: WiFi saturation goodput and LTE effective capacity."""

from __future__ import annotations

from dataclasses import dataclass

from ..messages import FlowKey, Protocol
from ..packet import Packet
from ..netsim.engine import Simulator, seconds
from ..netsim.links import (
    LTE_EFFECTIVE_BPS,
    WIFI_CALIBRATION_FRAME_BYTES,
    WIFI_TARGET_GOODPUT_BPS,
    LteDownlink,
    WifiMedium,
)

_KEY = FlowKey(1, 2, 1, 1, Protocol.UDPLIKE)


@dataclass(frozen=True)
class CalibrationResult:
    name: str
    measured_bps: float
    target_bps: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.measured_bps - self.target_bps) <= self.tolerance * self.target_bps

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} {self.name}: {self.measured_bps / 1e6:.2f} Mbps "
            f"(target {self.target_bps / 1e6:.0f} Mbps +/- {self.tolerance:.0%})"
        )


def wifi_saturation_goodput(
    duration_s: float = 2.0, frame_bytes: int = WIFI_CALIBRATION_FRAME_BYTES
) -> float:
    """Goodput of one datagram flow that always has a frame waiting."""
    sim = Simulator()
    wifi = WifiMedium(sim)
    end = seconds(duration_s)
    delivered = [0]

    def arrive(pkt: Packet) -> None:
        if sim.now <= end:
            delivered[0] += pkt.size_bytes
            offer()

    def offer() -> None:
        pkt = Packet(_KEY, frame_bytes, sim.now)
        wifi.send(pkt, arrive, pkt)

    for _ in range(4):
        offer()
    sim.run(until=end)
    return delivered[0] * 8 / duration_s


def lte_backlogged_throughput(num_ues: int = 10, duration_s: float = 2.0, payload_bytes: int = 1000) -> float:
    """Aggregate downlink rate with every UE's RLC queue kept non-empty."""
    sim = Simulator()
    end = seconds(duration_s)
    delivered = [0]

    def deliver(ue, pkt: Packet) -> None:
        if sim.now <= end:
            delivered[0] += pkt.size_bytes
            lte.enqueue(ue, Packet(_KEY, payload_bytes, sim.now))

    lte = LteDownlink(sim, deliver)
    for ue in range(num_ues):
        for _ in range(20):
            lte.enqueue(ue, Packet(_KEY, payload_bytes, 0))
    sim.run(until=end)
    return delivered[0] * 8 / duration_s


def run_calibration(tolerance: float = 0.10) -> list[CalibrationResult]:
    return [
        CalibrationResult("wifi saturation goodput (1500-byte frames)", wifi_saturation_goodput(),
                          WIFI_TARGET_GOODPUT_BPS, tolerance),
        CalibrationResult("lte backlogged downlink", lte_backlogged_throughput(),
                          LTE_EFFECTIVE_BPS, tolerance),
    ]
