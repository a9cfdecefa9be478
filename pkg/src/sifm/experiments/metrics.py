"""Per-scenario metric aggregation and the CSV row format."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Optional, Sequence

from ..messages import Protocol
from ..netsim.transport import FlowStats

CSV_COLUMNS = (
    "scenario_id", "architecture", "num_users", "offload_percent", "policy", "seed",
    "mean_delay_ms", "tcp_delay_ms", "udp_delay_ms",
    "mean_tput_mbps", "tcp_tput_mbps", "udp_tput_mbps",
    "loss_pct", "tcp_loss_pct", "udp_loss_pct", "handover_delay_ms",
)


@dataclass(frozen=True)
class ClassSummary:
    delay_ms: Optional[float]
    tput_mbps: Optional[float]
    loss_pct: Optional[float]
    delivered: int
    sent: int
    dropped: int


@dataclass(frozen=True)
class SummaryRow:
    scenario_id: str
    architecture: str
    num_users: int
    offload_percent: int
    policy: str
    seed: int
    overall: ClassSummary
    tcp: ClassSummary
    udp: ClassSummary
    handover_delay_ms: Optional[float]

    def as_csv_row(self) -> dict[str, str]:
        values = {
            "scenario_id": self.scenario_id,
            "architecture": self.architecture,
            "num_users": self.num_users,
            "offload_percent": self.offload_percent,
            "policy": self.policy,
            "seed": self.seed,
            "mean_delay_ms": self.overall.delay_ms,
            "tcp_delay_ms": self.tcp.delay_ms,
            "udp_delay_ms": self.udp.delay_ms,
            "mean_tput_mbps": self.overall.tput_mbps,
            "tcp_tput_mbps": self.tcp.tput_mbps,
            "udp_tput_mbps": self.udp.tput_mbps,
            "loss_pct": self.overall.loss_pct,
            "tcp_loss_pct": self.tcp.loss_pct,
            "udp_loss_pct": self.udp.loss_pct,
            "handover_delay_ms": self.handover_delay_ms,
        }
        return {k: _fmt(v) for k, v in values.items()}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def summarize_class(stats: Sequence[FlowStats], window_start_us: int, window_end_us: int) -> ClassSummary:
    """Delay averaged over delivered packets, throughput averaged over apps,
    loss as dropped / sent; only deliveries inside the window count."""
    delays = []
    tputs = []
    span_s = (window_end_us - window_start_us) / 1e6
    sent = dropped = 0
    for s in stats:
        delivered_bits = 0
        for delivered_at, delay_us, size in s.records:
            if window_start_us <= delivered_at <= window_end_us:
                delays.append(delay_us)
                delivered_bits += size * 8
        tputs.append(delivered_bits / span_s / 1e6 if span_s > 0 else 0.0)
        sent += s.sent
        dropped += s.dropped
    return ClassSummary(
        delay_ms=fmean(delays) / 1000 if delays else None,
        tput_mbps=fmean(tputs) if tputs else None,
        loss_pct=100.0 * dropped / sent if sent else None,
        delivered=len(delays),
        sent=sent,
        dropped=dropped,
    )


def summarize(
    stats: Sequence[FlowStats], window_start_us: int, window_end_us: int
) -> tuple[ClassSummary, ClassSummary, ClassSummary]:
    """Overall, TCP-like and UDP-like summaries."""
    tcp = [s for s in stats if s.protocol is Protocol.TCPLIKE]
    udp = [s for s in stats if s.protocol is Protocol.UDPLIKE]
    return (
        summarize_class(stats, window_start_us, window_end_us),
        summarize_class(tcp, window_start_us, window_end_us),
        summarize_class(udp, window_start_us, window_end_us),
    )


def compute_handover_delay(delays_us: Iterable[Optional[int]]) -> Optional[float]:
    """Mean handover delay in ms; ``None`` when no handover completed."""
    values = [d for d in delays_us if d is not None]
    if not values:
        return None
    return fmean(values) / 1000


def rows_to_csv(rows: Iterable[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_csv_row())
    return buf.getvalue()
