"""Discrete-event network substrate: engine, links, transports, traffic, mobility."""

from .engine import US_PER_MS, US_PER_S, Event, SchedulingError, Simulator, millis, seconds
from .links import (
    LTE_EFFECTIVE_BPS,
    LTE_UPLINK_EFFECTIVE_BPS,
    TTI_US,
    WIFI_OVERHEAD_US,
    WIFI_PHY_BPS,
    FifoLink,
    LteDownlink,
    RlcQueue,
    WifiMedium,
    lte_tti_schedule,
    rlc_enqueue,
    wifi_overhead_us,
)
from .mobility import (
    MobilityEvent,
    MobilityKind,
    MobilityScript,
    ScriptError,
    apply_mobility,
    linear_motion,
)
from .traffic import PAYLOAD_BYTES, TrafficKind, TrafficSource, generate_traffic
from .transport import (
    DatagramReceiver,
    DatagramSender,
    DelayOrigin,
    Flow,
    FlowStats,
    ReliableReceiver,
    ReliableSender,
)
from .ue import SubInterface, UeLogicalInterface

__all__ = [
    "US_PER_MS", "US_PER_S", "Event", "SchedulingError", "Simulator", "millis", "seconds",
    "LTE_EFFECTIVE_BPS", "LTE_UPLINK_EFFECTIVE_BPS", "TTI_US", "WIFI_OVERHEAD_US", "WIFI_PHY_BPS",
    "FifoLink", "LteDownlink", "RlcQueue", "WifiMedium", "lte_tti_schedule", "rlc_enqueue",
    "wifi_overhead_us", "MobilityEvent", "MobilityKind", "MobilityScript", "ScriptError",
    "apply_mobility", "linear_motion", "PAYLOAD_BYTES", "TrafficKind", "TrafficSource",
    "generate_traffic", "DatagramReceiver", "DatagramSender", "DelayOrigin", "Flow", "FlowStats",
    "ReliableReceiver", "ReliableSender", "SubInterface", "UeLogicalInterface",
]
