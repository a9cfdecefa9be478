"""Scenario configuration, strict JSON loading and the offload-to-movers mapping."""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, NamedTuple, Optional

from ..controller import WIFI_EFFECTIVE_BPS, OffloadPolicy
from ..messages import Protocol
from ..netsim.traffic import APP_RATE_BPS, TrafficKind
from ..netsim.transport import DelayOrigin

log = logging.getLogger(__name__)

KB = 1024
MB = 1024 * 1024
APPS_PER_UE = 2
PER_USER_LOAD_BPS = APPS_PER_UE * APP_RATE_BPS
MAX_USERS = 50


class Architecture(enum.Enum):
    SIFM = "SIFM"
    PMIPV6 = "PMIPV6"
    NO_OFFLOAD = "NO_OFFLOAD"


class MobilityMode(enum.Enum):
    MOVING = "MOVING"
    STATIC_DUAL = "STATIC_DUAL"


class PolicyName(enum.Enum):
    FULL = "full"
    TCP = "tcp"
    UDP = "udp"
    NONE = "none"


class ConfigError(ValueError):
    pass


def _enum(cls, value):
    if isinstance(value, cls):
        return value
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ConfigError(f"{value!r} is not one of: {choices}") from None


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment. Times in seconds/milliseconds as named; buffers in bytes."""

    architecture: Architecture = Architecture.SIFM
    num_users: int = 10
    offload_percent: int = 0
    policy: Optional[PolicyName] = None
    mobility_mode: MobilityMode = MobilityMode.MOVING
    rlc_buffer_bytes: int = 10 * MB
    duration_s: float = 20.0
    seed: int = 1
    traffic: TrafficKind = TrafficKind.VBR
    warmup_s: float = 2.0
    app_start_s: float = 0.05
    wifi_attach_s: float = 1.0
    wifi_detach_s: Optional[float] = 14.8
    lte_detach_s: Optional[float] = None
    control_delay_ms: float = 1.0
    data_delay_ms: float = 1.0
    tunnel_delay_ms: float = 1.0
    window_cap_segments: int = 64
    min_rto_ms: float = 1000.0
    delay_origin: DelayOrigin = DelayOrigin.FIRST_TX
    scenario_id: str = ""

    def __post_init__(self) -> None:
        set_ = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        set_("architecture", _enum(Architecture, self.architecture))
        set_("mobility_mode", _enum(MobilityMode, self.mobility_mode))
        set_("traffic", _enum(TrafficKind, self.traffic))
        set_("delay_origin", _enum(DelayOrigin, self.delay_origin))
        policy = self.policy
        if policy is None:
            policy = {
                Architecture.SIFM: PolicyName.FULL,
                Architecture.PMIPV6: PolicyName.FULL,
                Architecture.NO_OFFLOAD: PolicyName.NONE,
            }[self.architecture]
        set_("policy", _enum(PolicyName, policy))
        self._validate()
        if not self.scenario_id:
            set_("scenario_id", self.default_id())

    def _validate(self) -> None:
        def need(cond: bool, text: str) -> None:
            if not cond:
                raise ConfigError(text)

        for name in ("num_users", "offload_percent", "rlc_buffer_bytes", "seed", "window_cap_segments"):
            value = getattr(self, name)
            need(isinstance(value, int) and not isinstance(value, bool), f"{name} must be an integer")
        need(1 <= self.num_users <= MAX_USERS, f"num_users must be in 1..{MAX_USERS}")
        need(0 <= self.offload_percent <= 75, "offload_percent must be in 0..75")
        need(self.rlc_buffer_bytes > 0, "rlc_buffer_bytes must be positive")
        need(self.window_cap_segments >= 1, "window_cap_segments must be >= 1")
        need(self.seed >= 0, "seed must be nonnegative")
        need(self.duration_s > 0, "duration_s must be positive")
        need(0 <= self.warmup_s < self.duration_s, "warmup_s must be in [0, duration_s)")
        need(0 <= self.app_start_s < self.duration_s, "app_start_s must be in [0, duration_s)")
        for name in ("control_delay_ms", "data_delay_ms", "tunnel_delay_ms"):
            need(getattr(self, name) >= 0, f"{name} must be nonnegative")
        need(self.min_rto_ms > 0, "min_rto_ms must be positive")
        need(self.wifi_attach_s > 0, "wifi_attach_s must be positive")
        if self.wifi_detach_s is not None:
            need(self.wifi_detach_s > self.wifi_attach_s, "wifi_detach_s must follow wifi_attach_s")
        if self.lte_detach_s is not None:
            need(self.lte_detach_s > 0, "lte_detach_s must be positive")
        if self.architecture is Architecture.SIFM:
            need(self.policy is not PolicyName.NONE, "SIFM needs an offload policy (full, tcp or udp)")
            if self.mobility_mode is MobilityMode.MOVING:
                need(self.policy is PolicyName.FULL, "MOVING scenarios use the full policy")
        elif self.architecture is Architecture.PMIPV6:
            need(self.policy is PolicyName.FULL, "PMIPv6 only supports full (per-UE) mobility")
        else:
            need(self.policy is PolicyName.NONE, "NO_OFFLOAD takes no offload policy")

    def default_id(self) -> str:
        return (
            f"{self.architecture.value.lower()}-{self.mobility_mode.value.lower()}"
            f"-u{self.num_users}-o{self.offload_percent}-{self.policy.value}"
            f"-b{self.rlc_buffer_bytes}-s{self.seed}"
        )

    @property
    def sort_key(self) -> tuple:
        return (
            self.architecture.value, self.mobility_mode.value, self.num_users,
            self.offload_percent, self.policy.value, self.rlc_buffer_bytes, self.seed,
            self.scenario_id,
        )

    def with_(self, **changes: Any) -> "ScenarioConfig":
        if "scenario_id" not in changes:
            changes["scenario_id"] = ""
        return dataclasses.replace(self, **changes)

    def offload_policy(self) -> OffloadPolicy:
        """The FC policy realising this scenario (SIFM topology only)."""
        if self.architecture is Architecture.NO_OFFLOAD:
            return OffloadPolicy.no_offload()
        if self.mobility_mode is MobilityMode.MOVING:
            return OffloadPolicy.full()
        budget = offload_budget_bps(self.offload_percent)
        protocols = {
            PolicyName.FULL: (Protocol.TCPLIKE, Protocol.UDPLIKE),
            PolicyName.TCP: (Protocol.TCPLIKE,),
            PolicyName.UDP: (Protocol.UDPLIKE,),
        }[self.policy]
        return OffloadPolicy.selective(protocols, budget)

    # JSON

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.value if isinstance(value, enum.Enum) else value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data)


def offload_budget_bps(offload_percent: float, wifi_bps: float = WIFI_EFFECTIVE_BPS) -> float:
    return offload_percent / 100 * wifi_bps


class MoverPlan(NamedTuple):
    movers: tuple[int, ...]
    budget_bps: float
    clamped: bool


def map_offload_to_movers(
    offload_percent: float,
    num_users: int,
    per_user_load_bps: float = PER_USER_LOAD_BPS,
    wifi_bps: float = WIFI_EFFECTIVE_BPS,
) -> MoverPlan:
    """The lowest-numbered ``k = floor(offload x WiFi capacity / per-user load)`` UEs
    move; UE ids are 1..num_users."""
    if per_user_load_bps <= 0:
        raise ValueError("per_user_load_bps must be positive")
    budget = offload_budget_bps(offload_percent, wifi_bps)
    k = math.floor(budget / per_user_load_bps + 1e-9)
    clamped = k > num_users
    if clamped:
        log.warning("offload %s%% needs %d movers but only %d UEs exist", offload_percent, k, num_users)
        k = num_users
    return MoverPlan(tuple(range(1, k + 1)), budget, clamped)
