"""Scripted UE mobility."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from ..messages import MnId
from .engine import Simulator, seconds


class MobilityKind(enum.Enum):
    ATTACH_LTE = "attach_lte"
    DETACH_LTE = "detach_lte"
    ATTACH_WIFI = "attach_wifi"
    DETACH_WIFI = "detach_wifi"

    @property
    def network(self) -> str:
        return self.value.split("_")[1]

    @property
    def is_attach(self) -> bool:
        return self.value.startswith("attach")


@dataclass(frozen=True, order=True)
class MobilityEvent:
    time_us: int
    mn_id: MnId
    kind: MobilityKind


class ScriptError(ValueError):
    pass


class MobilityScript:
    """Time-ordered attach/detach events, validated at construction.

    Per UE, event times must be strictly increasing, a network may not be
    attached twice in a row, and no detach may precede the matching attach.
    """

    def __init__(self, events: Iterable[MobilityEvent]) -> None:
        self.events = sorted(events, key=lambda e: (e.time_us, e.mn_id))
        self._validate()

    def _validate(self) -> None:
        last_time: dict[MnId, int] = {}
        attached: dict[tuple[MnId, str], bool] = {}
        for event in self.events:
            if event.time_us < 0:
                raise ScriptError(f"negative time in {event}")
            prev = last_time.get(event.mn_id)
            if prev is not None and event.time_us <= prev:
                raise ScriptError(f"UE {event.mn_id}: times must be strictly increasing")
            last_time[event.mn_id] = event.time_us
            slot = (event.mn_id, event.kind.network)
            now_attached = attached.get(slot, False)
            if event.kind.is_attach and now_attached:
                raise ScriptError(f"UE {event.mn_id}: {event.kind.value} while already attached")
            if not event.kind.is_attach and not now_attached:
                raise ScriptError(f"UE {event.mn_id}: {event.kind.value} before matching attach")
            attached[slot] = event.kind.is_attach

    def __iter__(self):
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def for_ue(self, mn_id: MnId) -> list[MobilityEvent]:
        return [e for e in self.events if e.mn_id == mn_id]


def linear_motion(
    mn_id: MnId,
    speed_mps: float,
    distance_to_wifi_m: float,
    wifi_span_m: Optional[float] = None,
    start_s: float = 0.0,
) -> list[MobilityEvent]:
    """WiFi attach/detach times for a UE moving in a straight line.

    The UE enters WiFi coverage after ``distance_to_wifi_m`` and, if
    ``wifi_span_m`` is given, leaves it after crossing that much more.
    """
    if speed_mps <= 0:
        raise ValueError("speed must be positive")
    enter = start_s + distance_to_wifi_m / speed_mps
    events = [MobilityEvent(seconds(enter), mn_id, MobilityKind.ATTACH_WIFI)]
    if wifi_span_m is not None:
        leave = enter + wifi_span_m / speed_mps
        events.append(MobilityEvent(seconds(leave), mn_id, MobilityKind.DETACH_WIFI))
    return events


def apply_mobility(
    sim: Simulator, script: MobilityScript, handler: Callable[[MobilityEvent], None]
) -> None:
    """Schedule every script event; ``handler`` performs the MA-side attach/detach."""
    for event in script:
        sim.schedule(event.time_us, handler, event)
