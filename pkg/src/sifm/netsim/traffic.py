"""Application traffic generators (constant and Poisson bit rate)."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Iterator

PAYLOAD_BYTES = 1000
APP_RATE_BPS = 1e6


class TrafficKind(enum.Enum):
    CBR = "cbr"
    VBR = "vbr"


@dataclass(frozen=True)
class TrafficSource:
    kind: TrafficKind = TrafficKind.VBR
    mean_rate_bps: float = APP_RATE_BPS
    payload_bytes: int = PAYLOAD_BYTES

    def __post_init__(self) -> None:
        if self.mean_rate_bps <= 0 or self.payload_bytes <= 0:
            raise ValueError("rate and payload must be positive")

    @property
    def mean_interarrival_us(self) -> float:
        return self.payload_bytes * 8e6 / self.mean_rate_bps


def generate_traffic(
    source: TrafficSource, until_us: int, rng: random.Random, start_us: int = 0
) -> Iterator[int]:
    """Yield packet arrival times in ``[start_us, until_us)``.

    CBR arrivals are exactly one mean inter-arrival apart; VBR inter-arrivals
    are exponential with that mean.
    """
    gap = source.mean_interarrival_us
    t = float(start_us)
    if source.kind is TrafficKind.CBR:
        i = 0
        while True:
            at = start_us + int(round(i * gap))
            if at >= until_us:
                return
            yield at
            i += 1
    while True:
        t += rng.expovariate(1.0 / gap)
        at = int(round(t))
        if at >= until_us:
            return
        yield at
