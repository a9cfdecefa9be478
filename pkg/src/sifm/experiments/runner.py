"""Running scenarios and sweeps."""

from __future__ import annotations

import itertools
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from ..netsim.transport import FlowStats
from .config import ConfigError, ScenarioConfig
from .metrics import SummaryRow, compute_handover_delay, rows_to_csv, summarize
from .world import HandoverRecord, World, build_world

log = logging.getLogger(__name__)

DEFAULT_REPEATS = 5


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    stats: list[FlowStats]
    handovers: list[HandoverRecord]
    summary: SummaryRow
    world: Optional[World] = field(default=None, repr=False)


def run_scenario(cfg: ScenarioConfig, keep_world: bool = False) -> ScenarioResult:
    world = build_world(cfg)
    world.run()
    stats = [flow.stats for flow in world.flows]
    overall, tcp, udp = summarize(stats, world.warmup_us, world.duration_us)
    handovers = sorted(world.handovers, key=lambda r: (r.trigger_us, r.mn_id, r.flow))
    summary = SummaryRow(
        scenario_id=cfg.scenario_id,
        architecture=cfg.architecture.value,
        num_users=cfg.num_users,
        offload_percent=cfg.offload_percent,
        policy=cfg.policy.value,
        seed=cfg.seed,
        overall=overall,
        tcp=tcp,
        udp=udp,
        handover_delay_ms=compute_handover_delay(r.delay_us for r in handovers),
    )
    return ScenarioResult(cfg, stats, handovers, summary, world if keep_world else None)


def expand_repeats(cfg: ScenarioConfig, repeats: int) -> list[ScenarioConfig]:
    """``repeats`` copies of ``cfg`` with consecutive seeds starting at ``cfg.seed``.

    A custom scenario id gets a ``-s<seed>`` suffix so repeats stay distinct.
    """
    if repeats == 1:
        return [cfg]
    custom = cfg.scenario_id != cfg.default_id()
    out = []
    for i in range(repeats):
        seed = cfg.seed + i
        out.append(cfg.with_(seed=seed, scenario_id=f"{cfg.scenario_id}-s{seed}" if custom else ""))
    return out


@dataclass
class SweepOutcome:
    rows: list[SummaryRow]
    failures: list[tuple[str, str]]

    @property
    def csv(self) -> str:
        return rows_to_csv(self.rows)


def _run_one(cfg: ScenarioConfig) -> tuple[Optional[SummaryRow], Optional[str]]:
    try:
        return run_scenario(cfg).summary, None
    except Exception:  # a failed scenario is reported, the sweep carries on
        return None, traceback.format_exc()


def sweep(configs: Sequence[ScenarioConfig], parallel: int = 1) -> SweepOutcome:
    """Run every scenario; rows come back sorted by configuration key."""
    ordered = sorted(configs, key=lambda c: c.sort_key)
    if parallel > 1 and len(ordered) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_one, ordered))
    else:
        results = [_run_one(cfg) for cfg in ordered]
    rows, failures = [], []
    for cfg, (row, error) in zip(ordered, results):
        if row is None:
            log.error("scenario %s failed:\n%s", cfg.scenario_id, error)
            failures.append((cfg.scenario_id, error))
        else:
            rows.append(row)
    return SweepOutcome(rows, failures)


def paper_grid(
    base: Optional[ScenarioConfig] = None,
    architectures: Iterable[str] = ("SIFM", "PMIPV6"),
    users: Iterable[int] = (10, 20, 30, 40, 50),
    offloads: Iterable[int] = (0, 25, 50, 75),
) -> list[ScenarioConfig]:
    base = base or ScenarioConfig()
    return [
        base.with_(architecture=a, num_users=u, offload_percent=o, policy=None)
        for a, u, o in itertools.product(architectures, users, offloads)
    ]


GRID_KEYS = {"base", "architectures", "num_users", "offload_percent", "policies",
             "rlc_buffer_bytes", "mobility_mode", "repeats", "scenarios"}


def load_grid(path: str | Path, repeats: Optional[int] = None) -> list[ScenarioConfig]:
    """Expand a grid file into scenario configs.

    The grid is a JSON object. ``base`` holds scenario fields shared by every
    point; ``architectures``, ``num_users``, ``offload_percent``, ``policies``,
    ``rlc_buffer_bytes`` and ``mobility_mode`` are lists whose cartesian product
    is taken; ``scenarios`` lists extra explicit scenarios; ``repeats`` sets the
    number of seeds per point (the ``repeats`` argument overrides it).
    """
    with open(path) as fh:
        grid = json.load(fh)
    return expand_grid(grid, repeats)


def expand_grid(grid: dict[str, Any], repeats: Optional[int] = None) -> list[ScenarioConfig]:
    if not isinstance(grid, dict):
        raise ConfigError("grid must be a JSON object")
    unknown = sorted(set(grid) - GRID_KEYS)
    if unknown:
        raise ConfigError(f"unknown grid keys: {', '.join(unknown)}")
    n = repeats if repeats is not None else int(grid.get("repeats", DEFAULT_REPEATS))
    if n < 1:
        raise ConfigError("repeats must be >= 1")
    base = dict(grid.get("base", {}))
    axes = {
        "architecture": grid.get("architectures"),
        "num_users": grid.get("num_users"),
        "offload_percent": grid.get("offload_percent"),
        "policy": grid.get("policies"),
        "rlc_buffer_bytes": grid.get("rlc_buffer_bytes"),
        "mobility_mode": grid.get("mobility_mode"),
    }
    axes = {k: v for k, v in axes.items() if v is not None}
    points: list[ScenarioConfig] = []
    if axes:
        names = list(axes)
        for combo in itertools.product(*(axes[k] for k in names)):
            points.append(ScenarioConfig.from_dict({**base, **dict(zip(names, combo))}))
    for extra in grid.get("scenarios", []):
        points.append(ScenarioConfig.from_dict({**base, **extra}))
    return [cfg for point in points for cfg in expand_repeats(point, n)]
