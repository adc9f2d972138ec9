"""Tenant-level area partitioning: start from an equal split and keep moving
tiles from the fastest tenant to the slowest until their finishing times are
within the delay budget or the allocation starts to cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import InfeasibleError
from .hardware import ChipTopology, PowerModel
from .profiler import DEFAULT_COSTS, CostParams, ProfileResult
from .reconstruct import DEFAULT_GRID, Grid, GridSearchResult, minimum_area, processing_time
from .workload import MultiTenantWorkload, TenantSpec

STOP_REASONS = ("delay_met", "early_stop_repeat", "max_iterations")


@dataclass(frozen=True)
class OptimizerConfig:
    """``eta`` is the fraction of the chip's tiles moved per step (None: one tile).
    ``delay_budget_s`` None means 5% of the fastest tenant's initial time."""

    eta: Fraction | float | None = None
    delay_budget_s: float | None = None
    max_iterations: int = 1000
    grid: Grid = DEFAULT_GRID
    costs: CostParams = DEFAULT_COSTS

    def __post_init__(self) -> None:
        if self.eta is not None and not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.delay_budget_s is not None and not self.delay_budget_s >= 0:
            raise ValueError(f"delay budget must be >= 0, got {self.delay_budget_s}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def eta_for(self, chip: ChipTopology) -> Fraction | float:
        return Fraction(1, chip.tiles) if self.eta is None else self.eta


@dataclass(frozen=True)
class Allocation:
    tiles_per_tenant: tuple[int, ...]
    iteration: int = 0
    history: tuple[tuple[int, ...], ...] = ()
    moved: int = 0

    @property
    def total(self) -> int:
        return sum(self.tiles_per_tenant)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    tiles: tuple[int, ...]
    seconds: tuple[float, ...]

    @property
    def delay_s(self) -> float:
        return max(self.seconds) - min(self.seconds)


@dataclass(frozen=True)
class AllocationOutcome:
    final: Allocation
    per_tenant: tuple[tuple[GridSearchResult, ProfileResult], ...]
    delay_s: float
    delay_budget_s: float
    stop_reason: str
    trace: tuple[IterationRecord, ...] = field(default=())

    @property
    def seconds(self) -> tuple[float, ...]:
        return tuple(p.seconds for _, p in self.per_tenant)


def _round_half_up(x: float | Fraction) -> int:
    return math.floor(Fraction(x) + Fraction(1, 2))


def initial_allocation(tenants: int, chip: ChipTopology) -> Allocation:
    """Equal split; the first ``tiles % tenants`` tenants get one extra tile."""
    if tenants < 1:
        raise ValueError("need at least one tenant")
    if tenants > chip.tiles:
        raise InfeasibleError(f"{tenants} tenants cannot share {chip.tiles} tiles")
    q, r = divmod(chip.tiles, tenants)
    return Allocation(tuple(q + (1 if i < r else 0) for i in range(tenants)))


def iter_allocation(alloc: Allocation, times: Sequence[float], eta: Fraction | float,
                    chip: ChipTopology, minimums: Sequence[int] | None = None) -> Allocation:
    """Move ``eta * tiles`` tiles (at least one) from the fastest tenant to the slowest."""
    tiles = list(alloc.tiles_per_tenant)
    if len(times) != len(tiles):
        raise ValueError("one time per tenant is required")
    if not all(math.isfinite(t) for t in times):
        raise ValueError("tenant times must be finite")
    minimums = [0] * len(tiles) if minimums is None else list(minimums)
    donor = min(range(len(times)), key=lambda i: (times[i], i))
    taker = max(range(len(times)), key=lambda i: (times[i], -i))
    step = max(1, _round_half_up(Fraction(eta) * chip.tiles))
    moved = 0
    if donor != taker:
        moved = max(0, min(step, tiles[donor] - minimums[donor]))
        tiles[donor] -= moved
        tiles[taker] += moved
    return Allocation(tuple(tiles), alloc.iteration + 1,
                      alloc.history + (alloc.tiles_per_tenant,), moved)


def minimum_tiles(tenant: TenantSpec, chip: ChipTopology, grid: Grid = DEFAULT_GRID) -> int:
    return max(1, math.ceil(minimum_area(tenant, chip, grid) / chip.arrays_per_tile))


def _repair(alloc: Allocation, minimums: Sequence[int]) -> Allocation:
    """Lift tenants below their minimum by taking tiles from the richest others."""
    tiles = list(alloc.tiles_per_tenant)
    for i, need in enumerate(minimums):
        while tiles[i] < need:
            donor = max((j for j in range(len(tiles)) if j != i and tiles[j] > minimums[j]),
                        key=lambda j: (tiles[j] - minimums[j], -j))
            take = min(need - tiles[i], tiles[donor] - minimums[donor])
            tiles[donor] -= take
            tiles[i] += take
    return Allocation(tuple(tiles), alloc.iteration, alloc.history)


def evaluate_allocation(tenants: Sequence[TenantSpec], alloc: Allocation, chip: ChipTopology,
                        power: PowerModel, config: OptimizerConfig) -> tuple[tuple[GridSearchResult, ProfileResult], ...]:
    out = []
    for tenant, tiles in zip(tenants, alloc.tiles_per_tenant):
        result = processing_time(tenant, tiles * chip.arrays_per_tile, chip, power, config.grid, config.costs)
        out.append((result, result.best_time))
    return tuple(out)


def starting_allocation(tenants: Sequence[TenantSpec], chip: ChipTopology,
                        grid: Grid = DEFAULT_GRID) -> tuple[Allocation, list[int]]:
    """Equal split, adjusted so every tenant holds at least its minimum tiles."""
    minimums = [minimum_tiles(t, chip, grid) for t in tenants]
    if sum(minimums) > chip.tiles:
        detail = ", ".join(f"{t.name}={m}" for t, m in zip(tenants, minimums))
        raise InfeasibleError(f"workload needs {sum(minimums)} tiles but the chip has {chip.tiles} "
                              f"(minimum tiles per tenant: {detail})")
    return _repair(initial_allocation(len(tenants), chip), minimums), minimums


def allocate_area(workload: MultiTenantWorkload | Sequence[TenantSpec], chip: ChipTopology,
                  power: PowerModel, config: OptimizerConfig = OptimizerConfig()) -> AllocationOutcome:
    tenants = tuple(getattr(workload, "tenants", workload))
    alloc, minimums = starting_allocation(tenants, chip, config.grid)
    eta = config.eta_for(chip)

    per_tenant = evaluate_allocation(tenants, alloc, chip, power, config)
    seconds = tuple(p.seconds for _, p in per_tenant)
    budget = config.delay_budget_s
    if budget is None:
        budget = 0.05 * min(seconds)
    trace = [IterationRecord(0, alloc.tiles_per_tenant, seconds)]

    while True:
        delay = max(seconds) - min(seconds)
        if delay <= budget:
            reason = "delay_met"
            break
        if alloc.iteration >= config.max_iterations:
            reason = "max_iterations"
            break
        alloc = iter_allocation(alloc, seconds, eta, chip, minimums)
        per_tenant = evaluate_allocation(tenants, alloc, chip, power, config)
        seconds = tuple(p.seconds for _, p in per_tenant)
        trace.append(IterationRecord(alloc.iteration, alloc.tiles_per_tenant, seconds))
        if len(alloc.history) >= 2 and alloc.tiles_per_tenant == alloc.history[-2]:
            reason = "early_stop_repeat"
            break

    return AllocationOutcome(alloc, per_tenant, max(seconds) - min(seconds), budget, reason, tuple(trace))
