"""Classic per-operator latency, stride-driven duplication, and tile energy."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .hardware import ChipTopology, PowerModel
from .mapping import DeploymentPlan
from .workload import LayerSpec, TenantSpec


@dataclass(frozen=True)
class CostParams:
    """Knobs of the cost model that are not properties of the chip."""

    calc_bits: int = 16
    write_cycles_per_row: int = 1
    include_chip_overhead: bool = False

    def __post_init__(self) -> None:
        if self.calc_bits < 1:
            raise ValueError("calc_bits must be >= 1")
        if self.write_cycles_per_row < 0:
            raise ValueError("write_cycles_per_row must be >= 0")


DEFAULT_COSTS = CostParams()


@dataclass(frozen=True)
class ProfiledOperator:
    compute_cycles: int
    calc_bits: int = 16
    pool_factor: int = 1

    def __post_init__(self) -> None:
        if self.compute_cycles < 0 or self.calc_bits < 1 or self.pool_factor < 1:
            raise ValueError(f"invalid operator profile {self}")


def eval_latency(op: ProfiledOperator) -> int:
    """Cycles for an operator: input bit-serial pass plus the pooled output pipeline."""
    nb, npool = op.calc_bits, op.pool_factor
    return op.compute_cycles * ((1 + nb) + (6 + nb + npool))


def classic_duplication(tenant: TenantSpec, layer_index: int) -> int:
    """Product of the strides of every pool after ``layer_index``."""
    layers = tenant.flat_layers
    if not 0 <= layer_index < len(layers):
        raise IndexError(f"layer index {layer_index} out of range for {tenant.name}")
    return math.prod(layer.stride for layer in layers[layer_index + 1:] if layer.kind == "pool")


def operator_cycles(layer: LayerSpec, feature_map: tuple[int, int], duplication: int) -> int:
    """Compute cycles of one operator over its output map, shared among replicas."""
    if duplication < 1:
        raise ValueError("duplication must be >= 1")
    if layer.kind == "fc":
        return 1
    if layer.kind == "pool":
        return 0
    h, w = feature_map
    return math.ceil(h * w / duplication)


def energy(tiles_used: int, seconds: float, power: PowerModel) -> float:
    return tiles_used * power.tile_power_w * seconds


@dataclass(frozen=True)
class ProfileResult:
    cycles: int
    seconds: float
    energy_joules: float
    tiles_used: int


def cycles_to_seconds(cycles: int, chip: ChipTopology) -> float:
    return cycles * chip.cycle_ns * 1e-9


def profile_tenant(tenant: TenantSpec, plan: DeploymentPlan, chip: ChipTopology,
                   power: PowerModel, costs: CostParams = DEFAULT_COSTS) -> ProfileResult:
    cycles = plan.total_cycles
    seconds = cycles_to_seconds(cycles, chip)
    joules = energy(plan.tiles_used, seconds, power)
    if costs.include_chip_overhead:
        joules += power.chip_overhead_w * seconds
    return ProfileResult(cycles, seconds, joules, plan.tiles_used)
