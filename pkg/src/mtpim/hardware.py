"""Accelerator topology and power constants (ISAAC-style tiles)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Mapping

from .errors import WorkloadError

# Per-tile and whole-chip power of the reference ISAAC configuration.
ISAAC_TILE_POWER_W = 0.330
ISAAC_TILES = 168
ISAAC_CHIP_POWER_W = 65.8
ISAAC_TILE_TOTAL_W = 55.4  # as printed, i.e. rounded


@dataclass(frozen=True)
class ChipTopology:
    tiles: int
    imas_per_tile: int = 12
    arrays_per_ima: int = 8
    array_rows: int = 128
    array_cols: int = 128
    bits_per_cell: int = 2
    weight_bits: int = 16
    cycle_ns: float = 100.0
    name: str = "custom"

    def __post_init__(self) -> None:
        for attr in ("tiles", "imas_per_tile", "arrays_per_ima", "array_rows",
                     "array_cols", "bits_per_cell", "weight_bits"):
            value = getattr(self, attr)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise WorkloadError(f"{attr} must be a positive integer, got {value!r}", field=f"chip.{attr}")
        if not (isinstance(self.cycle_ns, (int, float)) and math.isfinite(self.cycle_ns) and self.cycle_ns > 0):
            raise WorkloadError("cycle_ns must be a positive number", field="chip.cycle_ns")
        if self.weight_bits % self.bits_per_cell:
            raise WorkloadError("weight_bits must be a multiple of bits_per_cell", field="chip.weight_bits")

    @property
    def cells_per_weight(self) -> int:
        return self.weight_bits // self.bits_per_cell

    @property
    def arrays_per_tile(self) -> int:
        return self.imas_per_tile * self.arrays_per_ima

    @property
    def total_arrays(self) -> int:
        return total_arrays(self)

    @property
    def label(self) -> str:
        return f"{self.tiles}-{self.imas_per_tile}-{self.arrays_per_ima}-{self.array_rows}"


@dataclass(frozen=True)
class PowerModel:
    """Active power of one tile plus the chip-level remainder outside tiles."""

    tile_power_w: float = ISAAC_TILE_POWER_W
    chip_overhead_w: float = ISAAC_CHIP_POWER_W - ISAAC_TILES * ISAAC_TILE_POWER_W

    def __post_init__(self) -> None:
        for attr in ("tile_power_w", "chip_overhead_w"):
            value = getattr(self, attr)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
                raise WorkloadError(f"{attr} must be a finite nonnegative number", field=f"chip.{attr}")


CHIP_PRESETS: dict[str, ChipTopology] = {
    "chip1": ChipTopology(tiles=168, imas_per_tile=12, arrays_per_ima=8, name="chip1"),
    "chip2": ChipTopology(tiles=256, imas_per_tile=12, arrays_per_ima=12, name="chip2"),
}


def chip_preset(name: str) -> tuple[ChipTopology, PowerModel]:
    if name == "chip3":
        raise WorkloadError("chip3 has no published topology; describe it explicitly in [chip]",
                            field="chip.preset")
    if name not in CHIP_PRESETS:
        raise WorkloadError(f"unknown chip {name!r}; choose from {', '.join(CHIP_PRESETS)}",
                            field="chip.preset")
    return CHIP_PRESETS[name], PowerModel()


def total_arrays(chip: ChipTopology) -> int:
    return chip.tiles * chip.imas_per_tile * chip.arrays_per_ima


_FIELDS = ("tiles", "imas_per_tile", "arrays_per_ima", "array_rows", "array_cols",
           "bits_per_cell", "weight_bits", "cycle_ns")


def chip_from_table(table: Mapping[str, Any]) -> tuple[ChipTopology, PowerModel]:
    """Resolve a ``[chip]`` section: a preset, explicit fields, or a preset with overrides."""
    unknown = set(table) - set(_FIELDS) - {"preset", "tile_power_mw", "chip_overhead_mw", "name"}
    if unknown:
        raise WorkloadError(f"unknown chip keys: {', '.join(sorted(unknown))}", field="chip")
    if "preset" in table:
        base, power = chip_preset(str(table["preset"]))
        values = asdict(base)
    else:
        if "tiles" not in table:
            raise WorkloadError("explicit chips need at least tiles", field="chip.tiles")
        base, power = None, PowerModel()
        values = {"name": "custom"}
    values.update({k: table[k] for k in _FIELDS if k in table})
    if "name" in table:
        values["name"] = str(table["name"])
    elif base is not None and any(k in table for k in _FIELDS):
        values["name"] = f"{base.name}-custom"
    chip = ChipTopology(**values)
    for key in ("tile_power_mw", "chip_overhead_mw"):
        if key in table and (isinstance(table[key], bool) or not isinstance(table[key], (int, float))):
            raise WorkloadError(f"{key} must be a number", field=f"chip.{key}")
    tile_w = table["tile_power_mw"] / 1000 if "tile_power_mw" in table else power.tile_power_w
    overhead_w = table["chip_overhead_mw"] / 1000 if "chip_overhead_mw" in table else power.chip_overhead_w
    return chip, PowerModel(tile_w, overhead_w)


def chip_record(chip: ChipTopology, power: PowerModel) -> dict[str, Any]:
    record = {k: getattr(chip, k) for k in ("name",) + _FIELDS}
    record["tile_power_mw"] = power.tile_power_w * 1000
    record["chip_overhead_mw"] = power.chip_overhead_w * 1000
    return record
