"""Weight-to-crossbar footprints and round-based packing of re-operators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InfeasibleAreaError, WorkloadError
from .hardware import ChipTopology
from .workload import LayerSpec


@dataclass(frozen=True)
class Footprint:
    """Crossbar occupancy of one weight matrix.

    Rows hold the unrolled receptive field, columns hold the output channels
    with each weight spread over ``cells_per_weight`` adjacent cells.
    """

    rows: int
    cols: int
    row_slices: int
    col_slices: int

    @property
    def arrays(self) -> int:
        return self.row_slices * self.col_slices


def footprint(layer: LayerSpec, chip: ChipTopology) -> Footprint:
    if layer.kind == "pool":
        raise WorkloadError("pool layers have no crossbar footprint", field="kind")
    if layer.kind == "conv":
        rows = layer.kernel * layer.kernel * layer.in_channels
    else:
        rows = layer.in_channels
    cols = layer.out_channels * chip.cells_per_weight
    return Footprint(rows, cols, math.ceil(rows / chip.array_rows), math.ceil(cols / chip.array_cols))


@dataclass(frozen=True)
class ReOperator:
    """A deployable piece of an operator after duplication and splitting.

    ``group`` names the duplication group (the parent layer); replicas of the
    same layer share it. ``latency`` is the piece's compute time in cycles.
    """

    layer_index: int
    replica: int
    slice_index: int
    rows: int
    cols: int
    arrays: int
    latency: int

    @property
    def id(self) -> str:
        return f"L{self.layer_index}.r{self.replica}.s{self.slice_index}"

    @property
    def group(self) -> str:
        return f"L{self.layer_index}"

    @property
    def order(self) -> tuple[int, int, int]:
        return (self.layer_index, self.replica, self.slice_index)


@dataclass(frozen=True)
class Round:
    operators: tuple[str, ...]
    arrays_used: int
    write_cycles: int
    compute_cycles: int

    @property
    def cycles(self) -> int:
        return self.write_cycles + self.compute_cycles


@dataclass(frozen=True)
class DeploymentPlan:
    area: int
    rounds: tuple[Round, ...]
    tiles_used: int

    @property
    def total_cycles(self) -> int:
        return sum(r.cycles for r in self.rounds)


def tiles_spanned(arrays_used: int, chip: ChipTopology) -> int:
    return math.ceil(arrays_used / chip.arrays_per_tile)


def naive_deploy(reops: Sequence[ReOperator], area: int, chip: ChipTopology,
                 write_cycles_per_row: int = 1) -> DeploymentPlan:
    """Pack re-operators first-fit-decreasing into rounds of ``area`` arrays.

    Each round programs its arrays (``array_rows`` row writes per array) and
    then runs its members as parallel pipeline stages, so the round's compute
    time is that of its slowest member.
    """
    for op in reops:
        if op.arrays > area:
            raise InfeasibleAreaError(op.id, op.arrays, area)
    ordered = sorted(reops, key=lambda op: (-op.arrays, op.order))
    free: list[int] = []
    members: list[list[ReOperator]] = []
    first_open = 0  # rounds before this index are full
    for op in ordered:
        placed = False
        for i in range(first_open, len(free)):
            if free[i] >= op.arrays:
                free[i] -= op.arrays
                members[i].append(op)
                placed = True
                break
        if not placed:
            free.append(area - op.arrays)
            members.append([op])
        while first_open < len(free) and free[first_open] == 0:
            first_open += 1
    write_per_array = chip.array_rows * write_cycles_per_row
    rounds = []
    for group in members:
        used = sum(op.arrays for op in group)
        rounds.append(Round(
            operators=tuple(op.id for op in group),
            arrays_used=used,
            write_cycles=used * write_per_array,
            compute_cycles=max(op.latency for op in group),
        ))
    tiles = max((tiles_spanned(r.arrays_used, chip) for r in rounds), default=0)
    return DeploymentPlan(area, tuple(rounds), tiles)
