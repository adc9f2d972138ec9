"""Operator reconstruction: global duplication scaling, row-band splitting,
and the (alpha, beta) grid search that yields a tenant's processing time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

from .errors import InfeasibleAreaError, InfeasibleBetaError, InfeasibleError
from .hardware import ChipTopology, PowerModel
from .mapping import DeploymentPlan, Footprint, ReOperator, footprint, naive_deploy
from .profiler import (
    DEFAULT_COSTS,
    CostParams,
    ProfiledOperator,
    ProfileResult,
    classic_duplication,
    eval_latency,
    operator_cycles,
    profile_tenant,
)
from .workload import TenantSpec

INF = math.inf
Beta = float  # an integer number of arrays, or math.inf for "no split"


def parse_alpha(token: str | int | float | Fraction) -> Fraction:
    value = Fraction(token) if not isinstance(token, str) else Fraction(token.strip())
    if not 0 < value <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {token!r}")
    return value


def parse_beta(token: str | int | float) -> Beta:
    if isinstance(token, str):
        token = token.strip().lower()
        if token in ("inf", "infinity", "∞"):
            return INF
        token = float(token)
    if token == INF:
        return INF
    if token != int(token) or token < 1:
        raise ValueError(f"beta must be a positive integer or inf, got {token!r}")
    return int(token)


def format_beta(beta: Beta) -> str:
    return "inf" if beta == INF else str(int(beta))


@dataclass(frozen=True)
class ReconstructionParams:
    alpha: Fraction = Fraction(1)
    beta: Beta = INF

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.beta != INF and (self.beta < 1 or self.beta != int(self.beta)):
            raise ValueError(f"beta must be a positive integer or inf, got {self.beta}")


CLASSIC = ReconstructionParams(Fraction(1), INF)


@dataclass(frozen=True)
class Grid:
    alphas: tuple[Fraction, ...]
    betas: tuple[Beta, ...]

    @classmethod
    def of(cls, alphas: Iterable, betas: Iterable) -> Grid:
        """Build a grid that always contains the classic point (alpha=1, beta=inf)."""
        a = sorted({parse_alpha(x) for x in alphas} | {Fraction(1)})
        b = sorted({parse_beta(x) for x in betas} | {INF})
        return cls(tuple(a), tuple(b))

    def points(self) -> list[ReconstructionParams]:
        return [ReconstructionParams(a, b) for a in self.alphas for b in self.betas]

    def describe(self) -> dict[str, list[str]]:
        return {"alpha_grid": [str(a) for a in self.alphas],
                "beta_grid": [format_beta(b) for b in self.betas]}


DEFAULT_GRID = Grid.of([Fraction(1, 2 ** k) for k in range(6)], [1, 2, 4, 8, 16, 32, INF])
CLASSIC_GRID = Grid((Fraction(1),), (INF,))


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def duplicate(tenant: TenantSpec, alpha: Fraction) -> list[int]:
    """Replica count per layer: the classic counts scaled by one global factor."""
    alpha = Fraction(alpha)
    counts = []
    for i in range(len(tenant.flat_layers)):
        base = classic_duplication(tenant, i)
        counts.append(base if alpha == 1 else max(1, _round_half_up(alpha * base)))
    return counts


def split(fp: Footprint, beta: Beta, chip: ChipTopology) -> list[Footprint]:
    """Cut a footprint into bands of whole crossbar rows, each at most ``beta`` arrays.

    A band of ``array_rows`` rows spans all column slices, so it is the
    smallest piece a split can produce.
    """
    if fp.arrays <= beta:
        return [fp]
    if fp.col_slices > beta:
        raise InfeasibleBetaError(fp.col_slices, beta)
    bands = int(beta // fp.col_slices)
    pieces = []
    for start in range(0, fp.row_slices, bands):
        n = min(bands, fp.row_slices - start)
        rows = min(n * chip.array_rows, fp.rows - start * chip.array_rows)
        pieces.append(Footprint(rows, fp.cols, n, fp.col_slices))
    return pieces


def build_reoperators(tenant: TenantSpec, params: ReconstructionParams, chip: ChipTopology,
                      costs: CostParams = DEFAULT_COSTS, area: int | None = None) -> list[ReOperator]:
    """Duplicate then split every conv/fc layer of ``tenant``.

    ``area`` caps the split limit: a piece can never be larger than the
    region it must be written into, so with ``beta = inf`` only operators that
    exceed the region are cut.
    """
    limit = params.beta if area is None else min(params.beta, area)
    replicas = duplicate(tenant, params.alpha)
    reops = []
    for i, (layer, shape) in enumerate(zip(tenant.flat_layers, tenant.shapes)):
        if layer.kind == "pool":
            continue
        base = classic_duplication(tenant, i)
        cycles = operator_cycles(layer, (shape.out_height, shape.out_width), replicas[i])
        latency = eval_latency(ProfiledOperator(cycles, costs.calc_bits, base))
        pieces = split(footprint(layer, chip), limit, chip)
        for r in range(replicas[i]):
            for s, piece in enumerate(pieces):
                reops.append(ReOperator(i, r, s, piece.rows, piece.cols, piece.arrays, latency))
    return reops


@dataclass(frozen=True)
class EvaluatedPoint:
    params: ReconstructionParams
    cycles: int | None  # None when infeasible
    reason: str = ""


@dataclass(frozen=True)
class GridSearchResult:
    best_params: ReconstructionParams
    best_plan: DeploymentPlan
    best_time: ProfileResult
    evaluated: tuple[EvaluatedPoint, ...]


def evaluate_point(tenant: TenantSpec, area: int, params: ReconstructionParams, chip: ChipTopology,
                   power: PowerModel, costs: CostParams = DEFAULT_COSTS) -> tuple[DeploymentPlan, ProfileResult]:
    reops = build_reoperators(tenant, params, chip, costs, area)
    plan = naive_deploy(reops, area, chip, costs.write_cycles_per_row)
    return plan, profile_tenant(tenant, plan, chip, power, costs)


def processing_time(tenant: TenantSpec, area: int, chip: ChipTopology, power: PowerModel,
                    grid: Grid = DEFAULT_GRID, costs: CostParams = DEFAULT_COSTS) -> GridSearchResult:
    """Minimum-cycle deployment of ``tenant`` into ``area`` arrays over ``grid``.

    Ties go to the smallest alpha, then the largest beta. Results are
    memoized since the allocator revisits the same areas repeatedly.
    """
    if area < 1:
        raise InfeasibleError(f"tenant {tenant.name!r} has no area to deploy into")
    return _processing_time(tenant, area, chip, power, grid, costs)


@lru_cache(maxsize=8192)
def _processing_time(tenant, area, chip, power, grid, costs) -> GridSearchResult:
    evaluated = []
    best = None
    for params in grid.points():
        try:
            plan, result = evaluate_point(tenant, area, params, chip, power, costs)
        except (InfeasibleAreaError, InfeasibleBetaError) as exc:
            evaluated.append(EvaluatedPoint(params, None, str(exc)))
            continue
        evaluated.append(EvaluatedPoint(params, result.cycles))
        key = (result.cycles, params.alpha, -params.beta)
        if best is None or key < best[0]:
            best = (key, params, plan, result)
    if best is None:
        raise InfeasibleError(
            f"tenant {tenant.name!r} cannot be deployed into {area} arrays at any grid point")
    _, params, plan, result = best
    return GridSearchResult(params, plan, result, tuple(evaluated))


def minimum_area(tenant: TenantSpec, chip: ChipTopology, grid: Grid = DEFAULT_GRID) -> int:
    """Smallest area (arrays) at which some grid point can be deployed.

    The binding piece is the widest single row band among the tenant's
    operators; it must fit both the region and the split limit.
    """
    band = max((footprint(layer, chip).col_slices
                for layer in tenant.flat_layers if layer.kind != "pool"), default=0)
    if max(grid.betas) < band:
        raise InfeasibleError(
            f"tenant {tenant.name!r}: no beta in the grid admits its {band}-array row band")
    return band
