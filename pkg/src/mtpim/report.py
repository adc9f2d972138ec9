"""Classic sequential baseline, optimized-vs-baseline comparison with the two
single-mechanism ablations, and JSON/CSV emission with a consistency check.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Any, Sequence

from .allocator import (
    STOP_REASONS,
    AllocationOutcome,
    OptimizerConfig,
    allocate_area,
    evaluate_allocation,
    starting_allocation,
)
from .errors import InfeasibleError, ReportInvariantError
from .hardware import ChipTopology, PowerModel, chip_record
from .mapping import footprint
from .profiler import ProfiledOperator, ProfileResult, classic_duplication, eval_latency, operator_cycles
from .reconstruct import CLASSIC_GRID, format_beta, processing_time
from .workload import MultiTenantWorkload, TenantSpec

DETERMINISM_NOTE = "deterministic pipeline; no random seed involved"
REL_TOL = 1e-12


def baseline_deploy(tenants: Sequence[TenantSpec] | MultiTenantWorkload, chip: ChipTopology,
                    power: PowerModel, config: OptimizerConfig = OptimizerConfig()) -> list[ProfileResult]:
    """Each tenant alone on the whole chip with classic duplication, one after another."""
    tenants = tuple(getattr(tenants, "tenants", tenants))
    if not tenants:
        raise ValueError("no tenants to deploy")
    results = []
    for tenant in tenants:
        try:
            r = processing_time(tenant, chip.total_arrays, chip, power, CLASSIC_GRID, config.costs)
        except InfeasibleError as exc:
            raise InfeasibleError(f"baseline: {exc}") from None
        results.append(r.best_time)
    return results


@dataclass(frozen=True)
class TenantRow:
    name: str
    tiles: int
    baseline_cycles: int
    baseline_seconds: float
    baseline_energy_j: float
    baseline_tiles_used: int
    optimized_cycles: int
    optimized_seconds: float
    optimized_energy_j: float
    optimized_tiles_used: int
    chosen_alpha: str
    chosen_beta: str
    rounds: int
    classic_seconds_at_allocation: float


@dataclass(frozen=True)
class Totals:
    baseline_latency_s: float
    optimized_latency_s: float
    overall_speedup: float
    baseline_energy_j: float
    optimized_energy_j: float
    energy_ratio: float
    energy_increase: float


@dataclass(frozen=True)
class ComparisonReport:
    workload: str
    config: dict[str, Any]
    tenants: tuple[TenantRow, ...]
    totals: Totals
    ablations: dict[str, Any]
    allocation: dict[str, Any]
    trace: tuple[dict[str, Any], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "workload": self.workload,
            "config": self.config,
            "tenants": [asdict(t) for t in self.tenants],
            "totals": asdict(self.totals),
            "ablations": self.ablations,
            "allocation": self.allocation,
            "trace": list(self.trace),
        }


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.inf


def config_echo(chip: ChipTopology, power: PowerModel, config: OptimizerConfig,
                delay_budget_s: float | None = None) -> dict[str, Any]:
    return {
        "chip": chip_record(chip, power),
        **config.grid.describe(),
        "eta": str(config.eta_for(chip)),
        "delay_budget_s": delay_budget_s if delay_budget_s is not None else config.delay_budget_s,
        "delay_budget_source": "given" if config.delay_budget_s is not None else "5% of fastest initial tenant",
        "max_iterations": config.max_iterations,
        "calc_bits": config.costs.calc_bits,
        "write_cycles_per_row": config.costs.write_cycles_per_row,
        "include_chip_overhead": config.costs.include_chip_overhead,
        "determinism": DETERMINISM_NOTE,
    }


def _ablation(tiles: Sequence[int], seconds: Sequence[float], energies: Sequence[float],
              baseline_latency: float, **extra: Any) -> dict[str, Any]:
    latency = max(seconds)
    return {
        "tiles": list(tiles),
        "seconds": list(seconds),
        "latency_s": latency,
        "speedup": _ratio(baseline_latency, latency),
        "energy_j": sum(energies),
        **extra,
    }


def outcome_dict(outcome: AllocationOutcome, minimums: Sequence[int] | None = None) -> dict[str, Any]:
    d = {
        "tiles": list(outcome.final.tiles_per_tenant),
        "iterations": outcome.final.iteration,
        "stop_reason": outcome.stop_reason,
        "delay_s": outcome.delay_s,
        "delay_budget_s": outcome.delay_budget_s,
    }
    if minimums is not None:
        d["minimum_tiles"] = list(minimums)
    return d


def trace_rows(outcome: AllocationOutcome) -> tuple[dict[str, Any], ...]:
    return tuple({"iteration": r.iteration, "tiles": list(r.tiles), "seconds": list(r.seconds),
                  "delay_s": r.delay_s} for r in outcome.trace)


def compare(workload: MultiTenantWorkload, chip: ChipTopology, power: PowerModel,
            config: OptimizerConfig = OptimizerConfig()) -> ComparisonReport:
    tenants = workload.tenants
    baseline = baseline_deploy(tenants, chip, power, config)
    b_latency = sum(p.seconds for p in baseline)

    outcome = allocate_area(workload, chip, power, config)
    start, minimums = starting_allocation(tenants, chip, config.grid)

    rows = []
    for tenant, tiles, base, (search, opt) in zip(
            tenants, outcome.final.tiles_per_tenant, baseline, outcome.per_tenant):
        classic = processing_time(tenant, tiles * chip.arrays_per_tile, chip, power,
                                  CLASSIC_GRID, config.costs).best_time
        rows.append(TenantRow(
            name=tenant.name,
            tiles=tiles,
            baseline_cycles=base.cycles,
            baseline_seconds=base.seconds,
            baseline_energy_j=base.energy_joules,
            baseline_tiles_used=base.tiles_used,
            optimized_cycles=opt.cycles,
            optimized_seconds=opt.seconds,
            optimized_energy_j=opt.energy_joules,
            optimized_tiles_used=opt.tiles_used,
            chosen_alpha=str(search.best_params.alpha),
            chosen_beta=format_beta(search.best_params.beta),
            rounds=len(search.best_plan.rounds),
            classic_seconds_at_allocation=classic.seconds,
        ))

    b_energy = sum(r.baseline_energy_j for r in rows)
    o_latency = max(r.optimized_seconds for r in rows)
    o_energy = sum(r.optimized_energy_j for r in rows)
    totals = Totals(b_latency, o_latency, _ratio(b_latency, o_latency), b_energy, o_energy,
                    _ratio(b_energy, o_energy), _ratio(o_energy, b_energy))

    te_config = OptimizerConfig(config.eta, config.delay_budget_s, config.max_iterations,
                                CLASSIC_GRID, config.costs)
    te = allocate_area(workload, chip, power, te_config)
    op = evaluate_allocation(tenants, start, chip, power, config)
    ablations = {
        "tenant_level": _ablation(te.final.tiles_per_tenant, te.seconds,
                                  [p.energy_joules for _, p in te.per_tenant], b_latency,
                                  stop_reason=te.stop_reason),
        "operator_level": _ablation(start.tiles_per_tenant, [p.seconds for _, p in op],
                                    [p.energy_joules for _, p in op], b_latency),
    }

    return ComparisonReport(
        workload=workload.name,
        config=config_echo(chip, power, config, outcome.delay_budget_s),
        tenants=tuple(rows),
        totals=totals,
        ablations=ablations,
        allocation=outcome_dict(outcome, minimums),
        trace=trace_rows(outcome),
    )


def baseline_report(workload: MultiTenantWorkload, chip: ChipTopology, power: PowerModel,
                    config: OptimizerConfig = OptimizerConfig()) -> dict[str, Any]:
    results = baseline_deploy(workload, chip, power, config)
    return {
        "workload": workload.name,
        "config": config_echo(chip, power, config),
        "tenants": [
            {"name": t.name, "baseline_cycles": p.cycles, "baseline_seconds": p.seconds,
             "baseline_energy_j": p.energy_joules, "baseline_tiles_used": p.tiles_used}
            for t, p in zip(workload.tenants, results)
        ],
        "totals": {
            "baseline_latency_s": sum(p.seconds for p in results),
            "baseline_energy_j": sum(p.energy_joules for p in results),
        },
    }


def optimize_report(workload: MultiTenantWorkload, chip: ChipTopology, power: PowerModel,
                    config: OptimizerConfig = OptimizerConfig()) -> dict[str, Any]:
    outcome = allocate_area(workload, chip, power, config)
    _, minimums = starting_allocation(workload.tenants, chip, config.grid)
    tenants = []
    for t, tiles, (search, p) in zip(workload.tenants, outcome.final.tiles_per_tenant, outcome.per_tenant):
        tenants.append({
            "name": t.name, "tiles": tiles, "optimized_cycles": p.cycles,
            "optimized_seconds": p.seconds, "optimized_energy_j": p.energy_joules,
            "optimized_tiles_used": p.tiles_used, "chosen_alpha": str(search.best_params.alpha),
            "chosen_beta": format_beta(search.best_params.beta), "rounds": len(search.best_plan.rounds),
        })
    return {
        "workload": workload.name,
        "config": config_echo(chip, power, config, outcome.delay_budget_s),
        "tenants": tenants,
        "totals": {
            "optimized_latency_s": max(t["optimized_seconds"] for t in tenants),
            "optimized_energy_j": sum(t["optimized_energy_j"] for t in tenants),
        },
        "allocation": outcome_dict(outcome, minimums),
        "trace": list(trace_rows(outcome)),
    }


# --------------------------------------------------------------------------
# validation and emission

def _close(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=0.0) or a == b


def validate_report(doc: dict[str, Any]) -> None:
    """Recompute every derived field of a report document; raise on mismatch."""
    problems = []

    def check(name: str, stored: float, expected: float) -> None:
        if not _close(stored, expected):
            problems.append(f"{name}: stored {stored!r}, recomputed {expected!r}")

    tenants = doc.get("tenants") or []
    totals = doc.get("totals", {})
    cfg = doc.get("config", {})
    chip = cfg.get("chip", {})
    cycle_ns = chip.get("cycle_ns")
    tile_w = chip.get("tile_power_mw", 0) / 1000
    overhead_w = chip.get("chip_overhead_mw", 0) / 1000 if cfg.get("include_chip_overhead") else 0.0

    for i, t in enumerate(tenants):
        for phase in ("baseline", "optimized"):
            if f"{phase}_cycles" not in t:
                continue
            seconds = t[f"{phase}_cycles"] * cycle_ns * 1e-9
            check(f"tenants[{i}].{phase}_seconds", t[f"{phase}_seconds"], seconds)
            joules = t[f"{phase}_tiles_used"] * tile_w * seconds + overhead_w * seconds
            check(f"tenants[{i}].{phase}_energy_j", t[f"{phase}_energy_j"], joules)
        if "classic_seconds_at_allocation" in t and \
                t["optimized_seconds"] > t["classic_seconds_at_allocation"] * (1 + REL_TOL):
            problems.append(f"tenants[{i}]: optimized time exceeds classic time at its allocation")

    if tenants and "baseline_latency_s" in totals:
        check("totals.baseline_latency_s", totals["baseline_latency_s"],
              sum(t["baseline_seconds"] for t in tenants))
        check("totals.baseline_energy_j", totals["baseline_energy_j"],
              sum(t["baseline_energy_j"] for t in tenants))
    if tenants and "optimized_latency_s" in totals:
        check("totals.optimized_latency_s", totals["optimized_latency_s"],
              max(t["optimized_seconds"] for t in tenants))
        check("totals.optimized_energy_j", totals["optimized_energy_j"],
              sum(t["optimized_energy_j"] for t in tenants))
    if "overall_speedup" in totals:
        check("totals.overall_speedup", totals["overall_speedup"],
              _ratio(totals["baseline_latency_s"], totals["optimized_latency_s"]))
        check("totals.energy_ratio", totals["energy_ratio"],
              _ratio(totals["baseline_energy_j"], totals["optimized_energy_j"]))
        check("totals.energy_increase", totals["energy_increase"],
              _ratio(totals["optimized_energy_j"], totals["baseline_energy_j"]))
        if "tiles" in tenants[0]:
            total_tiles = sum(t["tiles"] for t in tenants)
            if total_tiles != chip.get("tiles"):
                problems.append(f"allocated {total_tiles} tiles on a {chip.get('tiles')}-tile chip")
    for name, ab in (doc.get("ablations") or {}).items():
        check(f"ablations.{name}.latency_s", ab["latency_s"], max(ab["seconds"]))
        check(f"ablations.{name}.speedup", ab["speedup"],
              _ratio(totals["baseline_latency_s"], ab["latency_s"]))
    alloc = doc.get("allocation")
    if alloc is not None:
        if alloc.get("stop_reason") not in STOP_REASONS:
            problems.append(f"unknown stop reason {alloc.get('stop_reason')!r}")
        if tenants and "optimized_seconds" in tenants[0]:
            secs = [t["optimized_seconds"] for t in tenants]
            check("allocation.delay_s", alloc["delay_s"], max(secs) - min(secs))
    if problems:
        raise ReportInvariantError("; ".join(problems))


def to_json(doc: dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def to_csv(doc: dict[str, Any]) -> str:
    """One row per tenant plus a totals row; list-valued cells are dropped."""
    tenants = doc.get("tenants", [])
    columns: list[str] = []
    for t in tenants:
        columns += [k for k, v in t.items() if k not in columns and not isinstance(v, (list, dict))]
    totals = {k: v for k, v in doc.get("totals", {}).items() if not isinstance(v, (list, dict))}
    header = ["row"] + columns + [k for k in totals if k not in columns]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for t in tenants:
        writer.writerow(["tenant"] + [t.get(c, "") for c in header[1:]])
    writer.writerow(["totals"] + [totals.get(c, "") for c in header[1:]])
    return buf.getvalue()


def trace_csv(doc: dict[str, Any]) -> str:
    """Per-iteration tenant times and delay for external plotting."""
    names = [t["name"] for t in doc.get("tenants", [])]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration"] + [f"{n}_tiles" for n in names] + [f"{n}_seconds" for n in names] + ["delay_s"])
    for row in doc.get("trace", []):
        writer.writerow([row["iteration"], *row["tiles"], *row["seconds"], row["delay_s"]])
    return buf.getvalue()


def profile_report(workload: MultiTenantWorkload, chip: ChipTopology, power: PowerModel,
                   config: OptimizerConfig = OptimizerConfig()) -> dict[str, Any]:
    """Per-operator classic profile of every tenant on the whole chip."""
    baseline = baseline_deploy(workload, chip, power, config)
    tenants = []
    for tenant, result in zip(workload.tenants, baseline):
        operators = []
        for i, (layer, shape) in enumerate(zip(tenant.flat_layers, tenant.shapes)):
            if layer.kind == "pool":
                continue
            dup = classic_duplication(tenant, i)
            fp = footprint(layer, chip)
            cycles = operator_cycles(layer, (shape.out_height, shape.out_width), dup)
            operators.append({
                "layer": i, "kind": layer.kind, "rows": fp.rows, "cols": fp.cols,
                "arrays": fp.arrays, "duplication": dup, "compute_cycles": cycles,
                "latency_cycles": eval_latency(ProfiledOperator(cycles, config.costs.calc_bits, dup)),
            })
        tenants.append({
            "name": tenant.name, "baseline_cycles": result.cycles, "baseline_seconds": result.seconds,
            "baseline_energy_j": result.energy_joules, "baseline_tiles_used": result.tiles_used,
            "operators": operators,
        })
    return {"workload": workload.name, "config": config_echo(chip, power, config), "tenants": tenants,
            "totals": {"baseline_latency_s": sum(p.seconds for p in baseline),
                       "baseline_energy_j": sum(p.energy_joules for p in baseline)}}
