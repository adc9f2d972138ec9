"""Command-line entry point.

Exit codes: 0 success, 1 infeasible workload or area, 2 configuration or
workload parse error, 3 report invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import tomli

from .allocator import OptimizerConfig
from .errors import InfeasibleError, ReportInvariantError, WorkloadError
from .hardware import CHIP_PRESETS, ChipTopology, PowerModel, chip_from_table, chip_preset
from .profiler import CostParams
from .reconstruct import DEFAULT_GRID, Grid
from .report import (
    baseline_report,
    compare,
    optimize_report,
    profile_report,
    to_csv,
    to_json,
    trace_csv,
    validate_report,
)
from .workload import BUNDLES, PRESETS, WorkloadDocument, load_bundle, load_preset, parse_document

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2, 3

log = logging.getLogger("mtpim")


def _split_list(text: str) -> list[str]:
    return [tok for tok in text.replace(",", " ").split() if tok]


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number or fraction: {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--workload", metavar="PATH", help="TOML workload document")
    src.add_argument("--bundle", metavar="NAME", help=f"built-in bundle ({', '.join(BUNDLES)})")
    p.add_argument("--chip", metavar="NAME|PATH",
                   help="chip preset (chip1, chip2) or a TOML file with a [chip] table; "
                        "default: the workload's [chip] section, else chip1")
    alphas = " ".join(str(a) for a in DEFAULT_GRID.alphas)
    betas = " ".join("inf" if b == float("inf") else str(b) for b in DEFAULT_GRID.betas)
    p.add_argument("--eta", type=_fraction, help="fraction of chip tiles moved per iteration "
                   "(default: 1/tiles, i.e. one tile)")
    p.add_argument("--delay-budget", type=float, metavar="SECONDS",
                   help="acceptable spread between tenant times (default: 5%% of the fastest "
                        "tenant's time at the equal split)")
    p.add_argument("--max-iters", type=int, help="iteration cap for the allocator (default: 1000)")
    p.add_argument("--alpha-grid", metavar="LIST", help=f"duplicate factors, e.g. '1/4,1/2,1' (default: {alphas})")
    p.add_argument("--beta-grid", metavar="LIST", help=f"split limits in arrays, 'inf' allowed (default: {betas})")
    p.add_argument("--write-cycles-per-row", type=int, help="cycles to program one crossbar row (default: 1)")
    p.add_argument("--include-chip-overhead", action="store_true", default=None,
                   help="charge chip-level overhead power during a tenant's busy time")
    p.add_argument("--out", metavar="PATH", help="write the machine-readable report here")
    p.add_argument("--format", choices=("json", "csv", "both"), default="json",
                   help="report format (default: json)")
    p.add_argument("--trace-out", metavar="PATH", help="per-iteration plot data CSV (optimize/compare)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtpim", description="Multi-tenant DNN deployment on ReRAM PIM chips")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("profile", "per-operator classic profile of each tenant on the whole chip"),
        ("baseline", "sequential whole-chip classic deployment"),
        ("optimize", "iterative tenant partitioning with operator reconstruction"),
        ("compare", "baseline vs optimized, with tenant-only and operator-only ablations"),
    ):
        _add_common(sub.add_parser(name, help=help_text, description=help_text))
    sub.add_parser("presets", help="list built-in networks, bundles and chips")
    return parser


def _resolve_chip(arg: str | None, doc: WorkloadDocument | None) -> tuple[ChipTopology, PowerModel]:
    if arg is None:
        if doc is not None and doc.chip is not None:
            return chip_from_table(doc.chip)
        return chip_preset("chip1")
    path = Path(arg)
    if path.suffix == ".toml" or path.exists():
        try:
            data = tomli.loads(path.read_text())
        except OSError as exc:
            raise WorkloadError(f"cannot read chip file: {exc}") from None
        except tomli.TOMLDecodeError as exc:
            raise WorkloadError(f"chip file syntax error: {exc}") from None
        return chip_from_table(data.get("chip", data))
    return chip_preset(arg)


def _config(args: argparse.Namespace, file_opts: dict[str, Any]) -> OptimizerConfig:
    known = {"eta", "delay_budget", "max_iters", "alpha_grid", "beta_grid",
             "write_cycles_per_row", "include_chip_overhead", "calc_bits"}
    unknown = set(file_opts) - known
    if unknown:
        raise WorkloadError(f"unknown optimizer keys: {', '.join(sorted(unknown))}", field="optimizer")

    def pick(flag: Any, key: str, default: Any) -> Any:
        if flag is not None:
            return flag
        return file_opts.get(key, default)

    try:
        alphas = _split_list(args.alpha_grid) if args.alpha_grid else file_opts.get("alpha_grid")
        betas = _split_list(args.beta_grid) if args.beta_grid else file_opts.get("beta_grid")
        grid = DEFAULT_GRID
        if alphas is not None or betas is not None:
            grid = Grid.of([str(a) for a in alphas] if alphas is not None else DEFAULT_GRID.alphas,
                           betas if betas is not None else DEFAULT_GRID.betas)
        eta = pick(args.eta, "eta", None)
        if isinstance(eta, str):
            eta = Fraction(eta)
        costs = CostParams(
            calc_bits=int(file_opts.get("calc_bits", 16)),
            write_cycles_per_row=int(pick(args.write_cycles_per_row, "write_cycles_per_row", 1)),
            include_chip_overhead=bool(pick(args.include_chip_overhead, "include_chip_overhead", False)),
        )
        budget = pick(args.delay_budget, "delay_budget", None)
        return OptimizerConfig(
            eta=eta,
            delay_budget_s=float(budget) if budget is not None else None,
            max_iterations=int(pick(args.max_iters, "max_iters", 1000)),
            grid=grid,
            costs=costs,
        )
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise WorkloadError(f"invalid optimizer setting: {exc}") from None


def _print_presets() -> None:
    print("networks:")
    for name in PRESETS:
        t = load_preset(name)
        h, w, c = t.input_height, t.input_width, t.input_channels
        print(f"  {name:6s} input {h}x{w}x{c}  conv={t.count('conv')} pool={t.count('pool')} fc={t.count('fc')}")
    print("bundles:")
    for name, members in BUNDLES.items():
        print(f"  {name}: {' + '.join(members)}")
    print("chips:")
    for name, chip in CHIP_PRESETS.items():
        print(f"  {name} ({chip.label}): {chip.total_arrays} arrays")


def _summarize(command: str, doc: dict[str, Any]) -> None:
    chip = doc["config"]["chip"]
    print(f"{command} {doc['workload']} on {chip['name']} ({chip['tiles']} tiles)")
    for t in doc["tenants"]:
        parts = [f"  {t['name']:10s}"]
        if "tiles" in t:
            parts.append(f"tiles={t['tiles']:4d}")
        if "baseline_seconds" in t:
            parts.append(f"baseline={t['baseline_seconds'] * 1e3:10.3f} ms")
        if "optimized_seconds" in t:
            parts.append(f"optimized={t['optimized_seconds'] * 1e3:10.3f} ms")
            parts.append(f"alpha={t['chosen_alpha']} beta={t['chosen_beta']}")
        print(" ".join(parts))
    totals = doc["totals"]
    for key, value in totals.items():
        print(f"  {key}: {value:.6g}")
    if "allocation" in doc:
        a = doc["allocation"]
        print(f"  allocator: {a['stop_reason']} after {a['iterations']} iterations")
    for name, ab in (doc.get("ablations") or {}).items():
        print(f"  {name} only: speedup {ab['speedup']:.4g}")


def _emit(doc: dict[str, Any], out: str | None, fmt: str, trace_out: str | None) -> None:
    if out:
        path = Path(out)
        if fmt in ("json", "both"):
            target = path if fmt == "json" else path.with_suffix(".json")
            target.write_text(to_json(doc))
        if fmt in ("csv", "both"):
            target = path if fmt == "csv" else path.with_suffix(".csv")
            target.write_text(to_csv(doc))
    if trace_out and "trace" in doc:
        Path(trace_out).write_text(trace_csv(doc))


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        _print_presets()
        return EXIT_OK
    try:
        doc = None
        if args.workload:
            try:
                text = Path(args.workload).read_text()
            except OSError as exc:
                raise WorkloadError(f"cannot read workload: {exc}") from None
            doc = parse_document(text)
            workload = doc.workload
        else:
            workload = load_bundle(args.bundle)
        chip, power = _resolve_chip(args.chip, doc)
        config = _config(args, dict(doc.optimizer) if doc else {})
    except WorkloadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    log.debug("running %s on %s with %d tenants", args.command, chip.name, len(workload.tenants))
    try:
        if args.command == "profile":
            report = profile_report(workload, chip, power, config)
        elif args.command == "baseline":
            report = baseline_report(workload, chip, power, config)
        elif args.command == "optimize":
            report = optimize_report(workload, chip, power, config)
        else:
            report = compare(workload, chip, power, config).to_dict()
        validate_report(report)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ReportInvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT

    _summarize(args.command, report)
    try:
        _emit(report, args.out, args.format, args.trace_out)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
