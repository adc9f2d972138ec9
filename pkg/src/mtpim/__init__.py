"""Joint tenant/operator deployment of multi-tenant DNNs on ReRAM crossbar chips."""

from .allocator import Allocation, AllocationOutcome, OptimizerConfig, allocate_area, initial_allocation, iter_allocation
from .errors import (
    ChannelMismatchError,
    InfeasibleAreaError,
    InfeasibleBetaError,
    InfeasibleError,
    PimError,
    ReportInvariantError,
    UnknownPresetError,
    WorkloadError,
)
from .hardware import ChipTopology, PowerModel, chip_preset, total_arrays
from .mapping import DeploymentPlan, Footprint, ReOperator, footprint, naive_deploy, tiles_spanned
from .profiler import CostParams, ProfiledOperator, ProfileResult, classic_duplication, energy, eval_latency, operator_cycles, profile_tenant
from .reconstruct import CLASSIC, DEFAULT_GRID, Grid, GridSearchResult, ReconstructionParams, duplicate, processing_time, split
from .report import ComparisonReport, baseline_deploy, compare, validate_report
from .workload import LayerSpec, MultiTenantWorkload, TenantSpec, load_bundle, load_preset, parse_workload

__version__ = "0.1.0"
