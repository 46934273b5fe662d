"""Energy-efficient peer-to-peer computation offloading.

The library builds feasibility tunnels from helper CPU idling profiles,
pulls taut strings through them to get minimum-energy transmission
schedules, optimizes the local/offload split, and wraps everything in a
reproducible Monte Carlo harness.
"""
from .cpu_profile import (
    ArrivalProcess,
    CpuIdlingProfile,
    Epoch,
    MergedTimeline,
    build_profile,
    format_arrivals,
    format_epochs,
    merge_events,
    parse_arrivals,
    parse_epochs,
    sample_arrivals,
    sample_cpu_process,
)
from .energy import (
    ChannelParams,
    LocalComputeParams,
    db_to_linear,
    dbm_to_watts,
    rate_table,
    schedule_energy,
)
from .errors import ConfigError, InfeasibleError, NumericError, OffloadSimError
from .partition import (
    PartitionResult,
    RatioResult,
    minimal_offload_is_best,
    offload_energy_slope,
    optimize_partition,
    optimize_ratio,
    partition_bounds,
    replay_local_computing,
)
from .sim_harness import (
    SimConfig,
    SweepResult,
    find_crossover,
    format_csv,
    run_buffer_sweep,
    run_bursty_sweep,
    run_oneshot_sweep,
    wilson_interval,
    write_csv,
)
from .string_pull import (
    BufferTrace,
    OffloadSchedule,
    OptimalityReport,
    bursty_offload_energy,
    convex_reference_schedule,
    floor_following_schedule,
    format_schedule,
    min_energy_offload,
    min_energy_offload_bursty,
    offload_energy,
    parse_schedule,
    pull_string,
    simulate_buffer,
    verify_optimality,
)
from .tunnel import (
    FeasibilityTunnel,
    bursty_effective_tunnel,
    bursty_tunnel,
    effective_tunnel,
    format_tunnel,
    full_utilization_tunnel,
    lazy_first_tunnel,
    local_compute_tunnel,
    max_offload_ratio,
    min_offload_ratio,
    proportional_tunnel,
)

__version__ = "0.1.0"

__all__ = [
    "ArrivalProcess",
    "BufferTrace",
    "ChannelParams",
    "ConfigError",
    "CpuIdlingProfile",
    "Epoch",
    "FeasibilityTunnel",
    "InfeasibleError",
    "LocalComputeParams",
    "MergedTimeline",
    "NumericError",
    "OffloadSchedule",
    "OffloadSimError",
    "OptimalityReport",
    "PartitionResult",
    "RatioResult",
    "SimConfig",
    "SweepResult",
    "build_profile",
    "bursty_effective_tunnel",
    "bursty_offload_energy",
    "bursty_tunnel",
    "convex_reference_schedule",
    "db_to_linear",
    "dbm_to_watts",
    "effective_tunnel",
    "find_crossover",
    "floor_following_schedule",
    "format_arrivals",
    "format_csv",
    "format_epochs",
    "format_schedule",
    "format_tunnel",
    "full_utilization_tunnel",
    "lazy_first_tunnel",
    "local_compute_tunnel",
    "max_offload_ratio",
    "merge_events",
    "min_energy_offload",
    "min_energy_offload_bursty",
    "min_offload_ratio",
    "minimal_offload_is_best",
    "offload_energy",
    "offload_energy_slope",
    "optimize_partition",
    "optimize_ratio",
    "parse_arrivals",
    "parse_epochs",
    "parse_schedule",
    "partition_bounds",
    "proportional_tunnel",
    "pull_string",
    "rate_table",
    "replay_local_computing",
    "run_buffer_sweep",
    "run_bursty_sweep",
    "run_oneshot_sweep",
    "sample_arrivals",
    "sample_cpu_process",
    "schedule_energy",
    "simulate_buffer",
    "verify_optimality",
    "wilson_interval",
    "write_csv",
]
