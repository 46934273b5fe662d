"""Splitting work between local computing and offloading.

For a one-shot load the only coupling between the two sides is the split
size, and both sides are convex in it: local energy is linear in the kept
bits, transfer energy is convex in the offloaded bits (tunnels scale into
each other under convex combinations of the split). Golden-section search on
the sum therefore finds the global optimum whenever the buffer covers every
candidate transfer; small buffers switch tunnel families mid-interval and get
a coarse bracketing scan first. A closed-form marginal test handles the
common case where offloading more than strictly necessary can never pay off,
skipping the search entirely.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .cpu_profile import ArrivalProcess, CpuIdlingProfile, MergedTimeline, merge_events
from .energy import ChannelParams, LocalComputeParams
from .errors import InfeasibleError
from .string_pull import (
    OffloadSchedule,
    bursty_offload_energy,
    min_energy_offload,
    min_energy_offload_bursty,
    offload_energy,
)
from .tunnel import FeasibilityTunnel, bits_tol, max_offload_ratio, min_offload_ratio

_INVPHI = (sqrt(5.0) - 1.0) / 2.0


def golden_section(fn, lo: float, hi: float, tol: float, max_iter: int = 200):
    """Minimize a unimodal function on [lo, hi]; returns (x, fn(x)).

    Endpoints are always evaluated, so a minimum sitting on the boundary is
    found exactly even when the interior probes cannot see it.
    """
    if hi < lo:
        raise ValueError("need lo <= hi")
    best = [lo, np.inf]

    def ev(x):
        f = fn(x)
        if f < best[1]:
            best[0], best[1] = x, f
        return f

    ev(lo)
    ev(hi)
    if hi - lo <= tol:
        return best[0], best[1]
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = ev(c), ev(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = ev(d)
    return best[0], best[1]


def scan_minimize(fn, lo: float, hi: float, coarse: int = 17, tol: float = 1.0):
    """Coarse grid scan followed by golden refinement around the best cell.

    For objectives that are cheap but not certified unimodal.
    """
    if hi <= lo + tol:
        x, f = golden_section(fn, lo, hi, tol)
        return x, f
    xs = np.linspace(lo, hi, coarse)
    fs = [fn(x) for x in xs]
    k = int(np.argmin(fs))
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, coarse - 1)]
    x, f = golden_section(fn, a, b, tol)
    if fs[k] < f:
        return float(xs[k]), fs[k]
    return x, f


def partition_bounds(profile: CpuIdlingProfile, local: LocalComputeParams, load_bits: float):
    """Feasible offload sizes: at least what the local CPU cannot finish,
    at most what the helper can compute and never more than the load."""
    low = local.min_offload(load_bits, profile.horizon)
    high = min(profile.capacity, load_bits)
    return low, high


@dataclass(frozen=True)
class PartitionResult:
    offload_bits: float
    local_bits: float
    energy: float
    offload_energy: float
    local_energy: float
    schedule: OffloadSchedule
    tunnel: FeasibilityTunnel
    method: str  # "pinned", "shortcut", or "search"


def minimal_offload_is_best(
    profile: CpuIdlingProfile,
    channel: ChannelParams,
    local: LocalComputeParams,
    load_bits: float,
) -> bool:
    """Marginal test: if transmitting at the forced transfer's average rate
    already costs at least as much per bit as computing locally, then any
    extra offloaded bit costs more than it saves, and the smallest feasible
    transfer is optimal.

    Sound because transfer energy is convex in the transfer size and zero at
    zero, so its slope is at least the average energy per bit of the straight
    transfer, at every size above the forced minimum.
    """
    t_end = profile.idle_end
    if t_end is None:
        return True
    low, _ = partition_bounds(profile, local, load_bits)
    return channel.energy_per_bit(low / t_end) >= local.bit_energy


def optimize_partition(
    profile: CpuIdlingProfile,
    channel: ChannelParams,
    local: LocalComputeParams,
    load_bits: float,
    buffer_bits=np.inf,
    use_shortcut: bool = True,
) -> PartitionResult:
    """Minimum-energy split of a one-shot load between local CPU and helper."""
    if load_bits < 0:
        raise ValueError("load_bits must be nonnegative")
    low, high = partition_bounds(profile, local, load_bits)
    tol = bits_tol(max(load_bits, 1.0))
    if low > high + tol:
        raise InfeasibleError(
            f"load of {load_bits} bits cannot be finished by the deadline",
            deficit=low - high,
        )
    high = max(high, low)
    if high - low <= 1.0:
        best, method = low, "pinned"
    elif use_shortcut and minimal_offload_is_best(profile, channel, local, load_bits):
        best, method = low, "shortcut"
    else:
        def objective(l):
            return local.local_energy(load_bits - l) + offload_energy(
                profile, l, buffer_bits, channel
            )

        if buffer_bits >= high:
            best, _ = golden_section(objective, low, high, tol=1.0)
        else:
            # the solver switches tunnel families at l = buffer size, which can
            # dent unimodality, so bracket with a coarse scan first
            best, _ = scan_minimize(objective, low, high, tol=1.0)
        method = "search"
    schedule, tunnel = min_energy_offload(profile, best, buffer_bits)
    e_off = schedule.energy(channel)
    e_loc = local.local_energy(load_bits - best)
    return PartitionResult(
        offload_bits=float(best),
        local_bits=float(load_bits - best),
        energy=e_off + e_loc,
        offload_energy=e_off,
        local_energy=e_loc,
        schedule=schedule,
        tunnel=tunnel,
        method=method,
    )


def offload_energy_slope(
    profile: CpuIdlingProfile,
    offload_bits: float,
    buffer_bits,
    channel: ChannelParams,
    delta: float | None = None,
) -> float:
    """Central-difference slope of the optimal transfer energy in the size."""
    if delta is None:
        delta = max(1.0, 1e-6 * offload_bits)
    lo = max(offload_bits - delta, 0.0)
    hi = min(offload_bits + delta, profile.capacity)
    if hi <= lo:
        raise ValueError("no room to difference the transfer energy")
    e_lo = offload_energy(profile, lo, buffer_bits, channel)
    e_hi = offload_energy(profile, hi, buffer_bits, channel)
    return (e_hi - e_lo) / (hi - lo)


@dataclass(frozen=True)
class RatioResult:
    ratio: float
    ratio_low: float
    ratio_high: float
    offload_bits: float
    local_bits: float
    energy: float
    offload_energy: float
    local_energy: float
    schedule: OffloadSchedule
    tunnel: FeasibilityTunnel | None


def optimize_ratio(
    profile: CpuIdlingProfile,
    arrivals: ArrivalProcess,
    channel: ChannelParams,
    local: LocalComputeParams,
    timeline: MergedTimeline | None = None,
    tol: float = 1e-6,
) -> RatioResult:
    """Minimum-energy per-chunk offload share for chunked arrivals.

    The share must be small enough for the helper's remaining capacity and
    large enough for the local CPU's remaining time; within those bounds the
    total energy is convex in the share.
    """
    tl = timeline if timeline is not None else merge_events(profile, arrivals)
    total = arrivals.total
    r_hi = max_offload_ratio(profile, arrivals, tl)
    r_lo = min_offload_ratio(arrivals, local)
    if total <= 0.0:
        schedule = OffloadSchedule(np.array([0.0, profile.horizon]), np.zeros(2))
        return RatioResult(0.0, r_lo, r_hi, 0.0, 0.0, 0.0, 0.0, 0.0, schedule, None)
    if r_lo > r_hi + 1e-12:
        raise InfeasibleError(
            f"no offload share fits: local side needs at least {r_lo:.6g}, "
            f"helper can absorb at most {r_hi:.6g}",
            deficit=(r_lo - r_hi) * total,
        )

    def objective(r):
        return local.local_energy((1.0 - r) * total) + bursty_offload_energy(
            profile, arrivals, r, channel, tl
        )

    best, _ = golden_section(objective, r_lo, min(r_hi, 1.0), tol=tol)
    schedule, tunnel = min_energy_offload_bursty(profile, arrivals, best, tl)
    e_off = schedule.energy(channel)
    e_loc = local.local_energy((1.0 - best) * total)
    return RatioResult(
        ratio=float(best),
        ratio_low=float(r_lo),
        ratio_high=float(min(r_hi, 1.0)),
        offload_bits=float(best * total),
        local_bits=float((1.0 - best) * total),
        energy=e_off + e_loc,
        offload_energy=e_off,
        local_energy=e_loc,
        schedule=schedule,
        tunnel=tunnel,
    )


@dataclass(frozen=True)
class LocalTrace:
    """Backlog of the user's own computing right after each arrival."""

    times: np.ndarray
    backlog: np.ndarray
    completed: bool


def replay_local_computing(arrivals: ArrivalProcess, local: LocalComputeParams, ratio: float) -> LocalTrace:
    """Greedy replay of computing the kept share of each chunk locally."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"offload ratio must be in [0, 1], got {ratio}")
    share = 1.0 - ratio
    rate = local.cpu_hz / local.cycles_per_bit
    backlog = np.empty(len(arrivals.times))
    b = 0.0
    prev_t = 0.0
    for k, (t, s) in enumerate(zip(arrivals.times, arrivals.sizes)):
        b = max(0.0, b - rate * (t - prev_t)) + share * s
        backlog[k] = b
        prev_t = t
    completed = b <= bits_tol(share * max(arrivals.total, 1.0))
    return LocalTrace(arrivals.times.copy(), backlog, completed)
