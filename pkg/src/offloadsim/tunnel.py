"""Feasibility tunnels for cumulative transmission curves.

A tunnel is a pair of piecewise-linear envelopes (floor, ceiling) over a
shared vertex grid. Any nondecreasing cumulative-bits curve that stays inside
the tunnel and ends at ``total`` is a schedule the helper can actually serve:
the floor encodes "transmit early enough that the helper never runs out of
work it still needs to finish", the ceiling encodes "never send data the
receive buffer cannot hold or that has not arrived yet".

All envelope breakpoints are materialized as vertices (capacity-curve kinks,
buffer-cap crossings, arrival instants), so checking a piecewise-linear curve
at the vertices alone is exact. Step-shaped availability ceilings are stored
by their left limits, which is the binding value for a continuous curve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpu_profile import (
    TIME_ATOL,
    ArrivalProcess,
    CpuIdlingProfile,
    MergedTimeline,
    merge_events,
)
from .errors import InfeasibleError

BITS_RTOL = 1e-9
BITS_ATOL = 1e-6


def bits_tol(scale: float) -> float:
    """Comparison tolerance for bit quantities of the given magnitude."""
    return max(BITS_ATOL, BITS_RTOL * abs(scale))


@dataclass(frozen=True, eq=False)
class FeasibilityTunnel:
    """Vertex grid plus envelopes and the bookkeeping verify checks need.

    ``cum_capacity`` is the helper-side computing-capacity curve the tunnel
    was built against (the scaled one for proportional tunnels);
    ``arrival_bits[v]`` is data arriving exactly at vertex v (zero for
    one-shot tunnels); ``cpu_flip[v]`` is +1 where the serving CPU turns
    idle, -1 where it turns busy; ``interval_idle[i]`` is its state on
    interval i. ``buffer_bits`` is the receive buffer size (may be inf).
    """

    kind: str
    times: np.ndarray
    floor: np.ndarray
    ceiling: np.ndarray
    total: float
    cum_capacity: np.ndarray
    arrival_bits: np.ndarray
    interval_idle: np.ndarray
    cpu_flip: np.ndarray
    buffer_bits: float

    def __post_init__(self):
        n = len(self.times)
        if n < 2:
            raise ValueError("tunnel needs at least two vertices")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("tunnel vertex times must be strictly increasing")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def deficit(self) -> float:
        """Largest floor-over-ceiling excess; positive means infeasible."""
        gap = float(np.max(self.floor - self.ceiling))
        end = abs(float(self.floor[-1]) - self.total)
        return max(gap, end - bits_tol(self.total))

    def is_feasible(self, tol: float | None = None) -> bool:
        tol = bits_tol(self.total) if tol is None else tol
        if np.any(self.floor > self.ceiling + tol):
            return False
        if self.floor[0] > tol or self.ceiling[0] > tol:
            return False
        return (
            abs(float(self.floor[-1]) - self.total) <= tol
            and abs(float(self.ceiling[-1]) - self.total) <= tol
        )


def _time_at_capacity(boundaries, cum_bits, idle_rate, level: float) -> float:
    """Earliest time at which the capacity curve reaches ``level``."""
    if level <= 0.0:
        return 0.0
    if level > cum_bits[-1]:
        raise ValueError("capacity level beyond the curve")
    k = int(np.searchsorted(cum_bits, level, side="left"))
    return float(boundaries[k - 1] + (level - cum_bits[k - 1]) / idle_rate) if k > 0 else 0.0


def time_at_capacity(profile: CpuIdlingProfile, level: float) -> float:
    return _time_at_capacity(profile.boundaries, profile.cum_bits, profile.idle_rate, level)


def _insert_time(times: list[float], t: float):
    """Insert t into a sorted time list unless an existing entry is within tolerance."""
    i = int(np.searchsorted(times, t))
    near_left = i > 0 and t - times[i - 1] <= TIME_ATOL
    near_right = i < len(times) and times[i] - t <= TIME_ATOL
    if not near_left and not near_right:
        times.insert(i, t)


def _profile_vertices(profile: CpuIdlingProfile, levels) -> np.ndarray:
    """Profile boundaries up to the last idle instant, plus capacity-level crossings."""
    t_end = profile.idle_end
    if t_end is None:
        raise InfeasibleError("helper CPU is never idle, nothing can be offloaded")
    times = [float(b) for b in profile.boundaries if b <= t_end + TIME_ATOL]
    times[-1] = t_end
    for level in levels:
        if 0.0 < level < profile.capacity:
            _insert_time(times, time_at_capacity(profile, level))
    return np.asarray(times)


def _interval_state(profile: CpuIdlingProfile, times: np.ndarray):
    mids = 0.5 * (times[:-1] + times[1:])
    k = np.clip(np.searchsorted(profile.boundaries, mids, side="right") - 1, 0, len(profile.epochs) - 1)
    idle = np.array([profile.epochs[i].idle for i in k])
    flips = np.zeros(len(times), dtype=int)
    change = idle[1:].astype(int) - idle[:-1].astype(int)
    flips[1:-1] = change
    return idle, flips


def _oneshot_parts(profile: CpuIdlingProfile, levels):
    times = _profile_vertices(profile, levels)
    cum = np.array([profile.capacity_at(t) for t in times])
    idle, flips = _interval_state(profile, times)
    return times, cum, idle, flips


def full_utilization_tunnel(profile: CpuIdlingProfile, buffer_bits=np.inf) -> FeasibilityTunnel:
    """Tunnel for offloading exactly the helper's whole spare capacity.

    The helper must never starve, so the floor is the capacity curve itself;
    the ceiling adds the receive-buffer headroom, capped by the transfer size.
    """
    if buffer_bits < 0:
        raise ValueError("buffer_bits must be nonnegative")
    total = profile.capacity
    cap_level = total - buffer_bits  # above this capacity level the ceiling is flat
    times, cum, idle, flips = _oneshot_parts(profile, [cap_level])
    floor = cum.copy()
    ceiling = np.minimum(cum + buffer_bits, total)
    ceiling[0] = 0.0
    floor[-1] = total
    ceiling[-1] = total
    return FeasibilityTunnel(
        "full", times, floor, ceiling, total, cum,
        np.zeros_like(cum), idle, flips, float(buffer_bits),
    )


def effective_tunnel(profile: CpuIdlingProfile, offload_bits: float, buffer_bits=np.inf) -> FeasibilityTunnel:
    """Tunnel for a transfer smaller than capacity, buffer at least as large.

    The helper may stay idle for ``capacity - offload_bits`` worth of cycles,
    so the floor is the capacity curve shifted down by that slack and clamped.
    """
    total = float(offload_bits)
    tol = bits_tol(max(total, profile.capacity))
    if total > profile.capacity + tol:
        raise InfeasibleError(
            f"transfer of {total} bits exceeds helper capacity {profile.capacity}",
            deficit=total - profile.capacity,
        )
    if buffer_bits < total - tol:
        raise ValueError("effective tunnel assumes the buffer holds the whole transfer")
    slack = profile.capacity - total
    times, cum, idle, flips = _oneshot_parts(profile, [slack])
    floor = np.maximum(cum - slack, 0.0)
    ceiling = np.full_like(cum, total)
    ceiling[0] = 0.0
    floor[-1] = total
    return FeasibilityTunnel(
        "effective", times, floor, ceiling, total, cum,
        np.zeros_like(cum), idle, flips, float(buffer_bits),
    )


def proportional_tunnel(profile: CpuIdlingProfile, offload_bits: float, buffer_bits) -> FeasibilityTunnel:
    """Small-buffer tunnel: the helper computes at a proportionally derated pace.

    Scaling the idle rate by ``offload_bits / capacity`` and requiring full
    utilization of the scaled curve keeps the buffer constraint honest for
    buffers smaller than the transfer.
    """
    total = float(offload_bits)
    tol = bits_tol(max(total, profile.capacity))
    if total > profile.capacity + tol:
        raise InfeasibleError(
            f"transfer of {total} bits exceeds helper capacity {profile.capacity}",
            deficit=total - profile.capacity,
        )
    scaled = profile.scaled(min(total / profile.capacity, 1.0))
    base = full_utilization_tunnel(scaled, buffer_bits)
    return FeasibilityTunnel(
        "proportional", base.times, base.floor, base.ceiling, base.total,
        base.cum_capacity, base.arrival_bits, base.interval_idle, base.cpu_flip,
        base.buffer_bits,
    )


def lazy_first_tunnel(profile: CpuIdlingProfile, offload_bits: float, buffer_bits) -> FeasibilityTunnel:
    """Tunnel for the policy that lets the helper compute as late as possible.

    The helper's computing curve is pinned to the latest feasible one (the
    effective floor), and the buffer constraint is taken relative to it.
    """
    total = float(offload_bits)
    tol = bits_tol(max(total, profile.capacity))
    if total > profile.capacity + tol:
        raise InfeasibleError(
            f"transfer of {total} bits exceeds helper capacity {profile.capacity}",
            deficit=total - profile.capacity,
        )
    if buffer_bits < 0:
        raise ValueError("buffer_bits must be nonnegative")
    slack = profile.capacity - total
    times, cum, idle, flips = _oneshot_parts(profile, [slack, profile.capacity - buffer_bits])
    floor = np.maximum(cum - slack, 0.0)
    floor[-1] = total
    ceiling = np.minimum(floor + buffer_bits, total)
    ceiling[0] = 0.0
    ceiling[-1] = total
    return FeasibilityTunnel(
        "lazy", times, floor, ceiling, total, cum,
        np.zeros_like(cum), idle, flips, float(buffer_bits),
    )


def _merged_parts(profile, arrivals, timeline, extra_levels):
    tl = timeline if timeline is not None else merge_events(profile, arrivals)
    if tl.idle_end_index is None:
        raise InfeasibleError("helper CPU is never idle, nothing can be offloaded")
    k_end = tl.idle_end_index
    late = float(tl.arrival_bits[k_end:].sum())
    times = [float(t) for t in tl.times[: k_end + 1]]
    bits = list(tl.arrival_bits[: k_end + 1])
    bits[-1] = 0.0  # data arriving at the last idle instant cannot be served
    for level in extra_levels:
        if 0.0 < level < profile.capacity:
            t_star = time_at_capacity(profile, level)
            before = len(times)
            _insert_time(times, t_star)
            if len(times) > before:
                bits.insert(times.index(t_star), 0.0)
    times = np.asarray(times)
    bits = np.asarray(bits)
    cum = np.array([profile.capacity_at(t) for t in times])
    idle, flips = _interval_state(profile, times)
    return times, bits, cum, idle, flips, late


def bursty_effective_tunnel(
    profile: CpuIdlingProfile,
    arrivals: ArrivalProcess,
    ratio: float,
    timeline: MergedTimeline | None = None,
) -> FeasibilityTunnel:
    """Tunnel for offloading a fixed share of each arriving data chunk.

    The floor is the capacity curve minus the helper's total slack, clamped at
    zero; the ceiling is the offloaded share of data that has already arrived.
    Chunks arriving at or after the last idle instant make every positive
    share infeasible, which shows up as a floor/ceiling conflict, not an error.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"offload ratio must be in [0, 1], got {ratio}")
    times, bits, cum, idle, flips, late = _merged_parts(profile, arrivals, timeline, [])
    served = float(bits.sum())
    total = ratio * served
    slack = profile.capacity - total
    if slack > 0.0:
        times, bits, cum, idle, flips, late = _merged_parts(profile, arrivals, timeline, [slack])
    floor = np.maximum(cum - slack, 0.0)
    if slack >= 0.0:
        floor[-1] = total
    if ratio * late > bits_tol(total):
        floor[-1] = max(floor[-1], total + ratio * late)  # late chunks cannot be served
    ceiling = ratio * np.concatenate(([0.0], np.cumsum(bits[:-1])))
    return FeasibilityTunnel(
        "bursty-effective", times, floor, ceiling, total, cum,
        bits, idle, flips, np.inf,
    )


def bursty_tunnel(
    profile: CpuIdlingProfile,
    arrivals: ArrivalProcess,
    ratio: float,
    timeline: MergedTimeline | None = None,
) -> FeasibilityTunnel:
    """Full-utilization tunnel for chunked arrivals: floor is the capacity curve.

    Only consistent (feasible) when the offloaded share equals the whole
    capacity; otherwise the endpoint mismatch reports as infeasible.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"offload ratio must be in [0, 1], got {ratio}")
    times, bits, cum, idle, flips, late = _merged_parts(profile, arrivals, timeline, [])
    total = ratio * float(bits.sum())
    floor = cum.copy()
    if ratio * late > bits_tol(total):
        floor[-1] = max(floor[-1], total + ratio * late)
    ceiling = ratio * np.concatenate(([0.0], np.cumsum(bits[:-1])))
    return FeasibilityTunnel(
        "bursty", times, floor, ceiling, total, cum,
        bits, idle, flips, np.inf,
    )


def local_compute_tunnel(arrivals: ArrivalProcess, local, ratio: float) -> FeasibilityTunnel:
    """Feasibility tunnel for the user computing its own share of each chunk.

    The user CPU runs at a constant rate through the whole window, so the
    capacity curve is a line through the origin; otherwise the construction
    mirrors the chunked-arrival transfer tunnel.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"offload ratio must be in [0, 1], got {ratio}")
    share = 1.0 - ratio
    rate = local.cpu_hz / local.cycles_per_bit
    horizon = arrivals.horizon
    total = share * arrivals.total
    slack = rate * horizon - total
    times = [0.0] + [float(t) for t in arrivals.times if TIME_ATOL < t < horizon - TIME_ATOL]
    times.append(horizon)
    bits = [0.0] * len(times)
    for t, s in zip(arrivals.times, arrivals.sizes):
        if s <= 0:
            continue
        v = int(np.argmin(np.abs(np.asarray(times) - t)))
        bits[v] += float(s)
    if 0.0 < slack < rate * horizon:
        t_star = slack / rate
        before = len(times)
        _insert_time(times, t_star)
        if len(times) > before:
            bits.insert(times.index(t_star), 0.0)
    times = np.asarray(times)
    bits = np.asarray(bits)
    cum = rate * times
    floor = np.maximum(cum - slack, 0.0)
    if slack >= 0.0:
        floor[-1] = total
    ceiling = share * np.concatenate(([0.0], np.cumsum(bits[:-1])))
    idle = np.ones(len(times) - 1, dtype=bool)
    flips = np.zeros(len(times), dtype=int)
    return FeasibilityTunnel(
        "local", times, floor, ceiling, total, cum,
        bits, idle, flips, np.inf,
    )


def max_offload_ratio(
    profile: CpuIdlingProfile,
    arrivals: ArrivalProcess,
    timeline: MergedTimeline | None = None,
) -> float:
    """Largest per-chunk offload share the helper can absorb.

    For every instant, the offloaded part of data arriving from then on must
    fit into the capacity remaining after it.
    """
    tl = timeline if timeline is not None else merge_events(profile, arrivals)
    if arrivals.total <= 0.0:
        return 1.0
    if tl.idle_end_index is None:
        return 0.0
    cap = profile.capacity
    tails = np.cumsum(tl.arrival_bits[::-1])[::-1]  # bits arriving at or after each vertex
    best = 1.0
    for k in range(len(tl.times)):
        if tails[k] <= 0.0:
            break
        best = min(best, max(cap - tl.cum_capacity[k], 0.0) / tails[k])
    return best


def min_offload_ratio(arrivals: ArrivalProcess, local) -> float:
    """Smallest per-chunk offload share the user's own CPU can tolerate.

    The kept share of data arriving from any instant on must fit into the
    local computing capacity left before the deadline.
    """
    if arrivals.total <= 0.0:
        return 0.0
    rate = local.cpu_hz / local.cycles_per_bit
    horizon = arrivals.horizon
    tails = np.cumsum(arrivals.sizes[::-1])[::-1]
    worst = 0.0
    for t, tail in zip(arrivals.times, tails):
        if tail <= 0.0:
            break
        room = rate * (horizon - t)
        worst = max(worst, 1.0 - room / tail)
    return worst


def format_tunnel(tunnel: FeasibilityTunnel) -> str:
    lines = [f"# kind={tunnel.kind} total={tunnel.total:.12g} buffer={tunnel.buffer_bits:.12g}"]
    lines.append("# time_s,floor_bits,ceiling_bits")
    for t, lo, hi in zip(tunnel.times, tunnel.floor, tunnel.ceiling):
        lines.append(f"{t:.12g},{lo:.12g},{hi:.12g}")
    return "\n".join(lines) + "\n"
