"""Helper-CPU availability modeling.

The helper's CPU alternates between busy epochs (serving its own work) and idle
epochs whose spare cycles can compute offloaded bits. The cumulative number of
bits the helper can have computed by time t grows at ``helper_hz /
cycles_per_bit`` during idle epochs and is flat during busy ones. This module
owns that piecewise-linear capacity curve, the workload arrival process, the
random samplers used by the simulator, and the line-oriented text formats the
CLI reads and writes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TIME_ATOL = 1e-12  # absolute tolerance for time comparisons, seconds
MIN_EPOCH = 1e-12  # epochs shorter than this are rejected


def as_generator(seed) -> np.random.Generator:
    """Accept an int, SeedSequence, or Generator and return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Epoch:
    """One maximal stretch of constant CPU state."""

    duration: float
    idle: bool


def normalize_epochs(epochs) -> tuple[Epoch, ...]:
    """Merge adjacent epochs with identical state; reject degenerate ones."""
    merged: list[Epoch] = []
    for ep in epochs:
        dur = float(ep.duration)
        if not np.isfinite(dur) or dur <= 0:
            raise ValueError(f"epoch duration must be positive, got {dur}")
        if merged and merged[-1].idle == ep.idle:
            merged[-1] = Epoch(merged[-1].duration + dur, ep.idle)
        else:
            merged.append(Epoch(dur, bool(ep.idle)))
    if not merged:
        raise ValueError("profile needs at least one epoch")
    for ep in merged:
        if ep.duration < MIN_EPOCH:
            raise ValueError(f"degenerate epoch of {ep.duration} s after merging")
    return tuple(merged)


@dataclass(frozen=True, eq=False)
class CpuIdlingProfile:
    """Normalized epoch sequence plus the cumulative capacity curve.

    ``boundaries`` holds the K+1 epoch edges starting at 0.0 and ending at the
    horizon; ``cum_bits[k]`` is the capacity accumulated by ``boundaries[k]``.
    """

    epochs: tuple[Epoch, ...]
    helper_hz: float
    cycles_per_bit: float
    boundaries: np.ndarray
    cum_bits: np.ndarray

    @property
    def horizon(self) -> float:
        return float(self.boundaries[-1])

    @property
    def idle_rate(self) -> float:
        """Capacity slope during idle epochs, bits per second."""
        return self.helper_hz / self.cycles_per_bit

    @property
    def last_idle_index(self):
        """Index of the last idle epoch, or None if the CPU is never idle."""
        for k in range(len(self.epochs) - 1, -1, -1):
            if self.epochs[k].idle:
                return k
        return None

    @property
    def idle_end(self):
        """End of the last idle epoch: no offloaded bit is computable later."""
        k = self.last_idle_index
        return None if k is None else float(self.boundaries[k + 1])

    @property
    def capacity(self) -> float:
        """Total bits computable for the user by the deadline."""
        k = self.last_idle_index
        return 0.0 if k is None else float(self.cum_bits[k + 1])

    def capacity_at(self, t: float) -> float:
        """Cumulative computable bits by time t (piecewise linear)."""
        b = self.boundaries
        if t < -TIME_ATOL or t > b[-1] + TIME_ATOL:
            raise ValueError(f"time {t} outside [0, {b[-1]}]")
        if t >= b[-1]:
            return float(self.cum_bits[-1])
        if t <= 0.0:
            return 0.0
        k = int(np.searchsorted(b, t, side="right")) - 1
        base = float(self.cum_bits[k])
        if self.epochs[k].idle:
            base += (t - float(b[k])) * self.idle_rate
        return base

    def scaled(self, factor: float) -> "CpuIdlingProfile":
        """Same epoch structure with the idle slope scaled by ``factor``."""
        if not 0.0 < factor <= 1.0 + 1e-12:
            raise ValueError(f"scale factor must be in (0, 1], got {factor}")
        return build_profile(
            self.epochs, self.helper_hz * factor, self.cycles_per_bit, self.horizon
        )


def build_profile(epochs, helper_hz, cycles_per_bit, horizon) -> CpuIdlingProfile:
    """Validate and normalize epochs into a capacity profile.

    Epoch durations must sum to the horizon within 1e-12 s.
    """
    if helper_hz <= 0 or cycles_per_bit <= 0:
        raise ValueError("helper_hz and cycles_per_bit must be positive")
    eps = normalize_epochs(epochs)
    durs = np.array([ep.duration for ep in eps], dtype=float)
    total = float(durs.sum())
    if abs(total - horizon) > TIME_ATOL:
        raise ValueError(f"epoch durations sum to {total}, expected horizon {horizon}")
    boundaries = np.concatenate(([0.0], np.cumsum(durs)))
    boundaries[-1] = horizon
    slope = helper_hz / cycles_per_bit
    gains = np.array([ep.duration * slope if ep.idle else 0.0 for ep in eps])
    cum_bits = np.concatenate(([0.0], np.cumsum(gains)))
    return CpuIdlingProfile(eps, float(helper_hz), float(cycles_per_bit), boundaries, cum_bits)


def capacity_at(profile: CpuIdlingProfile, t: float) -> float:
    return profile.capacity_at(t)


@dataclass(frozen=True, eq=False)
class ArrivalProcess:
    """Workload arrival instants and sizes over one deadline window.

    Times are strictly increasing; the last event sits exactly at the horizon
    and carries zero bits (data arriving at the deadline can never be served).
    """

    times: np.ndarray
    sizes: np.ndarray
    horizon: float

    @property
    def total(self) -> float:
        return float(self.sizes.sum())

    @classmethod
    def from_events(cls, events, horizon) -> "ArrivalProcess":
        horizon = float(horizon)
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        pairs = sorted((float(t), float(s)) for t, s in events)
        times: list[float] = []
        sizes: list[float] = []
        for t, s in pairs:
            if s < 0:
                raise ValueError(f"arrival size must be nonnegative, got {s}")
            if t < -TIME_ATOL or t > horizon + TIME_ATOL:
                raise ValueError(f"arrival at {t} outside [0, {horizon}]")
            if t >= horizon - TIME_ATOL:
                if s > 0:
                    raise ValueError("data arriving at the deadline cannot be served")
                continue
            t = max(t, 0.0)
            if times and t - times[-1] <= TIME_ATOL:
                sizes[-1] += s
            elif s > 0:
                times.append(t)
                sizes.append(s)
        times.append(horizon)
        sizes.append(0.0)
        return cls(np.asarray(times), np.asarray(sizes), horizon)


def sample_cpu_process(seed, horizon, mean_idle, mean_busy, idle_start_prob=0.5):
    """Draw an alternating busy/idle epoch list with exponential durations.

    The final epoch is truncated so durations sum to the horizon exactly;
    a sub-tolerance sliver is folded into the preceding epoch instead.
    """
    if horizon <= 0 or mean_idle <= 0 or mean_busy <= 0:
        raise ValueError("horizon and epoch means must be positive")
    if not 0.0 <= idle_start_prob <= 1.0:
        raise ValueError("idle_start_prob must be in [0, 1]")
    rng = as_generator(seed)
    idle = bool(rng.random() < idle_start_prob)
    out: list[Epoch] = []
    elapsed = 0.0
    while True:
        dur = rng.exponential(mean_idle if idle else mean_busy)
        while dur <= 1e-9:
            dur = rng.exponential(mean_idle if idle else mean_busy)
        if elapsed + dur >= horizon - MIN_EPOCH:
            tail = horizon - elapsed
            if tail >= MIN_EPOCH or not out:
                out.append(Epoch(tail, idle))
            else:
                prev = out[-1]
                out[-1] = Epoch(prev.duration + tail, prev.idle)
            return out
        out.append(Epoch(dur, idle))
        elapsed += dur
        idle = not idle


def sample_arrivals(seed, horizon, mean_interarrival, size_low, size_high) -> ArrivalProcess:
    """Poisson arrivals on (0, horizon) with uniform sizes in [low, high]."""
    if mean_interarrival <= 0:
        raise ValueError("mean_interarrival must be positive")
    if not 0 <= size_low <= size_high:
        raise ValueError("need 0 <= size_low <= size_high")
    rng = as_generator(seed)
    events = []
    t = rng.exponential(mean_interarrival)
    while t < horizon - TIME_ATOL:
        events.append((t, rng.uniform(size_low, size_high)))
        t += rng.exponential(mean_interarrival)
    return ArrivalProcess.from_events(events, horizon)


@dataclass(frozen=True, eq=False)
class MergedTimeline:
    """Union of CPU epoch edges and arrival instants over one window.

    ``arrival_bits[v]`` is the data arriving exactly at ``times[v]``;
    ``cpu_flip[v]`` is +1 where the CPU turns idle, -1 where it turns busy,
    0 elsewhere; ``interval_idle[i]`` is the CPU state on
    ``(times[i], times[i+1])``; ``idle_end_index`` locates the end of the last
    idle epoch inside ``times`` (None when the CPU is never idle).
    """

    times: np.ndarray
    arrival_bits: np.ndarray
    cum_capacity: np.ndarray
    interval_idle: np.ndarray
    cpu_flip: np.ndarray
    idle_end_index: int | None

    @property
    def offloadable_bits(self) -> float:
        """Total data arriving strictly before the last idle instant."""
        if self.idle_end_index is None:
            return 0.0
        return float(self.arrival_bits[: self.idle_end_index].sum())


def merge_events(profile: CpuIdlingProfile, arrivals: ArrivalProcess) -> MergedTimeline:
    """Interleave CPU boundaries and arrival instants into one timeline."""
    if abs(profile.horizon - arrivals.horizon) > TIME_ATOL:
        raise ValueError("profile and arrivals cover different horizons")
    pb = profile.boundaries
    at = arrivals.times
    times: list[float] = []
    bits: list[float] = []
    cpu_idx: list[int] = []  # profile boundary index, -1 for pure arrivals
    i = j = 0
    while i < len(pb) or j < len(at):
        tb = pb[i] if i < len(pb) else np.inf
        ta = at[j] if j < len(at) else np.inf
        if abs(tb - ta) <= TIME_ATOL:
            times.append(float(tb))
            bits.append(float(arrivals.sizes[j]))
            cpu_idx.append(i)
            i += 1
            j += 1
        elif tb < ta:
            times.append(float(tb))
            bits.append(0.0)
            cpu_idx.append(i)
            i += 1
        else:
            times.append(float(ta))
            bits.append(float(arrivals.sizes[j]))
            cpu_idx.append(-1)
            j += 1
    tarr = np.asarray(times)
    barr = np.asarray(bits)
    cum_capacity = np.array([profile.capacity_at(t) for t in tarr])
    mids = 0.5 * (tarr[:-1] + tarr[1:])
    epoch_of = np.clip(np.searchsorted(pb, mids, side="right") - 1, 0, len(profile.epochs) - 1)
    interval_idle = np.array([profile.epochs[k].idle for k in epoch_of])
    flips = np.zeros(len(tarr), dtype=int)
    for v, k in enumerate(cpu_idx):
        if 1 <= k <= len(profile.epochs) - 1:
            was, now = profile.epochs[k - 1].idle, profile.epochs[k].idle
            flips[v] = 1 if (now and not was) else -1
    idle_end_index = None
    k_last = profile.last_idle_index
    if k_last is not None:
        idle_end_index = cpu_idx.index(k_last + 1)
    return MergedTimeline(tarr, barr, cum_capacity, interval_idle, flips, idle_end_index)


# ---------------------------------------------------------------------------
# Line-oriented text formats: one record per line, comma-separated, '#' starts
# a comment. Epochs are "duration_s,idle|busy"; arrivals are "time_s,bits".


def format_epochs(epochs) -> str:
    lines = ["# duration_s,state"]
    for ep in epochs:
        lines.append(f"{ep.duration:.12g},{'idle' if ep.idle else 'busy'}")
    return "\n".join(lines) + "\n"


def parse_epochs(text: str) -> list[Epoch]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        dur_s, state = (field.strip() for field in line.split(","))
        if state not in ("idle", "busy", "0", "1"):
            raise ValueError(f"unknown CPU state {state!r}")
        out.append(Epoch(float(dur_s), state in ("idle", "1")))
    if not out:
        raise ValueError("no epoch records found")
    return out


def format_arrivals(arrivals: ArrivalProcess) -> str:
    lines = ["# time_s,bits"]
    for t, s in zip(arrivals.times, arrivals.sizes):
        lines.append(f"{t:.12g},{s:.12g}")
    return "\n".join(lines) + "\n"


def parse_arrivals(text: str, horizon: float) -> ArrivalProcess:
    events = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        t_s, s_s = (field.strip() for field in line.split(","))
        events.append((float(t_s), float(s_s)))
    return ArrivalProcess.from_events(events, horizon)
