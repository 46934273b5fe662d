"""Monte Carlo harness for offloading policies over random CPU and channel draws.

Each trial owns a counter-derived seed, so runs are reproducible bit for bit
regardless of worker count, and every grid point of a sweep reuses the same
underlying draws (fading, epoch lengths, arrival pattern). That coupling makes
cross-point comparisons paired: capacity grows pointwise with the mean idle
duration, arrival sizes grow pointwise with the size scale, and so on.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import inf, isfinite, isnan, nan, sqrt

import numpy as np

from .cpu_profile import ArrivalProcess, CpuIdlingProfile, Epoch, build_profile
from .energy import ChannelParams, LocalComputeParams
from .errors import ConfigError, InfeasibleError, NumericError
from .partition import optimize_partition, optimize_ratio, partition_bounds, scan_minimize
from .string_pull import floor_following_schedule, pull_string
from .tunnel import (
    bits_tol,
    bursty_effective_tunnel,
    effective_tunnel,
    lazy_first_tunnel,
    proportional_tunnel,
)

_TAG_ONESHOT = 11
_TAG_BUFFER = 12
_TAG_BURSTY = 13
_POOL = 128  # pre-drawn randomness per kind and trial


@dataclass(frozen=True)
class SimConfig:
    """Scenario parameters shared by all sweeps. Units: s, Hz, W, bits, J."""

    horizon: float = 0.1
    local_hz: float = 1e9
    cycles_per_bit: float = 500.0
    switched_cap: float = 1e-28
    helper_hz: float = 5e9
    bandwidth_hz: float = 1e6
    noise_w: float = 1e-10
    mean_gain: float = 1e-6
    rayleigh_fading: bool = True
    mean_idle: float = 0.02
    mean_busy: float = 0.02
    idle_start_prob: float = 0.5
    load_bits: float = 7e5
    buffer_bits: float = inf
    mean_interarrival: float = 0.02
    size_low: float = 5e4
    size_high: float = 1.5e5
    trials: int = 2000
    seed: int = 12345

    def __post_init__(self):
        positive = (
            "horizon", "local_hz", "cycles_per_bit", "switched_cap", "helper_hz",
            "bandwidth_hz", "noise_w", "mean_gain", "mean_idle", "mean_busy",
            "mean_interarrival",
        )
        for name in positive:
            v = getattr(self, name)
            if not isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if not 0.0 <= self.idle_start_prob <= 1.0:
            raise ConfigError("idle_start_prob must be in [0, 1]")
        if self.load_bits < 0 or self.buffer_bits < 0:
            raise ConfigError("load_bits and buffer_bits must be nonnegative")
        if not 0 <= self.size_low <= self.size_high:
            raise ConfigError("need 0 <= size_low <= size_high")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in fields:
                raise ConfigError(f"unknown configuration key {key!r}")
            if key == "rayleigh_fading":
                kwargs[key] = bool(value)
            elif key in ("trials", "seed"):
                kwargs[key] = int(value)
            else:
                try:
                    kwargs[key] = float(value)
                except (TypeError, ValueError):
                    raise ConfigError(f"configuration key {key!r} needs a number, got {value!r}")
        return cls(**kwargs)

    def channel(self, gain: float) -> ChannelParams:
        return ChannelParams(gain, self.bandwidth_hz, self.noise_w)

    def local_params(self) -> LocalComputeParams:
        return LocalComputeParams(self.local_hz, self.cycles_per_bit, self.switched_cap)


_AXES = {
    "mean_idle", "mean_busy", "load_bits", "buffer_bits", "mean_gain",
    "mean_interarrival", "horizon", "size_scale",
}


def _apply_axis(cfg: SimConfig, axis: str, value: float) -> SimConfig:
    if axis == "size_scale":
        return cfg
    return dataclasses.replace(cfg, **{axis: value})


def _check_axis(axis: str, kind: str):
    if axis not in _AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose one of {sorted(_AXES)}")
    if axis == "size_scale" and kind != "bursty":
        raise ConfigError("size_scale only applies to the bursty sweep")


@dataclass(frozen=True)
class TrialDraws:
    """All randomness for one trial, drawn in a fixed order and count."""

    gain_unit: float
    idle_start: float
    idle_units: np.ndarray
    busy_units: np.ndarray
    gap_units: np.ndarray
    size_units: np.ndarray


def draw_trial(seed: int, tag: int, trial: int) -> TrialDraws:
    rng = np.random.default_rng(np.random.SeedSequence([seed, tag, trial]))
    return TrialDraws(
        gain_unit=float(rng.exponential(1.0)),
        idle_start=float(rng.random()),
        idle_units=rng.exponential(1.0, _POOL),
        busy_units=rng.exponential(1.0, _POOL),
        gap_units=rng.exponential(1.0, _POOL),
        size_units=rng.random(_POOL),
    )


def _profile_from_draws(draws: TrialDraws, cfg: SimConfig) -> CpuIdlingProfile:
    idle = draws.idle_start < cfg.idle_start_prob
    epochs = []
    elapsed = 0.0
    i = j = 0
    while True:
        if idle:
            if i >= _POOL:
                raise NumericError("epoch pool exhausted; horizon too long for the harness")
            dur = cfg.mean_idle * draws.idle_units[i]
            i += 1
        else:
            if j >= _POOL:
                raise NumericError("epoch pool exhausted; horizon too long for the harness")
            dur = cfg.mean_busy * draws.busy_units[j]
            j += 1
        dur = max(dur, 1e-9)
        if elapsed + dur >= cfg.horizon - 1e-12:
            tail = cfg.horizon - elapsed
            if tail >= 1e-12 or not epochs:
                epochs.append(Epoch(tail, idle))
            else:
                last = epochs[-1]
                epochs[-1] = Epoch(last.duration + tail, last.idle)
            break
        epochs.append(Epoch(dur, idle))
        elapsed += dur
        idle = not idle
    return build_profile(epochs, cfg.helper_hz, cfg.cycles_per_bit, cfg.horizon)


def _arrivals_from_draws(draws: TrialDraws, cfg: SimConfig, scale: float) -> ArrivalProcess:
    events = []
    t = 0.0
    for k in range(_POOL):
        t += cfg.mean_interarrival * draws.gap_units[k]
        if t >= cfg.horizon - 1e-12:
            return ArrivalProcess.from_events(events, cfg.horizon)
        size = scale * (cfg.size_low + (cfg.size_high - cfg.size_low) * draws.size_units[k])
        events.append((t, size))
    raise NumericError("arrival pool exhausted; horizon too long for the harness")


def _benchmark_energy(profile, channel, local, load_bits, low, high) -> float:
    """Best energy of the transmit-as-late-as-possible policy over the split.

    That policy always transmits at the helper's idle computing rate, so its
    transfer energy is linear in the transfer size and the best split sits at
    an end of the feasible range.
    """
    best = inf
    for l in (low, high):
        e = local.local_energy(load_bits - l)
        if l > bits_tol(load_bits):
            tunnel = effective_tunnel(profile, l, inf)
            e += floor_following_schedule(tunnel).energy(channel)
        best = min(best, e)
    return best


def _lazy_energy(profile, channel, local, load_bits, buffer_bits, low, high) -> float:
    """Best energy of the buffer-first policy over the split (scanned)."""

    def fn(l):
        e = local.local_energy(load_bits - l)
        if l > bits_tol(load_bits):
            e += pull_string(lazy_first_tunnel(profile, l, buffer_bits)).energy(channel)
        return e

    if high - low <= 1.0:
        return fn(low)
    _, f = scan_minimize(fn, low, high, coarse=13, tol=1.0)
    return f


def _prop_energy(profile, channel, local, load_bits, buffer_bits, low, high) -> float:
    """Best energy of the pure proportional-share scheme over the split."""

    def fn(l):
        e = local.local_energy(load_bits - l)
        if l > bits_tol(load_bits):
            e += pull_string(proportional_tunnel(profile, l, buffer_bits)).energy(channel)
        return e

    if high - low <= 1.0:
        return fn(low)
    _, f = scan_minimize(fn, low, high, coarse=13, tol=1.0)
    return f


def _oneshot_case(task):
    cfg, axis, value, trial, tag = task
    cfg_pt = _apply_axis(cfg, axis, value)
    draws = draw_trial(cfg.seed, tag, trial)
    profile = _profile_from_draws(draws, cfg_pt)
    gain = cfg_pt.mean_gain * (draws.gain_unit if cfg_pt.rayleigh_fading else 1.0)
    channel = cfg_pt.channel(gain)
    local = cfg_pt.local_params()
    low, high = partition_bounds(profile, local, cfg_pt.load_bits)
    if low > min(high, cfg_pt.load_bits) + bits_tol(cfg_pt.load_bits):
        return (trial, False, nan, nan, nan, nan)
    res = optimize_partition(profile, channel, local, cfg_pt.load_bits, cfg_pt.buffer_bits)
    bench = _benchmark_energy(profile, channel, local, cfg_pt.load_bits, low, high)
    lazy = _lazy_energy(profile, channel, local, cfg_pt.load_bits, cfg_pt.buffer_bits, low, high)
    return (trial, True, res.energy, bench, lazy, res.offload_bits)


def _buffer_case(task):
    cfg, axis, value, trial, tag = task
    cfg_pt = _apply_axis(cfg, axis, value)
    draws = draw_trial(cfg.seed, tag, trial)
    profile = _profile_from_draws(draws, cfg_pt)
    gain = cfg_pt.mean_gain * (draws.gain_unit if cfg_pt.rayleigh_fading else 1.0)
    channel = cfg_pt.channel(gain)
    local = cfg_pt.local_params()
    low, high = partition_bounds(profile, local, cfg_pt.load_bits)
    if low > min(high, cfg_pt.load_bits) + bits_tol(cfg_pt.load_bits):
        return (trial, False, nan, nan, nan, nan)
    res = optimize_partition(profile, channel, local, cfg_pt.load_bits, cfg_pt.buffer_bits)
    prop = _prop_energy(profile, channel, local, cfg_pt.load_bits, cfg_pt.buffer_bits, low, high)
    lazy = _lazy_energy(profile, channel, local, cfg_pt.load_bits, cfg_pt.buffer_bits, low, high)
    return (trial, True, res.energy, prop, lazy, res.offload_bits)


def _bursty_benchmark(profile, arrivals, channel, local, r_lo, r_hi, timeline) -> float:
    best = inf
    total = arrivals.total
    for r in (r_lo, r_hi):
        e = local.local_energy((1.0 - r) * total)
        if r * total > bits_tol(total):
            tunnel = bursty_effective_tunnel(profile, arrivals, r, timeline)
            e += floor_following_schedule(tunnel).energy(channel)
        best = min(best, e)
    return best


def _bursty_case(task):
    cfg, axis, value, trial, tag = task
    cfg_pt = _apply_axis(cfg, axis, value)
    scale = value if axis == "size_scale" else 1.0
    draws = draw_trial(cfg.seed, tag, trial)
    profile = _profile_from_draws(draws, cfg_pt)
    gain = cfg_pt.mean_gain * (draws.gain_unit if cfg_pt.rayleigh_fading else 1.0)
    channel = cfg_pt.channel(gain)
    local = cfg_pt.local_params()
    arrivals = _arrivals_from_draws(draws, cfg_pt, scale)
    if arrivals.total <= 0.0:
        return (trial, True, 0.0, 0.0, 0.0, 0.0)
    try:
        res = optimize_ratio(profile, arrivals, channel, local)
    except InfeasibleError:
        return (trial, False, nan, nan, nan, nan)
    bench = _bursty_benchmark(
        profile, arrivals, channel, local, res.ratio_low, res.ratio_high, None
    )
    return (trial, True, res.ratio, res.energy, bench, res.offload_bits)


_SCHEMAS = {
    "oneshot": ("opt_energy", "bench_energy", "lazy_energy", "offload_bits"),
    "buffer": ("opt_energy", "prop_energy", "lazy_energy", "offload_bits"),
    "bursty": ("ratio", "opt_energy", "bench_energy", "offload_bits"),
}


@dataclass(frozen=True)
class SweepResult:
    kind: str
    axis: str
    values: list
    config: SimConfig
    per_trial: list  # one list of result tuples per grid value, trial order
    rows: list  # one aggregate dict per grid value


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one observation")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _aggregate(kind, axis, value, cases) -> dict:
    names = _SCHEMAS[kind]
    n = len(cases)
    feasible = [c for c in cases if c[1]]
    k = len(feasible)
    lo, hi = wilson_interval(k, n)
    row = {
        "axis": axis,
        "value": value,
        "trials": n,
        "feasible": k,
        "feasible_frac": k / n,
        "wilson_low": lo,
        "wilson_high": hi,
    }
    for idx, name in enumerate(names):
        vals = [c[2 + idx] for c in feasible]
        row[f"mean_{name}"] = sum(vals) / k if k else nan
    return row


def _run_sweep(cfg, axis, values, kind, worker, tag, jobs) -> SweepResult:
    _check_axis(axis, kind)
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("sweep needs at least one grid value")
    tasks = [(cfg, axis, v, t, tag) for v in values for t in range(cfg.trials)]
    if jobs is not None and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, len(tasks) // (jobs * 8))
            results = list(pool.map(worker, tasks, chunksize=chunk))
    else:
        results = [worker(task) for task in tasks]
    per_trial = []
    rows = []
    for i, v in enumerate(values):
        cases = results[i * cfg.trials : (i + 1) * cfg.trials]
        per_trial.append(cases)
        rows.append(_aggregate(kind, axis, v, cases))
    return SweepResult(kind, axis, values, cfg, per_trial, rows)


def run_oneshot_sweep(cfg: SimConfig, axis: str = "mean_idle", values=(0.01, 0.02, 0.04), jobs=None):
    """Sweep a scenario parameter; per trial, optimally split and schedule a
    one-shot load, and price the late-transmit and buffer-first policies."""
    return _run_sweep(cfg, axis, values, "oneshot", _oneshot_case, _TAG_ONESHOT, jobs)


def run_buffer_sweep(cfg: SimConfig, values=(1e4, 1e5, 1e6, inf), jobs=None):
    """Sweep the receive buffer size with everything else held per-trial fixed,
    pricing the hybrid optimum, the proportional scheme, and buffer-first."""
    return _run_sweep(cfg, "buffer_bits", values, "buffer", _buffer_case, _TAG_BUFFER, jobs)


def run_bursty_sweep(cfg: SimConfig, axis: str = "size_scale", values=(0.5, 1.0, 2.0), jobs=None):
    """Sweep chunked-arrival scenarios, optimizing the per-chunk offload share."""
    return _run_sweep(cfg, axis, values, "bursty", _bursty_case, _TAG_BURSTY, jobs)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def format_csv(result: SweepResult) -> str:
    """Aggregate rows as CSV text; identical inputs give identical bytes."""
    cols = list(result.rows[0].keys())
    lines = [
        f"# offloadsim sweep kind={result.kind} axis={result.axis} "
        f"seed={result.config.seed} trials={result.config.trials}",
    ]
    if "mean_prop_energy" in cols and "mean_lazy_energy" in cols:
        cross = find_crossover(
            result.values,
            [row["mean_prop_energy"] for row in result.rows],
            [row["mean_lazy_energy"] for row in result.rows],
        )
        lines.append(f"# crossover_buffer_bits={_fmt(cross) if cross is not None else 'none'}")
    lines.append(",".join(cols))
    for row in result.rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def write_csv(result: SweepResult, path):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_csv(result))


def find_crossover(values, series_a, series_b):
    """First grid location where series_a stops beating series_b, linearly
    interpolated; None if the sign never flips."""
    diff = [a - b for a, b in zip(series_a, series_b)]
    for i in range(1, len(diff)):
        if isnan(diff[i - 1]) or isnan(diff[i]):
            continue
        if diff[i - 1] <= 0 < diff[i] or diff[i - 1] >= 0 > diff[i]:
            span = diff[i] - diff[i - 1]
            frac = 0.0 if span == 0 else -diff[i - 1] / span
            return values[i - 1] + frac * (values[i] - values[i - 1])
    return None
