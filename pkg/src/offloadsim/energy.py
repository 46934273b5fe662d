"""Transmit and compute energy models.

Transmission over a bandwidth-W channel with gain h and noise power N0 costs
``N0 * (2**(r/W) - 1) / h**2`` watts to sustain rate r; the cost of a schedule
is the sum of that power times duration over its constant-rate stretches.
Local computation costs a fixed energy per cycle set by the switched
capacitance and the local CPU frequency.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Static link between the user and the helper."""

    gain: float  # squared channel magnitude |h|^2, includes path loss
    bandwidth_hz: float
    noise_w: float  # noise power over the band, watts

    def __post_init__(self):
        if self.gain <= 0 or self.bandwidth_hz <= 0 or self.noise_w <= 0:
            raise ValueError("channel parameters must be positive")

    def rate_to_power(self, rate):
        """Transmit power (W) needed to sustain ``rate`` bits/s."""
        with np.errstate(over="ignore"):
            return self.noise_w * np.expm1(np.asarray(rate) / self.bandwidth_hz * np.log(2.0)) / self.gain

    def power_to_rate(self, power):
        """Rate (bits/s) achievable with ``power`` watts."""
        return self.bandwidth_hz * np.log2(1.0 + np.asarray(power) * self.gain / self.noise_w)

    def marginal_energy_per_bit(self, rate: float) -> float:
        """d(power)/d(rate) at ``rate``: J per extra bit when stretching rate."""
        return self.noise_w * np.log(2.0) / (self.bandwidth_hz * self.gain) * 2.0 ** (rate / self.bandwidth_hz)

    def energy_per_bit(self, rate: float) -> float:
        """Average J/bit at constant ``rate``; limit N0*ln2/(W*h^2) as rate->0."""
        if rate <= 0:
            return self.noise_w * np.log(2.0) / (self.bandwidth_hz * self.gain)
        return float(self.rate_to_power(rate)) / rate

    def epoch_energy(self, bits: float, duration: float) -> float:
        """Energy to move ``bits`` at constant rate over ``duration`` seconds."""
        if bits <= 0:
            return 0.0
        if duration <= 0:
            return np.inf
        return float(self.rate_to_power(bits / duration)) * duration


@dataclass(frozen=True)
class LocalComputeParams:
    """User-side processor model."""

    cpu_hz: float
    cycles_per_bit: float
    switched_cap: float  # effective switched capacitance, J*s^2

    def __post_init__(self):
        if self.cpu_hz <= 0 or self.cycles_per_bit <= 0 or self.switched_cap <= 0:
            raise ValueError("local compute parameters must be positive")

    @property
    def cycle_energy(self) -> float:
        """Energy per CPU cycle at the configured frequency."""
        return self.switched_cap * self.cpu_hz**2

    @property
    def bit_energy(self) -> float:
        return self.cycle_energy * self.cycles_per_bit

    def local_energy(self, bits: float) -> float:
        """Energy to compute ``bits`` locally."""
        if bits < 0:
            raise ValueError("bits must be nonnegative")
        return bits * self.bit_energy

    def local_capacity(self, seconds: float) -> float:
        """Bits the local CPU can finish in ``seconds``."""
        return self.cpu_hz * seconds / self.cycles_per_bit

    def min_offload(self, load_bits: float, horizon: float) -> float:
        """Bits that must be offloaded because the local CPU cannot finish them."""
        return max(load_bits - self.local_capacity(horizon), 0.0)


def schedule_energy(times, cumulative, channel: ChannelParams) -> float:
    """Energy of a piecewise-constant-rate schedule given its cumulative curve."""
    times = np.asarray(times, dtype=float)
    cum = np.asarray(cumulative, dtype=float)
    if times.shape != cum.shape or times.ndim != 1 or len(times) < 2:
        raise ValueError("times and cumulative must be matching 1-D arrays")
    total = 0.0
    for k in range(len(times) - 1):
        bits = cum[k + 1] - cum[k]
        if bits < -1e-6:
            raise ValueError("cumulative curve must be nondecreasing")
        if bits > 0:
            total += channel.epoch_energy(bits, times[k + 1] - times[k])
    return total


def rate_table(channel: ChannelParams, rates) -> str:
    """Small human-readable power table, used by the CLI."""
    lines = ["# rate_bps,power_w,j_per_bit"]
    for r in rates:
        p = float(channel.rate_to_power(r))
        lines.append(f"{r:.12g},{p:.12g},{(p / r if r > 0 else channel.energy_per_bit(0.0)):.12g}")
    return "\n".join(lines) + "\n"


__all__ = [
    "ChannelParams",
    "LocalComputeParams",
    "db_to_linear",
    "dbm_to_watts",
    "schedule_energy",
    "rate_table",
]
