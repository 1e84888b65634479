"""Simulated optical path from a bulb's light-state timeline to sensor samples."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .colorlab import (HUE_BINS, ResponseCalibration, default_calibration, hsb_to_rgb_array,
                       sensor_response_array)
from .visualizer import Timeline


class EmptyTimeline(ValueError):
    pass


@dataclass(frozen=True)
class ChannelConfig:
    distance_m: float = 5.0
    visible_transmittance: float = 1.0
    noise_sigma: float = 0.0
    gain: float = 25.0
    sample_jitter_ms: float = 0.0
    packet_loss_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError("distance_m must be positive")
        if not 0 < self.visible_transmittance <= 1:
            raise ValueError("visible_transmittance must lie in (0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        if self.sample_jitter_ms < 0:
            raise ValueError("sample_jitter_ms must be non-negative")
        if not 0 <= self.packet_loss_prob < 1:
            raise ValueError("packet_loss_prob must lie in [0, 1)")

    @property
    def channel_factor(self) -> float:
        """VT x gain / d^2: the fraction of emitted intensity reaching the sensor."""
        return self.visible_transmittance * self.gain / self.distance_m ** 2

    def replace(self, **changes) -> "ChannelConfig":
        return replace(self, **changes)


class SensorKind(enum.Enum):
    LUMINANCE = ("luminance", 10.0, 1)
    RGB = ("rgb", 10.0, 3)
    RGB_VIDEO = ("rgb", 1.0, 3)
    INFRARED = ("infrared", 2000.0, 1)

    @property
    def quantity(self) -> str:
        return self.value[0]

    @property
    def rate_hz(self) -> float:
        return self.value[1]

    @property
    def channels(self) -> int:
        return self.value[2]


@dataclass(frozen=True)
class BulbDynamics:
    """Linear slew limits of the emitter, in seconds for a full 0-to-1 swing."""

    rise_time_s: float = 0.45
    fall_time_s: float = 0.2

    def __post_init__(self):
        if self.rise_time_s < 0 or self.fall_time_s < 0:
            raise ValueError("rise and fall times must be non-negative")


INSTANT = BulbDynamics(0.0, 0.0)


@dataclass
class SampleStream:
    t: np.ndarray
    values: np.ndarray  # (n,) scalar or (n, 3) responses

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != len(self.t):
            raise ValueError("timestamps and values differ in length")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def to_csv(self, path) -> None:
        vals = self.values.reshape(len(self.t), -1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + (["value"] if vals.shape[1] == 1 else ["r", "g", "b"]))
            for t, row in zip(self.t, vals):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "SampleStream":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        body = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(len(rows) - 1, -1)
        values = body[:, 1] if body.shape[1] == 2 else body[:, 1:]
        return cls(body[:, 0], values)


def effective_snr(cfg: ChannelConfig, peak: float = 1.0) -> float:
    """Received peak over noise std-dev; ``math.inf`` when the channel is noiseless."""
    if cfg.noise_sigma == 0:
        return math.inf
    return peak * cfg.channel_factor / cfg.noise_sigma


@lru_cache(maxsize=8)
def white_sensitivity(cal: ResponseCalibration) -> float:
    """Luminance reading for full white, on the per-hue sensitivity scale."""
    resp = sensor_response_array(np.ones(3), cal)
    hues = np.arange(HUE_BINS, dtype=float)
    full = sensor_response_array(hsb_to_rgb_array(np.stack([hues, np.ones(HUE_BINS),
                                                            np.ones(HUE_BINS)], axis=-1)), cal)
    return float(resp @ np.asarray(cal.luminance_weights) / (full @ np.asarray(cal.luminance_weights)).max())


def emitted_luminance(hsb: np.ndarray, cal: ResponseCalibration) -> np.ndarray:
    """Luminance sensor reading per light state, linear in brightness."""
    hsb = np.atleast_2d(hsb)
    bins = np.round(hsb[:, 0]).astype(np.int64) % HUE_BINS
    sat = hsb[:, 1]
    return hsb[:, 2] * (sat * cal.luminance[bins] + (1.0 - sat) * white_sensitivity(cal))


def ramp_levels(event_t, targets, sample_t, dynamics: BulbDynamics, initial: float = 0.0) -> np.ndarray:
    """Emitted level at ``sample_t`` for a bulb slewing linearly toward each new target."""
    event_t = np.asarray(event_t, dtype=float)
    targets = np.asarray(targets, dtype=float)
    sample_t = np.asarray(sample_t, dtype=float)
    up = 1.0 / dynamics.rise_time_s if dynamics.rise_time_s > 0 else math.inf
    down = 1.0 / dynamics.fall_time_s if dynamics.fall_time_s > 0 else math.inf

    def advance(level, target, dt):
        if target >= level:
            return min(target, level + dt * up)
        return max(target, level - dt * down)

    start = np.empty(len(event_t))
    level = initial
    for i in range(len(event_t)):
        if i:
            level = advance(level, targets[i - 1], event_t[i] - event_t[i - 1])
        start[i] = level

    out = np.full(len(sample_t), float(initial))
    idx = np.searchsorted(event_t, sample_t, side="right") - 1
    live = idx >= 0
    j = idx[live]
    if math.isinf(up) and math.isinf(down):
        out[live] = targets[j]
        return out
    dt = sample_t[live] - event_t[j]
    s, g = start[j], targets[j]
    rising = np.minimum(g, s + dt * up) if not math.isinf(up) else g
    falling = np.maximum(g, s - dt * down) if not math.isinf(down) else g
    out[live] = np.where(g >= s, rising, falling)
    return out


def sample_times(sensor: SensorKind, start: float, duration: float, phase: Optional[float] = None) -> np.ndarray:
    period = 1.0 / sensor.rate_hz
    phase = 0.5 * period if phase is None else phase
    n = int(math.floor(duration * sensor.rate_hz + 1e-9))
    return start + phase + np.arange(n) * period


def observe(timeline: Timeline, sensor: SensorKind, cfg: ChannelConfig,
            cal: Optional[ResponseCalibration] = None, start: float = 0.0,
            duration: Optional[float] = None, phase: Optional[float] = None,
            dynamics: BulbDynamics = INSTANT) -> SampleStream:
    """Sample a light-state timeline through the channel.

    Samples fall at ``start + phase + j / rate``; ``phase`` defaults to half a
    period so nominal sample instants never coincide with update instants.
    Visible light changes instantly unless ``dynamics`` says otherwise;
    infrared streams are usually observed with the bulb's slew limits.
    """
    if len(timeline) == 0:
        raise EmptyTimeline("timeline has no events")
    cal = cal or default_calibration()
    rng = np.random.default_rng(cfg.seed)
    duration = timeline.end - start if duration is None else duration
    t = sample_times(sensor, start, duration, phase)

    if sensor.quantity == "infrared":
        if timeline.infrared is None:
            raise ValueError("timeline carries no infrared levels")
        levels = np.asarray(timeline.infrared, dtype=float)[:, None]
    else:
        if timeline.hsb is None:
            raise ValueError("timeline carries no visible colors")
        if sensor.quantity == "luminance":
            levels = emitted_luminance(timeline.hsb, cal)[:, None]
        else:
            levels = sensor_response_array(hsb_to_rgb_array(timeline.hsb), cal)

    # a dropped update leaves the previous state in place
    kept = rng.random(len(timeline)) >= cfg.packet_loss_prob
    event_t = timeline.t[kept]
    levels = levels[kept]

    jitter = cfg.sample_jitter_ms / 1000.0
    if jitter:
        if jitter >= 0.5 / sensor.rate_hz:
            raise ValueError("sample jitter must stay below half a sampling period")
        t = t + rng.uniform(-jitter, jitter, len(t))

    if len(event_t) == 0:
        signal = np.zeros((len(t), levels.shape[1]))
    else:
        signal = np.stack([ramp_levels(event_t, levels[:, c], t, dynamics)
                           for c in range(levels.shape[1])], axis=1)
    signal *= cfg.channel_factor
    if cfg.noise_sigma:
        signal += rng.normal(0.0, cfg.noise_sigma, signal.shape)
    signal = np.maximum(signal, 0.0)
    return SampleStream(t, signal[:, 0] if sensor.channels == 1 else signal)
