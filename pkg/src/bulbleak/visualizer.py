"""Bulb-side multimedia visualization: audio and video to SetColor packet streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Union

import numpy as np

from .colorlab import HsbColor, RgbColor, rgb_to_hsb_array
from .protocol import FrameAddress, FrameHeader, Packet, SetColor

AUDIO_TICK_S = 0.1
VIDEO_TICK_S = 1.0
U16 = 65535


class EmptyTrack(ValueError):
    pass


class EmptyFrame(ValueError):
    pass


@dataclass
class AudioTrack:
    samples: np.ndarray
    sample_rate: float
    id: str = ""
    title: str = ""
    genre: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.samples.size and np.abs(self.samples).max() > 1.0:
            raise ValueError("samples must be normalized to [-1, 1]")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class VideoColorTrack:
    frames: np.ndarray  # (n, 3) per-frame average RGB
    frame_rate: float
    id: str = ""
    title: str = ""
    genre: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float).reshape(-1, 3)
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        if self.frames.size and (self.frames.min() < 0 or self.frames.max() > 1):
            raise ValueError("frame colors must lie in [0, 1]")

    @property
    def duration(self) -> float:
        return len(self.frames) / self.frame_rate


@dataclass(frozen=True)
class StaticHue:
    hue: float = 0.0
    saturation: float = 1.0

    def __post_init__(self):
        if not 0 <= self.hue < 360:
            raise ValueError("static hue must lie in [0, 360)")


@dataclass(frozen=True)
class RandomHue:
    change_period_ms: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.change_period_ms < 100:
            raise ValueError("change_period_ms must be at least 100")


HuePolicy = Union[StaticHue, RandomHue]


@dataclass(frozen=True)
class EmissionEvent:
    t: float
    color: Optional[HsbColor] = None
    infrared: Optional[float] = None


@dataclass
class Timeline:
    """Light-state changes of one bulb, stored column-wise.

    ``hsb`` holds unquantized (hue, saturation, brightness) rows for visible
    streams; ``infrared`` holds power fractions in [0, 1] for exfiltration
    streams. ``end`` is when the stream stops (last event plus one tick).
    """

    t: np.ndarray
    end: float
    hsb: Optional[np.ndarray] = None
    infrared: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("event times must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def events(self) -> Iterator[EmissionEvent]:
        for i, t in enumerate(self.t):
            color = HsbColor(*self.hsb[i]) if self.hsb is not None else None
            ir = float(self.infrared[i]) if self.infrared is not None else None
            yield EmissionEvent(float(t), color, ir)

    @classmethod
    def from_events(cls, events, end: float | None = None) -> "Timeline":
        events = list(events)
        if not events:
            raise ValueError("no events")
        t = [e.t for e in events]
        hsb = ir = None
        if events[0].color is not None:
            hsb = np.array([tuple(e.color) for e in events])
        if events[0].infrared is not None:
            ir = np.array([e.infrared for e in events])
        if end is None:
            end = t[-1] + (t[-1] - t[-2] if len(t) > 1 else 1.0)
        return cls(np.array(t), end, hsb, ir)


@dataclass
class Rendering:
    packets: list[Packet]
    timeline: Timeline


# ------------------------------------------------------------------- envelopes

def _window_starts(n_samples: int, sample_rate: float, tick: float) -> np.ndarray:
    n_ticks = math.ceil(n_samples / (sample_rate * tick) - 1e-9)
    return np.floor(np.arange(n_ticks) * sample_rate * tick + 1e-9).astype(np.int64)


def peak_hold_envelope(samples, sample_rate: float, tick: float = AUDIO_TICK_S) -> np.ndarray:
    """max |amplitude| over each tick-long window, one value per tick."""
    samples = np.abs(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise EmptyTrack("no samples")
    return np.maximum.reduceat(samples, _window_starts(len(samples), sample_rate, tick))


def rms_envelope(samples, sample_rate: float, tick: float = AUDIO_TICK_S) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptyTrack("no samples")
    starts = _window_starts(len(samples), sample_rate, tick)
    sums = np.add.reduceat(samples ** 2, starts)
    counts = np.diff(np.append(starts, len(samples)))
    return np.sqrt(sums / counts)


Envelope = Callable[[np.ndarray, float, float], np.ndarray]


# ------------------------------------------------------------------ streams

def hue_sequence(policy: HuePolicy, n_ticks: int, tick_s: float = AUDIO_TICK_S) -> np.ndarray:
    """Integer hue per tick. Depends only on the policy, never on the audio."""
    if isinstance(policy, StaticHue):
        return np.full(n_ticks, float(round(policy.hue) % 360))
    ticks_per_change = policy.change_period_ms / (tick_s * 1000.0)
    slot = np.floor(np.arange(n_ticks) / ticks_per_change + 1e-9).astype(np.int64)
    n_slots = int(slot[-1]) + 1 if n_ticks else 0
    draws = np.random.default_rng(policy.seed).uniform(0.0, 360.0, n_slots)
    return (np.round(draws) % 360)[slot]


def hsb_to_packet(hsb, sequence: int, source: int = 0, target: int = 0) -> Packet:
    h, s, b = hsb
    payload = SetColor(int(round(h / 360.0 * U16)) % (U16 + 1), int(round(s * U16)),
                       int(round(b * U16)))
    return Packet(payload, FrameHeader(source=source), FrameAddress(target=target, sequence=sequence))


def _audio_states(track: AudioTrack, policy: HuePolicy, envelope: Envelope) -> np.ndarray:
    if len(track.samples) == 0:
        raise EmptyTrack(f"track {track.id!r} is empty")
    level = np.clip(envelope(track.samples, track.sample_rate, AUDIO_TICK_S), 0.0, 1.0)
    sat = policy.saturation if isinstance(policy, StaticHue) else 1.0
    return np.stack([hue_sequence(policy, len(level)), np.full(len(level), float(sat)), level], axis=1)


def iter_audio_stream(track: AudioTrack, policy: HuePolicy = StaticHue(),
                      envelope: Envelope = peak_hold_envelope,
                      source: int = 0) -> Iterator[tuple[Packet, EmissionEvent]]:
    """One (packet, event) pair per 100 ms tick.

    Tick k covers [0.1k, 0.1(k+1)) of the track and is emitted when that
    window closes, at t = 0.1(k+1).
    """
    for k, row in enumerate(_audio_states(track, policy, envelope)):
        yield (hsb_to_packet(row, k % 256, source),
               EmissionEvent(round((k + 1) * AUDIO_TICK_S, 9), HsbColor(*row)))


def audio_visualize(track: AudioTrack, policy: HuePolicy = StaticHue(),
                    envelope: Envelope = peak_hold_envelope, source: int = 0) -> Rendering:
    hsb = _audio_states(track, policy, envelope)
    t = np.round((np.arange(len(hsb)) + 1) * AUDIO_TICK_S, 9)
    packets = [hsb_to_packet(row, k % 256, source) for k, row in enumerate(hsb)]
    return Rendering(packets, Timeline(t, float(t[-1] + AUDIO_TICK_S), hsb=hsb))


def average_frame_rgb(frame) -> RgbColor:
    """Component-wise mean over a (height, width, 3) pixel grid."""
    arr = np.asarray(frame, dtype=float)
    if arr.size == 0:
        raise EmptyFrame("frame has no pixels")
    return RgbColor(*(float(x) for x in arr.reshape(-1, 3).mean(axis=0)))


def per_second_colors(track: VideoColorTrack) -> np.ndarray:
    """Average frame color over each whole second of the track."""
    if len(track.frames) == 0:
        raise EmptyTrack(f"track {track.id!r} is empty")
    second = np.floor(np.arange(len(track.frames)) / track.frame_rate + 1e-9).astype(np.int64)
    n = int(second[-1]) + 1
    sums = np.zeros((n, 3))
    np.add.at(sums, second, track.frames)
    counts = np.bincount(second, minlength=n)[:, None]
    return sums / np.maximum(counts, 1)


def video_visualize(track: VideoColorTrack, source: int = 0) -> Rendering:
    """One SetColor per second carrying the HSB of that second's mean color."""
    colors = per_second_colors(track)
    hsb = rgb_to_hsb_array(colors)
    t = np.arange(1, len(colors) + 1, dtype=float) * VIDEO_TICK_S
    packets = [hsb_to_packet(row, k % 256, source) for k, row in enumerate(hsb)]
    return Rendering(packets, Timeline(t, float(t[-1] + VIDEO_TICK_S), hsb=hsb))
