"""M-ary ASK over a bulb's infrared power level.

Frame on the wire, one symbol per clock period::

    start   8 periods alternating max / zero
    payload ceil(bits / log2 M) data symbols, with stuffing (below)
    end     max, zero, zero, max

Stuffing: whenever the last three symbols sent were max, zero, zero, a zero
symbol is inserted, so the end pattern can never appear inside a payload.
The receiver runs the same rule to drop stuffed symbols. The rule sees the
start pattern too, because its trailing max, zero can begin a false end.

Receiver: the start pattern is located by normalized cross-correlation with
its ideal slewed trace, which also fixes the clock phase. Each symbol is read as
the median of the samples between ``max(rise, fall)`` and the end of its
period, which is the only part of the period guaranteed to be settled (the last 0.05 s with the
default 0.45 s rise and 0.5 s clock).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from .optics import BulbDynamics, ChannelConfig, SampleStream, SensorKind, observe, ramp_levels
from .protocol import FrameAddress, FrameHeader, Packet, SetInfrared
from .visualizer import Timeline

U16 = 65535
START_PERIODS = 8
LOCK_THRESHOLD = 0.3


class NoStartSymbol(ValueError):
    pass


class NoEndSymbol(ValueError):
    def __init__(self, message: str, partial: "Demodulated"):
        super().__init__(message)
        self.partial = partial


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class AskConfig:
    M: int = 256
    clock_period_s: float = 0.5
    rise_time_s: float = 0.45
    fall_time_s: float = 0.2

    def __post_init__(self):
        if not 2 <= self.M <= 65536 or self.M & (self.M - 1):
            raise ValueError("M must be a power of two in [2, 65536]")
        if self.clock_period_s <= max(self.rise_time_s, self.fall_time_s):
            raise ValueError("clock period must exceed the rise and fall times")

    @property
    def bits_per_symbol(self) -> int:
        return self.M.bit_length() - 1

    @property
    def dynamics(self) -> BulbDynamics:
        return BulbDynamics(self.rise_time_s, self.fall_time_s)

    @property
    def settle_s(self) -> float:
        return max(self.rise_time_s, self.fall_time_s)


def channel_bandwidth(cfg: AskConfig) -> float:
    """Bits per second: log2(M) symbols-worth of bits each clock period."""
    return cfg.bits_per_symbol / cfg.clock_period_s


def level_power(level, M: int):
    """SetInfrared power for a symbol level: floor(i * 65535 / (M - 1))."""
    return np.asarray(level, dtype=np.int64) * U16 // (M - 1)


def start_symbol(M: int) -> list[int]:
    return [M - 1, 0] * (START_PERIODS // 2)


def end_symbol(M: int) -> list[int]:
    return [M - 1, 0, 0, M - 1]


@dataclass
class AskFrame:
    payload: list[int]  # data symbols, before stuffing
    n_bits: int
    M: int

    @property
    def pad_bits(self) -> int:
        return len(self.payload) * (self.M.bit_length() - 1) - self.n_bits

    def stream(self) -> list[int]:
        """Every symbol on the wire: start, stuffed payload, end."""
        return start_symbol(self.M) + stuff(self.payload, self.M) + end_symbol(self.M)


def _is_stuff_point(history: list[int], M: int) -> bool:
    return len(history) >= 3 and history[-3] == M - 1 and history[-2] == 0 and history[-1] == 0


def stuff(payload, M: int) -> list[int]:
    history = start_symbol(M)
    for level in payload:
        history.append(int(level))
        if _is_stuff_point(history, M):
            history.append(0)
    return history[START_PERIODS:]


def unstuff(received, M: int) -> list[int]:
    history = start_symbol(M)
    out = []
    skip = False
    for level in received:
        history.append(int(level))
        if skip:
            skip = False
            continue
        out.append(int(level))
        skip = _is_stuff_point(history, M)
    return out


def symbol_map(data: bytes, cfg: AskConfig) -> AskFrame:
    """Pack bits big-endian into log2(M)-bit symbols, zero-padding the last one."""
    b = cfg.bits_per_symbol
    bits = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))
    n_sym = -(-len(bits) // b)
    padded = np.zeros(n_sym * b, dtype=np.int64)
    padded[:len(bits)] = bits
    weights = 1 << np.arange(b - 1, -1, -1, dtype=np.int64)
    levels = padded.reshape(n_sym, b) @ weights if n_sym else np.zeros(0, dtype=np.int64)
    return AskFrame([int(x) for x in levels], len(bits), cfg.M)


def decode_symbols(levels, cfg: AskConfig, n_bits: int, strict: bool = True) -> bytes:
    """Inverse of :func:`symbol_map`. With ``strict=False`` a wrong symbol
    count is zero-filled or cut instead of raising."""
    b = cfg.bits_per_symbol
    n_sym = -(-n_bits // b)
    levels = np.asarray(list(levels), dtype=np.int64)
    if len(levels) != n_sym:
        if strict:
            raise LengthMismatch(f"expected {n_sym} symbols, got {len(levels)}")
        levels = np.concatenate([levels, np.zeros(max(0, n_sym - len(levels)), dtype=np.int64)])[:n_sym]
    if len(levels) and (levels.min() < 0 or levels.max() >= cfg.M):
        raise ValueError("symbol level out of range")
    shifts = np.arange(b - 1, -1, -1, dtype=np.int64)
    bits = ((levels[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)[:n_bits]
    return np.packbits(bits).tobytes()


@dataclass
class Transmission:
    packets: list[Packet]
    timeline: Timeline
    ideal: SampleStream
    frame: AskFrame


def modulate(frame: AskFrame, cfg: AskConfig, lead_in_s: float = 1.0,
             rate_hz: float = SensorKind.INFRARED.rate_hz, source: int = 0) -> Transmission:
    """One SetInfrared per clock period, then one more that switches the emitter off."""
    if frame.M != cfg.M:
        raise ValueError("frame and config disagree on M")
    stream = frame.stream() + [0]
    powers = level_power(stream, cfg.M)
    t = lead_in_s + np.arange(len(stream)) * cfg.clock_period_s
    timeline = Timeline(t, float(t[-1] + cfg.clock_period_s), infrared=powers / U16)
    packets = [Packet(SetInfrared(int(p)), FrameHeader(source=source), FrameAddress(sequence=k))
               for k, p in enumerate(powers)]
    ts = np.arange(int(math.floor(timeline.end * rate_hz))) / rate_hz
    ideal = SampleStream(ts, ramp_levels(t, timeline.infrared, ts, cfg.dynamics))
    return Transmission(packets, timeline, ideal, frame)


def transmit_and_observe(data: bytes, cfg: AskConfig, channel: ChannelConfig) -> tuple[AskFrame, SampleStream]:
    frame = symbol_map(data, cfg)
    tx = modulate(frame, cfg)
    return frame, observe(tx.timeline, SensorKind.INFRARED, channel, start=0.0, phase=0.0,
                          dynamics=cfg.dynamics)


@dataclass
class Demodulated:
    payload: list[int]
    truncated: bool = False
    lock_index: int = 0
    lock_score: float = 0.0
    high: float = 0.0
    low: float = 0.0
    received: list[int] = field(default_factory=list)


def _preamble_template(cfg: AskConfig, rate_hz: float) -> np.ndarray:
    n = int(round(START_PERIODS * cfg.clock_period_s * rate_hz))
    ts = np.arange(n) / rate_hz
    t_ev = np.arange(START_PERIODS) * cfg.clock_period_s
    return ramp_levels(t_ev, level_power(start_symbol(cfg.M), cfg.M) / U16, ts, cfg.dynamics)


def _lock(x: np.ndarray, template: np.ndarray, search: int) -> tuple[int, float]:
    """Offset and score of the best normalized cross-correlation in x[:search + len(template)]."""
    n = len(template)
    seg = x[:search + n]
    if len(seg) < n:
        raise NoStartSymbol("trace shorter than the start symbol")
    tpl = template - template.mean()
    tpl /= np.linalg.norm(tpl)
    num = fftconvolve(seg, tpl[::-1], mode="valid")
    c1 = np.concatenate([[0.0], np.cumsum(seg)])
    c2 = np.concatenate([[0.0], np.cumsum(seg * seg)])
    s1 = c1[n:] - c1[:-n]
    var = np.maximum(c2[n:] - c2[:-n] - s1 * s1 / n, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(var > 1e-24, num / np.sqrt(var), 0.0)
    best = int(np.argmax(score))
    return best, float(score[best])


def demodulate(trace: SampleStream, cfg: AskConfig, rate_hz: Optional[float] = None,
               search_s: float = 30.0, strict: bool = False,
               window_s: Optional[float] = None) -> Demodulated:
    x = np.asarray(trace.values, dtype=float)
    if rate_hz is None:
        rate_hz = 1.0 / float(np.median(np.diff(trace.t))) if len(trace) > 1 else SensorKind.INFRARED.rate_hz
    template = _preamble_template(cfg, rate_hz)
    offset, score = _lock(x, template, int(search_s * rate_hz))
    if score < LOCK_THRESHOLD:
        raise NoStartSymbol(f"no start symbol (best correlation {score:.3f})")

    period = cfg.clock_period_s * rate_hz
    n_sym = int((len(x) - offset) // period)
    k = np.arange(n_sym)
    hi_idx = offset + np.round((k + 1) * period).astype(np.int64)
    if window_s is None:
        lo_idx = offset + np.round(k * period + cfg.settle_s * rate_hz).astype(np.int64)
    else:
        lo_idx = hi_idx - max(1, int(round(window_s * rate_hz)))
    # the sensor clamps at zero, which lifts the mean of any level within a
    # few sigma of dark; the median of clamped samples is not lifted
    width = int(max(1, (hi_idx - lo_idx).min()))
    settled = x[hi_idx[:, None] - width + np.arange(width)]
    levels_seen = np.median(settled, axis=1)
    high = float(np.median(settled[0:START_PERIODS:2]))
    low = float(np.median(settled[1:START_PERIODS:2]))
    if high <= low:
        raise NoStartSymbol("start symbol has no amplitude contrast")
    a = np.clip((levels_seen[START_PERIODS:] - low) / (high - low), 0.0, 1.0)
    levels = np.ceil(a * (cfg.M - 1) - 0.5).astype(np.int64)

    end = end_symbol(cfg.M)
    received: list[int] = []
    for lv in levels:
        received.append(int(lv))
        if received[-4:] == end:
            result = Demodulated(unstuff(received[:-4], cfg.M), False, offset, score, high, low, received)
            return result
    result = Demodulated(unstuff(received, cfg.M), True, offset, score, high, low, received)
    if strict:
        raise NoEndSymbol("trace ended before the end symbol", result)
    return result


def bit_errors(original: bytes, reconstructed: bytes) -> tuple[int, int, bool]:
    """(differing bits, compared bits, whether the shorter input was zero-extended)."""
    a = np.frombuffer(bytes(original), dtype=np.uint8)
    b = np.frombuffer(bytes(reconstructed), dtype=np.uint8)
    n = max(len(a), len(b))
    padded = len(a) != len(b)
    a = np.pad(a, (0, n - len(a)))
    b = np.pad(b, (0, n - len(b)))
    return int(np.unpackbits(a ^ b).sum()), 8 * n, padded


def bit_error_rate(original: bytes, reconstructed: bytes) -> float:
    errors, total, _ = bit_errors(original, reconstructed)
    return errors / total if total else 0.0


def symbol_error_locality(sent, received) -> tuple[int, float]:
    """Symbol errors over the common prefix and the fraction landing on an adjacent level."""
    n = min(len(sent), len(received))
    s = np.asarray(sent[:n], dtype=np.int64)
    r = np.asarray(received[:n], dtype=np.int64)
    wrong = s != r
    count = int(wrong.sum())
    if not count:
        return 0, 1.0
    return count, float((np.abs(s - r)[wrong] == 1).mean())


@dataclass
class LinkResult:
    reconstructed: bytes
    ber: float
    padded: bool
    truncated: bool
    locked: bool
    symbol_errors: int
    adjacent_fraction: float


def run_link(data: bytes, cfg: AskConfig, channel: ChannelConfig, window_s: Optional[float] = None) -> LinkResult:
    """Encode, transmit, observe, demodulate and decode one payload."""
    frame, trace = transmit_and_observe(data, cfg, channel)
    try:
        demod = demodulate(trace, cfg, window_s=window_s)
    except NoStartSymbol:
        return LinkResult(b"", bit_error_rate(data, b""), True, True, False, len(frame.payload), 0.0)
    out = decode_symbols(demod.payload, cfg, frame.n_bits, strict=False)
    errors, _, padded = bit_errors(data, out)
    n_err, adjacent = symbol_error_locality(frame.payload, demod.payload)
    return LinkResult(out, bit_error_rate(data, out), padded or len(demod.payload) != len(frame.payload),
                      demod.truncated, True, n_err, adjacent)
