"""Reading and writing media files the visualizers consume.

Raw PCM (``.pcm``), little-endian::

    offset  size  field
     0      4     magic b"PCM1"
     4      4     sample rate, uint32 Hz
     8      2*n   mono samples, int16

WAVE (``.wav``) is accepted only as mono 16-bit PCM.

Color logs (``.csv``) hold one row ``t,r,g,b`` per frame with components in
[0, 1]; the frame rate is inferred from the timestamps.

Raw RGB24 frames (``.rgb``), little-endian::

    offset  size        field
     0      4           magic b"RGB1"
     4      2           width, uint16
     6      2           height, uint16
     8      8           frame rate, float64
    16      4           frame count, uint32
    20      3*w*h*n     8-bit R, G, B pixels, frame-major then row-major
"""

from __future__ import annotations

import csv
import re
import struct
import wave
from pathlib import Path

import numpy as np

from .visualizer import AudioTrack, VideoColorTrack

_PCM = struct.Struct("<4sI")
_RGB = struct.Struct("<4sHHdI")
AUDIO_SUFFIXES = (".pcm", ".wav")
VIDEO_SUFFIXES = (".csv", ".rgb")


class MediaFormatError(ValueError):
    pass


def _to_int16(samples) -> np.ndarray:
    x = np.clip(np.asarray(samples, dtype=float), -1.0, 1.0)
    return np.round(x * 32767).astype("<i2")


def write_pcm(path, track: AudioTrack) -> None:
    Path(path).write_bytes(_PCM.pack(b"PCM1", int(track.sample_rate)) + _to_int16(track.samples).tobytes())


def read_pcm(path, **meta) -> AudioTrack:
    data = Path(path).read_bytes()
    if len(data) < _PCM.size:
        raise MediaFormatError(f"{path}: shorter than a PCM header")
    magic, rate = _PCM.unpack_from(data)
    body = data[_PCM.size:]
    if magic != b"PCM1" or rate == 0 or len(body) % 2:
        raise MediaFormatError(f"{path}: not a PCM1 file")
    samples = np.frombuffer(body, dtype="<i2").astype(float) / 32767
    return AudioTrack(np.clip(samples, -1.0, 1.0), float(rate), **meta)


def write_wav(path, track: AudioTrack) -> None:
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(track.sample_rate))
        w.writeframes(_to_int16(track.samples).tobytes())


def read_wav(path, **meta) -> AudioTrack:
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1 or w.getsampwidth() != 2:
                raise MediaFormatError(f"{path}: only mono 16-bit WAVE is supported")
            rate = w.getframerate()
            frames = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise MediaFormatError(f"{path}: {exc}") from exc
    samples = np.frombuffer(frames, dtype="<i2").astype(float) / 32767
    return AudioTrack(np.clip(samples, -1.0, 1.0), float(rate), **meta)


def write_color_log(path, track: VideoColorTrack) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "g", "b"])
        for k, (r, g, b) in enumerate(track.frames):
            w.writerow([repr(k / track.frame_rate), repr(float(r)), repr(float(g)), repr(float(b))])


def read_color_log(path, **meta) -> VideoColorTrack:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["t", "r", "g", "b"]:
            raise MediaFormatError(f"{path}: expected a t,r,g,b header")
        table = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(-1, 4)
    except ValueError as exc:
        if isinstance(exc, MediaFormatError):
            raise
        raise MediaFormatError(f"{path}: {exc}") from exc
    if len(table) < 2:
        raise MediaFormatError(f"{path}: a color log needs at least two frames")
    steps = np.diff(table[:, 0])
    if (steps <= 0).any():
        raise MediaFormatError(f"{path}: timestamps must increase")
    return VideoColorTrack(table[:, 1:], 1.0 / float(np.median(steps)), **meta)


def write_rgb24(path, frames: np.ndarray, frame_rate: float) -> None:
    """``frames`` is ``(n, height, width, 3)`` uint8."""
    frames = np.asarray(frames, dtype=np.uint8)
    n, h, w, _ = frames.shape
    Path(path).write_bytes(_RGB.pack(b"RGB1", w, h, float(frame_rate), n) + frames.tobytes())


def read_rgb24(path, **meta) -> VideoColorTrack:
    data = Path(path).read_bytes()
    if len(data) < _RGB.size:
        raise MediaFormatError(f"{path}: shorter than an RGB24 header")
    magic, w, h, rate, n = _RGB.unpack_from(data)
    body = data[_RGB.size:]
    if magic != b"RGB1" or rate <= 0 or len(body) != 3 * w * h * n:
        raise MediaFormatError(f"{path}: not an RGB24 frame file")
    if not w * h:
        raise MediaFormatError(f"{path}: frames have no pixels")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(n, h * w, 3) / 255.0
    return VideoColorTrack(pixels.mean(axis=1), rate, **meta)


def read_audio(path, **meta) -> AudioTrack:
    suffix = Path(path).suffix.lower()
    if suffix == ".pcm":
        return read_pcm(path, **meta)
    if suffix == ".wav":
        return read_wav(path, **meta)
    raise MediaFormatError(f"{path}: unknown audio format")


def read_video(path, **meta) -> VideoColorTrack:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return read_color_log(path, **meta)
    if suffix == ".rgb":
        return read_rgb24(path, **meta)
    raise MediaFormatError(f"{path}: unknown video format")


def encode_pgm(image: np.ndarray) -> bytes:
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    return f"P5\n{w} {h}\n255\n".encode() + image.tobytes()


def write_pgm(path, image: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(image))


_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+255\s")


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = _PGM_HEADER.match(data)
    if not m:
        raise MediaFormatError(f"{path}: only binary 8-bit PGM is supported")
    w, h = int(m.group(1)), int(m.group(2))
    body = data[m.end():]
    if len(body) != w * h:
        raise MediaFormatError(f"{path}: pixel count does not match the header")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)
