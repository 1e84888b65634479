"""Seeded synthetic media so experiments need no copyrighted material.

Songs are note-onset envelopes (tempo, decay and swing vary by genre) laid
over loudness sections and multiplied by a few sinusoidal partials. Videos
are runs of constant-color scenes with occasional fades. Exfiltration
payloads are the Harvard sentence lists 1-10 and a generated 128x128
grayscale image.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .media import write_color_log, write_pcm, write_pgm
from .visualizer import AudioTrack, VideoColorTrack

GENRES = ("country", "dance", "jazz", "rock")
INDEX = "corpus.json"


@dataclass(frozen=True)
class GenreStyle:
    bpm: tuple[float, float]
    decay_s: float
    swing: float  # fraction of a beat the off-beat is delayed
    fill_prob: float  # chance of an extra note between beats
    floor: float  # sustained level under the notes


STYLES = {
    "country": GenreStyle((88, 118), 0.25, 0.0, 0.35, 0.15),
    "dance": GenreStyle((120, 132), 0.08, 0.0, 0.6, 0.05),
    "jazz": GenreStyle((80, 160), 0.30, 0.16, 0.5, 0.2),
    "rock": GenreStyle((100, 140), 0.15, 0.0, 0.45, 0.3),
}


def synth_song(seed: int, genre: str, duration_s: float = 180.0, sample_rate: int = 2000,
               media_id: str = "", title: str = "") -> AudioTrack:
    if genre not in STYLES:
        raise ValueError(f"unknown genre {genre!r}")
    style = STYLES[genre]
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate

    beat = 60.0 / rng.uniform(*style.bpm)
    onsets = np.arange(0.0, duration_s, beat)
    offbeats = onsets[rng.random(len(onsets)) < style.fill_prob] + beat * (0.5 + style.swing)
    onsets = np.sort(np.concatenate([onsets, offbeats[offbeats < duration_s]]))
    accents = rng.uniform(0.3, 1.0, len(onsets))
    accents[::4] = np.maximum(accents[::4], rng.uniform(0.7, 1.0, len(accents[::4])))

    # loudness sections
    edges = [0.0]
    while edges[-1] < duration_s:
        edges.append(edges[-1] + rng.uniform(6.0, 20.0))
    levels = rng.uniform(0.25, 1.0, len(edges) - 1)
    section = levels[np.searchsorted(edges, t, side="right") - 1]

    env = np.zeros(n)
    first = np.searchsorted(t, onsets)
    tail = int(6 * style.decay_s * sample_rate)
    shape = np.exp(-np.arange(tail) / (style.decay_s * sample_rate))
    for i0, a in zip(first, accents):
        seg = env[i0:i0 + tail]
        np.maximum(seg, a * shape[:len(seg)], out=seg)
    env = section * (style.floor + (1.0 - style.floor) * env)

    freqs = rng.uniform(60.0, 0.4 * sample_rate, 3)
    phases = rng.uniform(0.0, 2 * np.pi, 3)
    carrier = sum(np.sin(2 * np.pi * f * t + p) for f, p in zip(freqs, phases)) / 3.0
    x = env * carrier
    x /= np.abs(x).max()
    return AudioTrack(x, float(sample_rate), media_id, title or media_id, genre)


def synth_video(seed: int, duration_s: float = 600.0, frame_rate: float = 4.0, genre: str = "",
                media_id: str = "", title: str = "") -> VideoColorTrack:
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * frame_rate))
    frames = np.empty((n, 3))
    k = 0
    while k < n:
        length = max(int(frame_rate), int(rng.exponential(5.0) * frame_rate))
        color = rng.uniform(0.0, 1.0, 3) * rng.uniform(0.2, 1.0)
        end = min(n, k + length)
        if rng.random() < 0.2:
            # fade from black
            ramp = np.linspace(0.0, 1.0, end - k)[:, None]
            frames[k:end] = ramp * color
        else:
            frames[k:end] = color
        k = end
    frames /= frames.max()
    return VideoColorTrack(frames, frame_rate, media_id, title or media_id, genre)


def harvard_sentences() -> list[str]:
    text = resources.files("bulbleak").joinpath("data/harvard.txt").read_text()
    return [line for line in text.splitlines() if line.strip()]


def harvard_text() -> bytes:
    return ("\n".join(harvard_sentences()) + "\n").encode("ascii")


def sample_image(size: int = 128) -> np.ndarray:
    """Deterministic grayscale scene: a lit sphere over a striped gradient."""
    y, x = np.mgrid[0:size, 0:size] / (size - 1)
    background = 60 + 120 * x + 25 * np.sin(2 * np.pi * 6 * y)
    r2 = (x - 0.55) ** 2 + (y - 0.45) ** 2
    inside = r2 < 0.09
    shade = np.sqrt(np.clip(1 - r2 / 0.09, 0, 1))
    light = 0.5 + 0.5 * np.clip((0.35 - x + 0.45 - y) * 2 + shade, 0, 1)
    img = np.where(inside, 255 * light * shade + 20, background)
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def corpus_ids(prefix: str, n: int) -> list[str]:
    return [f"{prefix}-{i:03d}" for i in range(n)]


def _seeds(seed: int, n: int, salt: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence([seed, salt]).spawn(n)]


def song_tracks(n: int, seed: int = 0, song_s: float = 180.0) -> list[AudioTrack]:
    """Genres cycle through :data:`GENRES`, so any prefix of the list is balanced."""
    return [synth_song(s, GENRES[i % len(GENRES)], song_s, media_id=media_id)
            for i, (s, media_id) in enumerate(zip(_seeds(seed, n, 1), corpus_ids("song", n)))]


def video_tracks(n: int, seed: int = 0, video_s: float = 600.0) -> list[VideoColorTrack]:
    return [synth_video(s, video_s, genre=GENRES[i % len(GENRES)], media_id=media_id)
            for i, (s, media_id) in enumerate(zip(_seeds(seed, n, 2), corpus_ids("video", n)))]


def write_corpus(root, n_songs: int = 50, n_videos: int = 20, seed: int = 0,
                 song_s: float = 180.0, video_s: float = 600.0) -> Path:
    """Write songs, videos and payloads plus an index; returns the index path."""
    root = Path(root)
    for sub in ("audio", "video", "payloads"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    index = {"format": "bulbleak-corpus/1", "seed": seed, "audio": [], "video": [], "payloads": []}
    for track in song_tracks(n_songs, seed, song_s):
        rel = f"audio/{track.id}.pcm"
        write_pcm(root / rel, track)
        index["audio"].append({"id": track.id, "title": track.title, "genre": track.genre, "path": rel})
    for track in video_tracks(n_videos, seed, video_s):
        rel = f"video/{track.id}.csv"
        write_color_log(root / rel, track)
        index["video"].append({"id": track.id, "title": track.title, "genre": track.genre, "path": rel})
    (root / "payloads" / "harvard.txt").write_bytes(harvard_text())
    write_pgm(root / "payloads" / "test-image.pgm", sample_image())
    index["payloads"] = ["payloads/harvard.txt", "payloads/test-image.pgm"]
    path = root / INDEX
    path.write_text(json.dumps(index, indent=1, sort_keys=True) + "\n")
    return path
