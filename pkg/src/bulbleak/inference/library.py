"""Reference templates and their on-disk library.

Template file layout (little-endian)::

    offset  size  field
     0      4     magic b"BLTP"
     4      1     format version (1)
     5      1     kind: 0 audio, 1 video
     6      1     channels (1 or 3)
     7      1     flags: bit 0 set when the template is usable
     8      8     sample rate, float64 Hz
    16      4     length in samples, uint32
    20      8*n*c values, float64, row-major
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ..visualizer import (AUDIO_TICK_S, VIDEO_TICK_S, AudioTrack, VideoColorTrack,
                          peak_hold_envelope, per_second_colors)

AUDIO = "audio"
VIDEO = "video"
_KINDS = (AUDIO, VIDEO)
_HEADER = struct.Struct("<4sBBBBdI")
_MAGIC = b"BLTP"
MANIFEST = "manifest.json"


class EmptyLibrary(ValueError):
    pass


class TemplateFormatError(ValueError):
    pass


@dataclass
class Template:
    id: str
    kind: str
    series: np.ndarray
    rate_hz: float
    title: str = ""
    genre: str = ""
    usable: bool = True

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown template kind {self.kind!r}")
        self.series = np.asarray(self.series, dtype=float)
        if self.kind == VIDEO:
            self.series = self.series.reshape(-1, 3)

    @property
    def channels(self) -> int:
        return 1 if self.series.ndim == 1 else self.series.shape[1]

    def to_bytes(self) -> bytes:
        flags = 1 if self.usable else 0
        head = _HEADER.pack(_MAGIC, 1, _KINDS.index(self.kind), self.channels, flags,
                            float(self.rate_hz), len(self.series))
        return head + np.ascontiguousarray(self.series, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, id: str, title: str = "", genre: str = "") -> "Template":
        if len(data) < _HEADER.size:
            raise TemplateFormatError("template file shorter than its header")
        magic, version, kind, channels, flags, rate, n = _HEADER.unpack_from(data)
        if magic != _MAGIC or version != 1 or kind > 1 or channels not in (1, 3):
            raise TemplateFormatError("not a template file")
        body = data[_HEADER.size:]
        if len(body) != 8 * n * channels:
            raise TemplateFormatError("template body length does not match its header")
        values = np.frombuffer(body, dtype="<f8").astype(float)
        if channels == 3:
            values = values.reshape(n, 3)
        return cls(id, _KINDS[kind], values, rate, title, genre, bool(flags & 1))


def _normalized(series: np.ndarray) -> tuple[np.ndarray, bool]:
    top = series.max() if series.size else 0.0
    if top <= 0:
        return np.zeros_like(series), False
    return series / top, True


def build_audio_template(track: AudioTrack) -> Template:
    """Peak-hold |amplitude| per 100 ms, scaled to max 1. Silence gives an unusable template."""
    series, usable = _normalized(peak_hold_envelope(track.samples, track.sample_rate, AUDIO_TICK_S))
    return Template(track.id, AUDIO, series, 1 / AUDIO_TICK_S, track.title, track.genre, usable)


def build_video_template(track: VideoColorTrack) -> Template:
    """Per-second mean color, scaled so the largest component is 1."""
    series, usable = _normalized(per_second_colors(track))
    return Template(track.id, VIDEO, series, 1 / VIDEO_TICK_S, track.title, track.genre, usable)


@dataclass
class ReferenceLibrary:
    templates: dict[str, Template] = field(default_factory=dict)

    def __post_init__(self):
        kinds = {t.kind for t in self.templates.values()}
        if len(kinds) > 1:
            raise ValueError("a library holds one kind of template")

    @classmethod
    def from_templates(cls, templates: Iterable[Template]) -> "ReferenceLibrary":
        lib = cls()
        for t in templates:
            lib.add(t)
        return lib

    def add(self, template: Template) -> None:
        if template.id in self.templates:
            raise ValueError(f"duplicate media id {template.id!r}")
        if self.templates and template.kind != self.kind:
            raise ValueError("a library holds one kind of template")
        self.templates[template.id] = template

    @property
    def kind(self) -> str | None:
        return next(iter(self.templates.values())).kind if self.templates else None

    def __len__(self):
        return len(self.templates)

    def __iter__(self) -> Iterator[Template]:
        for key in sorted(self.templates):
            yield self.templates[key]

    def __getitem__(self, media_id: str) -> Template:
        return self.templates[media_id]

    def subset(self, ids: Iterable[str]) -> "ReferenceLibrary":
        return ReferenceLibrary.from_templates(self.templates[i] for i in sorted(set(ids)))

    def save(self, directory) -> Path:
        root = Path(directory)
        (root / "templates").mkdir(parents=True, exist_ok=True)
        entries = []
        for t in self:
            rel = f"templates/{t.id}.tpl"
            (root / rel).write_bytes(t.to_bytes())
            entries.append({"id": t.id, "kind": t.kind, "title": t.title, "genre": t.genre,
                            "usable": t.usable, "path": rel})
        manifest = {"format": "bulbleak-library/1", "kind": self.kind, "templates": entries}
        path = root / MANIFEST
        path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, directory) -> "ReferenceLibrary":
        root = Path(directory)
        manifest = json.loads((root / MANIFEST).read_text())
        if manifest.get("format") != "bulbleak-library/1":
            raise TemplateFormatError("unsupported library manifest")
        lib = cls()
        for e in manifest["templates"]:
            t = Template.from_bytes((root / e["path"]).read_bytes(), e["id"], e.get("title", ""),
                                    e.get("genre", ""))
            if t.kind != e["kind"]:
                raise TemplateFormatError(f"{e['id']}: manifest kind disagrees with file")
            lib.add(t)
        return lib
