"""Ranking a normalized query against every template in a library."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .elastic import as_series, dtw, osb, sliding_distance
from .library import VIDEO, EmptyLibrary, ReferenceLibrary, Template

GENRES = ("country", "dance", "jazz", "rock")
MATCHERS = ("dtw", "osb", "mdtw")
MODES = ("sliding", "whole")


class MissingGenre(ValueError):
    pass


@dataclass
class MatchResult:
    ranking: list[tuple[str, float]]
    truth: Optional[str] = None
    genres: dict[str, str] = field(default_factory=dict)

    @property
    def rank_of_truth(self) -> Optional[int]:
        if self.truth is None:
            return None
        for rank, (media_id, _) in enumerate(self.ranking, 1):
            if media_id == self.truth:
                return rank
        return None

    @property
    def best(self) -> str:
        return self.ranking[0][0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rank", "media_id", "distance", "is_truth"])
            for rank, (media_id, d) in enumerate(self.ranking, 1):
                w.writerow([rank, media_id, repr(d), int(media_id == self.truth)])


def default_skip_penalty(template: Template) -> float:
    """Mean squared template amplitude."""
    return float(np.mean(np.square(template.series)))


def template_distance(query: np.ndarray, template: Template, matcher: str, mode: str,
                      band: Optional[float], skip_penalty: Optional[float], stride_s: float) -> float:
    penalty = default_skip_penalty(template) if skip_penalty is None else skip_penalty
    metric = "osb" if matcher == "osb" else "dtw"
    if mode == "whole":
        if metric == "osb":
            return osb(query, template.series, penalty)
        return dtw(query, template.series, band)
    stride = max(1, int(round(stride_s * template.rate_hz)))
    d, _ = sliding_distance(query, template.series, stride, metric, band, penalty)
    return d


def match_profile(query, lib: ReferenceLibrary, matcher: str = "dtw", mode: str = "sliding",
                  band: Optional[float] = 0.1, skip_penalty: Optional[float] = None,
                  stride_s: float = 1.0, truth: Optional[str] = None, workers: int = 1) -> MatchResult:
    """Distance of ``query`` to every usable template, ascending, ties by media id.

    The query is rescaled to max 1. In ``sliding`` mode each template is
    scanned with windows of the query's length every ``stride_s`` seconds,
    each window rescaled to its own max, and the best window counts. In
    ``whole`` mode the query is aligned against the entire template.
    """
    if matcher not in MATCHERS:
        raise ValueError(f"unknown matcher {matcher!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if len(lib) == 0:
        raise EmptyLibrary("library has no templates")
    q = as_series(query)
    expected = 3 if lib.kind == VIDEO else 1
    if q.shape[1] != expected or (matcher == "mdtw") != (lib.kind == VIDEO):
        raise ValueError(f"{matcher} query of width {q.shape[1]} cannot search a {lib.kind} library")
    top = q.max()
    if top > 0:
        q = q / top
    if expected == 1:
        q = q[:, 0]

    usable = [t for t in lib if t.usable]

    def one(t: Template) -> tuple[str, float]:
        return t.id, template_distance(q, t, matcher, mode, band, skip_penalty, stride_s)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            scored = list(pool.map(one, usable))
    else:
        scored = [one(t) for t in usable]
    scored.sort(key=lambda item: (item[1], item[0]))
    return MatchResult(scored, truth, {t.id: t.genre for t in lib})


def genre_confusion(results: Sequence[MatchResult], genres: Sequence[str] = GENRES) -> np.ndarray:
    """Rows: true genre; columns: genre of the rank-1 prediction."""
    index = {g: i for i, g in enumerate(genres)}
    matrix = np.zeros((len(genres), len(genres)), dtype=np.int64)
    for r in results:
        true_genre = r.genres.get(r.truth) if r.truth is not None else None
        guess = r.genres.get(r.best) if r.ranking else None
        if true_genre not in index or guess not in index:
            raise MissingGenre(f"result for {r.truth!r} lacks a known genre label")
        matrix[index[true_genre], index[guess]] += 1
    return matrix
