"""Command-line entry point: ``bulbleak <subcommand> ...``.

Exit status is 0 only when every grid cell ran; 1 when some cells failed
(their rows are still written); 2 for bad configs or unusable inputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import corpus
from .experiments import (ConfigError, ExperimentConfig, MissingRun, build_library, report, run_attack,
                          run_exfil)
from .inference import EmptyLibrary


def _config(args, scenario: str) -> ExperimentConfig:
    data = {"scenario": scenario}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        data.setdefault("scenario", scenario)
        if data["scenario"] != scenario:
            raise ConfigError(f"{args.config} is for scenario {data['scenario']!r}, not {scenario!r}")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = args.out
    for key in ("corpus", "library"):
        if getattr(args, key, None):
            data[key] = getattr(args, key)
    return ExperimentConfig.from_dict(data)


def _attack(args, scenario: str) -> int:
    outcome = run_attack(_config(args, scenario))
    for cell in outcome.cells:
        print(f"window {cell['window_s']:g}s vt {cell['visible_transmittance']:g} {cell['hue_mode']} "
              f"{cell['align_mode']} library {cell['library_fraction']:g}: mean rank {cell['mean_rank']:.3f}")
    return 0 if outcome.ok else 1


def _exfil(args) -> int:
    outcome = run_exfil(_config(args, "exfil"))
    print(f"noise sigma {outcome.noise_sigma:.6g}")
    for row in outcome.rows:
        print(f"M {row['M']} distance {row['distance_m']:g}m {row['payload']}: BER {row['ber']:.4f}")
    return 0 if outcome.ok else 1


def _build(args) -> int:
    lib, errors = build_library(args.corpus, args.kind, args.out)
    print(f"{len(lib)} templates, {len(errors)} unreadable files")
    return 0 if not errors else 1


def _report(args) -> int:
    for path in report(args.run):
        print(path)
    return 0


def _gen(args) -> int:
    path = corpus.write_corpus(args.out, args.songs, args.videos, args.seed, args.song_s, args.video_s)
    print(path)
    return 0


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bulbleak", description="Smart-bulb side-channel simulations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="write a seeded synthetic corpus")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--songs", type=int, default=50)
    g.add_argument("--videos", type=int, default=20)
    g.add_argument("--song-s", type=float, default=180.0)
    g.add_argument("--video-s", type=float, default=600.0)
    g.set_defaults(func=_gen)

    b = sub.add_parser("build-library", help="template every media file in a corpus")
    b.add_argument("--corpus", required=True)
    b.add_argument("--kind", choices=("audio", "video"), default="audio")
    b.add_argument("--out", required=True)
    b.set_defaults(func=_build)

    for name, scenario in (("attack-audio", "audio"), ("attack-video", "video")):
        a = sub.add_parser(name, help=f"run the {scenario} identification grid")
        _run_flags(a)
        a.add_argument("--corpus")
        a.add_argument("--library")
        a.set_defaults(func=lambda args, s=scenario: _attack(args, s))

    x = sub.add_parser("exfil", help="run the infrared exfiltration grid")
    _run_flags(x)
    x.add_argument("--corpus")
    x.set_defaults(func=_exfil)

    r = sub.add_parser("report", help="write plot-data CSVs for a finished run")
    r.add_argument("run")
    r.set_defaults(func=_report)
    return p


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MissingRun, EmptyLibrary, FileNotFoundError) as exc:
        print(f"bulbleak: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
