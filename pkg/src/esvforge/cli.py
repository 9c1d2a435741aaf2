"""``esv-forge`` command line: import, keyframes, emit, infer, evaluate,
index, serve, all.

Configuration comes from an INI file (``--config``); individual flags override
file values. Exit codes: 0 success, 1 stage error (with a machine-readable
JSON error summary on stderr), 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .config import PipelineConfig
from .errors import EsvForgeError
from . import pipeline

log = logging.getLogger("esvforge")

STAGES = ("import", "keyframes", "emit", "infer", "evaluate", "index", "serve", "all")

_STAGE_FUNCS = {
    "import": pipeline.stage_import,
    "keyframes": pipeline.stage_keyframes,
    "emit": pipeline.stage_emit,
    "infer": pipeline.stage_infer,
    "evaluate": pipeline.stage_evaluate,
    "index": pipeline.stage_index,
    "serve": pipeline.stage_serve,
}

ALL_ORDER = ("import", "keyframes", "emit", "infer", "evaluate", "index")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esv-forge",
        description="Surgical-video curation, timeline segmentation, and search toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="|".join(STAGES))
    for name, help_text in (
        ("import", "parse annotation exports and assemble surgery timelines"),
        ("keyframes", "compute signatures and select keyframes per clip"),
        ("emit", "write frames/, cutouts/, cutout-frames/ and the labels CSV"),
        ("infer", "run the temporal head over cutout feature sequences"),
        ("evaluate", "score predictions and render the report with ROC figures"),
        ("index", "build and persist the searchable timeline index"),
        ("serve", "serve the index and web UI over HTTP"),
        ("all", "run import, keyframes, emit, infer, evaluate, index in order"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)
    return parser


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, required=True, help="INI config file")
    p.add_argument("--videos-root", type=Path)
    p.add_argument("--out-root", type=Path)
    p.add_argument("--params-file", type=Path)
    p.add_argument("--ui-dir", type=Path)
    p.add_argument("--fps", type=float)
    p.add_argument("--threshold", type=float, dest="keyframe_threshold",
                   help="keyframe cosine-distance threshold")
    p.add_argument("--smoothing-k", type=int, dest="smoothing_k")
    p.add_argument("--seed", type=int)
    p.add_argument("--bitrate", type=int, dest="bitrate_bps",
                   help="compressed video bitrate in bits/s")
    p.add_argument("--bind", help="host:port for the index service")
    p.add_argument("--index-source", choices=("annotation", "prediction"),
                   dest="index_source")


def load_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.from_ini(args.config)
    cfg = cfg.with_overrides(
        videos_root=args.videos_root,
        out_root=args.out_root,
        params_file=args.params_file,
        ui_dir=args.ui_dir,
        fps=args.fps,
        keyframe_threshold=args.keyframe_threshold,
        smoothing_k=args.smoothing_k,
        seed=args.seed,
        bitrate_bps=args.bitrate_bps,
        bind=args.bind,
        index_source=args.index_source,
    )
    cfg.validate()
    return cfg


def _run_stage(name: str, cfg: PipelineConfig) -> None:
    started = time.perf_counter()
    _STAGE_FUNCS[name](cfg)
    log.info("stage=%s elapsed=%.2fs", name, time.perf_counter() - started)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        cfg.out_root.mkdir(parents=True, exist_ok=True)
        if args.command == "all":
            for name in ALL_ORDER:
                _run_stage(name, cfg)
        else:
            _run_stage(args.command, cfg)
    except KeyboardInterrupt:
        return 130
    except (EsvForgeError, OSError, ValueError) as e:
        summary = {"error": type(e).__name__, "message": str(e), "command": args.command}
        print(json.dumps(summary, sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
