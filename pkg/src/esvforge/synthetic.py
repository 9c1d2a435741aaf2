"""Procedural demo corpus: scripted multi-clip surgeries with hard scene
changes, frame image sequences, annotation exports, and clip manifests.

The corpus stands in for real recordings, which are access-restricted. Scene
patterns are binary block textures inside a bright disc on black, so
signatures are constant within a scene and far apart between scenes; scene
boundaries land on the frame grid, which makes the expected keyframe set
exactly the scene starts.

Layout written under ``root`` (one folder per surgery)::

    surg-001/
      surg-001.json        annotation export
      clips.csv            surgery_id, clip_id, part_index, duration_s
      frames/{clip}/frame_{i:06}.png
"""
from __future__ import annotations

import argparse
import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .taxonomy import TaxonomyRegistry, default_registry, format_triplet


@dataclass(frozen=True)
class ScriptedScene:
    duration_s: float
    label: str | None  # None leaves the scene unlabelled in the export


@dataclass(frozen=True)
class ScriptedClip:
    clip_id: str
    part_index: int
    scenes: tuple[ScriptedScene, ...]

    @property
    def duration_s(self) -> float:
        return sum(s.duration_s for s in self.scenes)

    @property
    def scene_change_times(self) -> list[float]:
        """Clip-local start times of every scene after the first."""
        times, t = [], 0.0
        for scene in self.scenes[:-1]:
            t += scene.duration_s
            times.append(t)
        return times


@dataclass(frozen=True)
class ScriptedSurgery:
    surgery_id: str
    clips: tuple[ScriptedClip, ...]

    @property
    def total_duration_s(self) -> float:
        return sum(c.duration_s for c in self.clips)


@dataclass(frozen=True)
class CorpusSpec:
    root: Path
    surgeries: tuple[ScriptedSurgery, ...]
    fps: float
    frame_size: int


def _plausible_labels(registry: TaxonomyRegistry, rng: np.random.Generator, n: int) -> list[str]:
    """A workflow-shaped label sequence: phases in order, tasks within phase."""
    labels = []
    phase_cycle = list(registry.phases)
    for i in range(n):
        phase = phase_cycle[min(i * len(phase_cycle) // n, len(phase_cycle) - 1)]
        tasks = registry.tasks_of_phase[phase]
        task = tasks[rng.integers(len(tasks))]
        action = registry.actions[rng.integers(len(registry.actions))]
        labels.append(format_triplet(registry.triplet(phase, task, action)))
    return labels


def script_corpus(n_surgeries: int = 3, seed: int = 7,
                  registry: TaxonomyRegistry | None = None,
                  unlabelled_scene: bool = True) -> list[ScriptedSurgery]:
    """Deterministic scripting of surgeries, clips, and scenes."""
    registry = registry or default_registry()
    rng = np.random.default_rng(seed)
    surgeries = []
    for s in range(n_surgeries):
        surgery_id = f"surg-{s + 1:03d}"
        clips = []
        n_clips = int(rng.integers(2, 4))
        scene_count = [int(rng.integers(3, 6)) for _ in range(n_clips)]
        labels = _plausible_labels(registry, rng, sum(scene_count))
        gap_at = int(rng.integers(1, sum(scene_count) - 1)) if unlabelled_scene else -1
        cursor = 0
        for c in range(n_clips):
            scenes = []
            for _ in range(scene_count[c]):
                label = None if cursor == gap_at else labels[cursor]
                scenes.append(ScriptedScene(float(rng.integers(6, 15)), label))
                cursor += 1
            clips.append(ScriptedClip(f"clip{chr(ord('A') + c)}", c, tuple(scenes)))
        surgeries.append(ScriptedSurgery(surgery_id, tuple(clips)))
    return surgeries


def scene_pattern(rng: np.random.Generator, size: int, block: int = 8) -> np.ndarray:
    """Binary block texture inside a bright disc; black surround."""
    blocks = rng.integers(0, 2, (size // block + 1, size // block + 1))
    img = np.where(np.kron(blocks, np.ones((block, block)))[:size, :size] > 0, 220, 30)
    yy, xx = np.mgrid[:size, :size]
    disc = (yy - size / 2) ** 2 + (xx - size / 2) ** 2 <= (0.45 * size) ** 2
    return np.where(disc, img, 0).astype(np.uint8)


def generate_corpus(root: str | Path, n_surgeries: int = 3, seed: int = 7,
                    fps: float = 2.0, frame_size: int = 64,
                    registry: TaxonomyRegistry | None = None,
                    unlabelled_scene: bool = True) -> CorpusSpec:
    """Write the corpus to disk and return its script."""
    registry = registry or default_registry()
    root = Path(root)
    surgeries = script_corpus(n_surgeries, seed, registry, unlabelled_scene)
    rng = np.random.default_rng(seed + 1)

    for surgery in surgeries:
        sdir = root / surgery.surgery_id
        sdir.mkdir(parents=True, exist_ok=True)

        with open(sdir / "clips.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["surgery_id", "clip_id", "part_index", "duration_s"])
            for clip in surgery.clips:
                writer.writerow([surgery.surgery_id, clip.clip_id, clip.part_index,
                                 f"{clip.duration_s:.3f}"])

        export = {"clips": []}
        for clip in surgery.clips:
            results, t = [], 0.0
            for scene in clip.scenes:
                if scene.label is not None:
                    results.append({"start": t, "end": t + scene.duration_s,
                                    "labels": [scene.label]})
                t += scene.duration_s
            export["clips"].append({"file": f"{clip.clip_id}.mp4", "results": results})
        (sdir / f"{surgery.surgery_id}.json").write_text(
            json.dumps(export, indent=2, sort_keys=True) + "\n", encoding="utf-8")

        for clip in surgery.clips:
            frame_dir = sdir / "frames" / clip.clip_id
            frame_dir.mkdir(parents=True, exist_ok=True)
            patterns = [scene_pattern(rng, frame_size) for _ in clip.scenes]
            starts = np.cumsum([0.0] + [s.duration_s for s in clip.scenes])
            n_frames = int(round(clip.duration_s * fps))
            for i in range(n_frames):
                ts = i / fps
                scene_idx = int(np.searchsorted(starts, ts, side="right") - 1)
                scene_idx = min(scene_idx, len(clip.scenes) - 1)
                Image.fromarray(patterns[scene_idx]).save(frame_dir / f"frame_{i:06d}.png")

    return CorpusSpec(root=root, surgeries=tuple(surgeries), fps=fps, frame_size=frame_size)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m esvforge.synthetic",
        description="Generate the synthetic demo corpus and a matching config file.",
    )
    parser.add_argument("root", type=Path, help="directory to create the corpus in")
    parser.add_argument("--surgeries", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--fps", type=float, default=2.0)
    parser.add_argument("--config-out", type=Path, default=None,
                        help="also write a pipeline config (default: ROOT/../demo.cfg)")
    args = parser.parse_args(argv)

    corpus = generate_corpus(args.root, n_surgeries=args.surgeries, seed=args.seed, fps=args.fps)
    from .config import PipelineConfig

    cfg_path = args.config_out or args.root.parent / "demo.cfg"
    cfg = PipelineConfig(videos_root=corpus.root.resolve(),
                         out_root=(args.root.parent / "out").resolve(),
                         fps=args.fps, seed=args.seed)
    cfg.to_ini(cfg_path)
    total = sum(len(s.clips) for s in corpus.surgeries)
    print(f"wrote {len(corpus.surgeries)} surgeries / {total} clips under {args.root}")
    print(f"wrote config {cfg_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
