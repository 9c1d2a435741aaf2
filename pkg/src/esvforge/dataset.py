"""Materializes the dataset layout: frames/, cutouts/, cutout-frames/ and the
timeline labels CSV, plus the frame filename codec and remaining-time column.

CSV columns, in order: filename, timeline_label, timeline_phase_label,
timeline_task_label, timeline_action_label, time_to_finish. Filenames embed
the clip-local timestamp as zero-padded milliseconds so lexicographic order of
names equals (surgery, clip, frame_index) order; the CSV serializes times as
decimal seconds with 3 dp.
"""
from __future__ import annotations

import csv
import json
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from PIL import Image

from .annotations import SurgeryTimeline, lookup_label
from .errors import MalformedFilenameError, OutOfRangeError, UnlabelledError
from .frames import CutoutSpec, KeyframeRecord, cutout_window
from .taxonomy import Triplet, format_triplet, slug

CSV_COLUMNS = (
    "filename",
    "timeline_label",
    "timeline_phase_label",
    "timeline_task_label",
    "timeline_action_label",
    "time_to_finish",
)

_COMPONENT = re.compile(r"[A-Za-z0-9_-]+")
_FRAME_NAME = re.compile(r"^(?P<clip>.+)_frame_(?P<index>\d{6})_ts_(?P<millis>\d{9})\.png$")


def remaining_time(total_duration_s: float, t: float) -> float:
    """Seconds of surgery left at global time ``t``."""
    if not (0 <= t <= total_duration_s):
        raise OutOfRangeError(f"t={t} outside [0, {total_duration_s}]")
    return total_duration_s - t


def encode_frame_filename(surgery: str, clip: str, frame_index: int, timestamp_s: float) -> str:
    """``{surgery}/{clip}_frame_{index:06}_ts_{millis:09}.png``.

    Components must already be path-safe ([A-Za-z0-9_-]); timestamps must be
    millisecond-quantized so the round trip through the name is exact.
    """
    for part in (surgery, clip):
        if not _COMPONENT.fullmatch(part):
            raise MalformedFilenameError(f"component not path-safe: {part!r}")
    if not (0 <= frame_index < 10**6):
        raise MalformedFilenameError(f"frame index out of range: {frame_index}")
    millis = round(timestamp_s * 1000)
    if not (0 <= millis < 10**9):
        raise MalformedFilenameError(f"timestamp out of range: {timestamp_s}")
    return f"{surgery}/{clip}_frame_{frame_index:06d}_ts_{millis:09d}.png"


def decode_frame_filename(name: str) -> tuple[str, str, int, float]:
    """Inverse of encode_frame_filename -> (surgery, clip, frame_index, timestamp_s)."""
    parts = name.split("/")
    if len(parts) != 2:
        raise MalformedFilenameError(f"expected surgery/frame.png, got {name!r}")
    surgery, base = parts
    m = _FRAME_NAME.fullmatch(base)
    if not m or not _COMPONENT.fullmatch(surgery) or not _COMPONENT.fullmatch(m["clip"]):
        raise MalformedFilenameError(f"unparseable frame filename: {name!r}")
    return surgery, m["clip"], int(m["index"]), int(m["millis"]) / 1000.0


@dataclass(frozen=True)
class DatasetRow:
    filename: str
    timeline_label: str
    timeline_phase_label: str
    timeline_task_label: str
    timeline_action_label: str
    time_to_finish: float

    @classmethod
    def build(cls, filename: str, triplet: Triplet, time_to_finish: float) -> "DatasetRow":
        return cls(
            filename=filename,
            timeline_label=format_triplet(triplet),
            timeline_phase_label=slug(triplet.phase.name),
            timeline_task_label=slug(triplet.task.name),
            timeline_action_label=slug(triplet.action.name),
            time_to_finish=time_to_finish,
        )


@dataclass
class DatasetManifest:
    root: Path
    rows: int = 0
    keyframes: int = 0
    cutouts: int = 0
    dropped_unlabelled: int = 0
    per_surgery: dict[str, int] = field(default_factory=dict)

    def merge(self, other: "DatasetManifest") -> None:
        self.rows += other.rows
        self.keyframes += other.keyframes
        self.cutouts += other.cutouts
        self.dropped_unlabelled += other.dropped_unlabelled
        for k, v in other.per_surgery.items():
            self.per_surgery[k] = self.per_surgery.get(k, 0) + v


def emit_dataset(timeline: SurgeryTimeline,
                 keyframes: Iterable[KeyframeRecord],
                 out_root: str | Path,
                 image_for: Callable[[KeyframeRecord], Path | None] | None = None,
                 write_csv: bool = True,
                 ) -> tuple[DatasetManifest, list[DatasetRow]]:
    """Emit one surgery: keyframe images, cutout specs, and CSV rows.

    Keyframes that fall into unlabelled gaps of the timeline are dropped and
    counted in the manifest. ``image_for`` maps a record to its source image;
    when it yields nothing a thumbnail is rendered from the record's signature
    so the emitted file set always matches the CSV rows. Set ``write_csv``
    False when merging several surgeries into one global CSV afterwards.
    """
    out_root = Path(out_root)
    surgery = timeline.surgery_id
    frames_dir = out_root / "frames" / surgery
    cutouts_dir = out_root / "cutouts" / surgery
    for d in (frames_dir, cutouts_dir, out_root / "cutout-frames" / surgery):
        d.mkdir(parents=True, exist_ok=True)

    manifest = DatasetManifest(root=out_root)
    rows: list[DatasetRow] = []
    for record in keyframes:
        global_ts = timeline.to_global(record.clip_id, record.timestamp_s)
        try:
            triplet = lookup_label(timeline, global_ts)
        except UnlabelledError:
            manifest.dropped_unlabelled += 1
            continue

        name = encode_frame_filename(surgery, record.clip_id, record.frame_index,
                                     record.timestamp_s)
        rows.append(DatasetRow.build(
            name, triplet, remaining_time(timeline.total_duration_s, global_ts)))

        _write_keyframe_image(out_root / "frames" / name, record, image_for)
        start, duration = cutout_window(record.timestamp_s)
        spec = CutoutSpec(
            source_clip=record.clip_id,
            start_s=start,
            duration_s=duration,
            output_name=f"{surgery}/{Path(name).stem}.mp4",
        )
        _write_cutout_spec(cutouts_dir / f"{Path(name).stem}.json", spec)

    rows.sort(key=lambda r: r.filename)
    manifest.rows = manifest.keyframes = manifest.cutouts = len(rows)
    manifest.per_surgery[surgery] = len(rows)
    if write_csv:
        write_labels_csv(rows, out_root / "timeline_labels.csv")
    return manifest, rows


def write_labels_csv(rows: Iterable[DatasetRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([
                row.filename,
                row.timeline_label,
                row.timeline_phase_label,
                row.timeline_task_label,
                row.timeline_action_label,
                f"{row.time_to_finish:.3f}",
            ])


def read_labels_csv(path: str | Path) -> list[DatasetRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [DatasetRow(
            filename=r["filename"],
            timeline_label=r["timeline_label"],
            timeline_phase_label=r["timeline_phase_label"],
            timeline_task_label=r["timeline_task_label"],
            timeline_action_label=r["timeline_action_label"],
            time_to_finish=float(r["time_to_finish"]),
        ) for r in reader]


def _write_keyframe_image(dest: Path, record: KeyframeRecord, image_for) -> None:
    src = image_for(record) if image_for is not None else None
    if src is not None:
        if Path(src).resolve() != dest.resolve():
            shutil.copyfile(src, dest)
        return
    vec = record.signature.vector
    side = int(round(len(vec) ** 0.5))
    thumb = vec.reshape(side, side)
    peak = thumb.max()
    scaled = (thumb / peak * 255.0) if peak > 0 else thumb
    Image.fromarray(scaled.astype(np.uint8)).save(dest)


def _write_cutout_spec(path: Path, spec: CutoutSpec) -> None:
    doc = {
        "source_clip": spec.source_clip,
        "start_s": spec.start_s,
        "duration_s": spec.duration_s,
        "output_name": spec.output_name,
    }
    path.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def read_cutout_spec(path: str | Path) -> CutoutSpec:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return CutoutSpec(doc["source_clip"], doc["start_s"], doc["duration_s"],
                      doc["output_name"])
