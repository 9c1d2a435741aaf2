"""Annotation-export parsing and the global surgery clock.

Per-clip segment times from the labelling tool are lifted onto one clock per
surgery by offsetting each clip with the summed durations of its predecessors
(clips ordered by ``part_index``). Intervals are half-open ``[start, end)``.

Accepted export shapes (JSON, documented with golden examples in the repo):

1. the compact shape written by this toolkit::

       {"clips": [{"file": "clipA.mp4",
                   "results": [{"start": 0.0, "end": 30.0,
                                "labels": ["setup.scope_setup.scope_insertion"]}]}]}

   A bare list of clip entries is also accepted.

2. Label Studio task exports: entries carrying ``data.video`` and
   ``annotations[*].result[*].value`` with the same ``start``/``end``/``labels``
   fields are folded into shape 1.

Each labelled region must carry exactly one label. Unlabelled stretches of the
clock stay unlabelled; lookups there raise rather than inventing a label.
"""
from __future__ import annotations

import csv
import json
from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .errors import (
    OutOfRangeError,
    SchemaError,
    SegmentExceedsClipError,
    UnknownClipError,
    UnlabelledError,
)
from .taxonomy import TaxonomyRegistry, Triplet, default_registry, format_triplet

#: annotation tools round region ends slightly past the media duration
CLIP_END_TOLERANCE_S = 0.05


@dataclass(frozen=True)
class RawAnnotationSegment:
    clip_id: str
    start_s: float
    end_s: float
    label: str

    def __post_init__(self):
        if not (0 <= self.start_s < self.end_s):
            raise SchemaError(
                f"segment on {self.clip_id!r} needs 0 <= start < end, "
                f"got [{self.start_s}, {self.end_s})"
            )


@dataclass(frozen=True)
class ClipManifest:
    clip_id: str
    duration_s: float
    part_index: int

    def __post_init__(self):
        if self.duration_s <= 0:
            raise SchemaError(f"clip {self.clip_id!r} has non-positive duration")


@dataclass(frozen=True)
class ClipSpan:
    """Placement of one clip on the surgery clock."""
    offset_s: float
    duration_s: float
    part_index: int

    @property
    def end_s(self) -> float:
        return self.offset_s + self.duration_s


@dataclass(frozen=True)
class TimelineSegment:
    start_s: float
    end_s: float
    triplet: Triplet


@dataclass(frozen=True)
class SurgeryTimeline:
    """Ordered, non-overlapping labelled segments on the global clock.

    Immutable; concurrently readable. ``clip_spans`` records where each clip
    sits on the clock so local timestamps (e.g. from frame filenames) can be
    mapped back to global ones.
    """
    surgery_id: str
    segments: tuple[TimelineSegment, ...]
    total_duration_s: float
    clip_spans: dict[str, ClipSpan]

    @cached_property
    def _segment_starts(self) -> list[float]:
        return [seg.start_s for seg in self.segments]

    def to_global(self, clip_id: str, local_t: float) -> float:
        span = self.clip_spans.get(clip_id)
        if span is None:
            raise UnknownClipError(f"{self.surgery_id}: unknown clip {clip_id!r}")
        return span.offset_s + local_t


# -- export parsing ----------------------------------------------------------


def parse_annotation_export(document: str | bytes | dict | list,
                            registry: TaxonomyRegistry | None = None,
                            ) -> list[RawAnnotationSegment]:
    """Parse a JSON export into raw segments, validating every label.

    ``document`` may be JSON text or the already-decoded object.
    """
    registry = registry or default_registry()
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise SchemaError(f"export is not valid JSON: {e}") from e

    segments: list[RawAnnotationSegment] = []
    for clip_id, results in _iter_clip_results(document):
        for region in results:
            if not isinstance(region, dict):
                raise SchemaError(f"clip {clip_id!r}: region is not an object")
            missing = [k for k in ("start", "end", "labels") if k not in region]
            if missing:
                raise SchemaError(f"clip {clip_id!r}: region missing {missing}")
            labels = region["labels"]
            if not isinstance(labels, list) or len(labels) != 1:
                raise SchemaError(
                    f"clip {clip_id!r}: region must carry exactly one label, got {labels!r}"
                )
            triplet = registry.parse_triplet(str(labels[0]))
            segments.append(RawAnnotationSegment(
                clip_id=clip_id,
                start_s=float(region["start"]),
                end_s=float(region["end"]),
                label=format_triplet(triplet),
            ))
    return segments


def _iter_clip_results(document):
    if isinstance(document, dict) and "clips" in document:
        entries = document["clips"]
    elif isinstance(document, list):
        entries = document
    else:
        raise SchemaError("export must be a list of clip entries or {'clips': [...]}")
    if not isinstance(entries, list):
        raise SchemaError("'clips' must be a list")

    for entry in entries:
        if not isinstance(entry, dict):
            raise SchemaError("clip entry is not an object")
        if "annotations" in entry:  # Label Studio task export
            name = entry.get("file") or entry.get("data", {}).get("video")
            if not name:
                raise SchemaError("Label Studio entry has no data.video or file field")
            results = []
            for ann in entry["annotations"]:
                for item in ann.get("result", []):
                    value = item.get("value")
                    if value is not None:
                        results.append(value)
            yield _clip_id_from_name(str(name)), results
        else:
            name = entry.get("file")
            if not name:
                raise SchemaError("clip entry missing 'file'")
            results = entry.get("results")
            if not isinstance(results, list):
                raise SchemaError(f"clip {name!r} missing 'results' list")
            yield _clip_id_from_name(str(name)), results


def _clip_id_from_name(name: str) -> str:
    return Path(name).stem


# -- clip manifests ----------------------------------------------------------


def read_clip_manifest(path: str | Path) -> dict[str, list[ClipManifest]]:
    """Read the UTF-8 manifest table: surgery_id, clip_id, part_index, duration_s."""
    out: dict[str, list[ClipManifest]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"surgery_id", "clip_id", "part_index", "duration_s"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise SchemaError(f"clip manifest {path} must have columns {sorted(required)}")
        for row in reader:
            out.setdefault(row["surgery_id"], []).append(ClipManifest(
                clip_id=row["clip_id"],
                duration_s=float(row["duration_s"]),
                part_index=int(row["part_index"]),
            ))
    return out


# -- assembly ----------------------------------------------------------------


def assemble_timeline(surgery_id: str,
                      segments: list[RawAnnotationSegment],
                      clips: list[ClipManifest],
                      registry: TaxonomyRegistry | None = None,
                      ) -> SurgeryTimeline:
    """Lift per-clip segments onto the surgery clock and normalize them.

    Clip ``part_index`` values must form a contiguous run of integers.
    Segment ends may exceed the clip duration by ``CLIP_END_TOLERANCE_S``
    and are clamped; any larger excess is an error.
    """
    registry = registry or default_registry()
    if not clips:
        raise SchemaError(f"{surgery_id}: no clips in manifest")
    ordered = sorted(clips, key=lambda c: c.part_index)
    indices = [c.part_index for c in ordered]
    if len(set(indices)) != len(indices) or indices != list(range(indices[0], indices[0] + len(indices))):
        raise SchemaError(f"{surgery_id}: part_index values {indices} are not contiguous")

    spans: dict[str, ClipSpan] = {}
    offset = 0.0
    for clip in ordered:
        if clip.clip_id in spans:
            raise SchemaError(f"{surgery_id}: duplicate clip id {clip.clip_id!r}")
        spans[clip.clip_id] = ClipSpan(offset, clip.duration_s, clip.part_index)
        offset += clip.duration_s
    total = offset

    lifted: list[TimelineSegment] = []
    for seg in segments:
        span = spans.get(seg.clip_id)
        if span is None:
            raise UnknownClipError(f"{surgery_id}: segment references unknown clip {seg.clip_id!r}")
        end = seg.end_s
        if end > span.duration_s + CLIP_END_TOLERANCE_S:
            raise SegmentExceedsClipError(
                f"{surgery_id}/{seg.clip_id}: segment end {end}s exceeds clip "
                f"duration {span.duration_s}s"
            )
        end = min(end, span.duration_s)
        if end <= seg.start_s:
            continue
        lifted.append(TimelineSegment(
            start_s=span.offset_s + seg.start_s,
            end_s=span.offset_s + end,
            triplet=registry.parse_triplet(seg.label),
        ))

    return SurgeryTimeline(
        surgery_id=surgery_id,
        segments=tuple(normalize_segments(lifted)),
        total_duration_s=total,
        clip_spans=spans,
    )


def normalize_segments(segments: list[TimelineSegment]) -> list[TimelineSegment]:
    """Sort, resolve overlaps (later-starting segment wins; the earlier one is
    truncated at its start), and merge abutting equal-label segments.

    Idempotent; deterministic for any input order.
    """
    ordered = sorted(segments, key=_segment_sort_key)
    out: list[TimelineSegment] = []
    for seg in ordered:
        while out and out[-1].end_s > seg.start_s:
            prev = out.pop()
            if prev.start_s < seg.start_s:
                out.append(TimelineSegment(prev.start_s, seg.start_s, prev.triplet))
                break
        if out and out[-1].end_s == seg.start_s and out[-1].triplet == seg.triplet:
            seg = TimelineSegment(out.pop().start_s, seg.end_s, seg.triplet)
        out.append(seg)
    return [s for s in out if s.end_s > s.start_s]


def _segment_sort_key(seg: TimelineSegment):
    return (seg.start_s, seg.end_s, format_triplet(seg.triplet))


# -- queries -----------------------------------------------------------------


def lookup_label(timeline: SurgeryTimeline, t: float) -> Triplet:
    """Label at global time ``t`` via binary search over half-open segments."""
    if not (0 <= t <= timeline.total_duration_s):
        raise OutOfRangeError(
            f"{timeline.surgery_id}: t={t} outside [0, {timeline.total_duration_s}]"
        )
    i = bisect_right(timeline._segment_starts, t) - 1
    if i >= 0 and t < timeline.segments[i].end_s:
        return timeline.segments[i].triplet
    raise UnlabelledError(f"{timeline.surgery_id}: no label at t={t}")
