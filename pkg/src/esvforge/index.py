"""Run-length segment index over per-frame triplet labels, with search.

Samples are sparse and irregular, so run boundaries sit at midpoints between
adjacent differing samples; terminal runs extend half the median sampling
interval (clamped at 0 on the left). The index is immutable once built;
rebuild-and-swap is the update model.

Search semantics: label criteria select segments at their own taxonomy level.
When several levels are specified, a matching segment must also temporally
overlap a segment bearing each other specified label in the same surgery
(e.g. phase=dissection plus action=bleeding returns the dissection-phase
segments overlapping bleeding, and the bleeding segments inside dissection).
Results are always actual index segments, sorted by (surgery, start, level).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from statistics import median
from typing import Iterable

from .errors import UnknownLabelNameError, UnorderedInputError, VersionMismatchError
from .taxonomy import LEVELS, TaxonomyRegistry, Triplet, default_registry

SCHEMA = "esv-forge/timeline-index/v1"
#: assumed sampling interval when a surgery has a single sample
DEFAULT_SAMPLE_INTERVAL_S = 1.0

SOURCES = ("annotation", "prediction")


@dataclass(frozen=True)
class IndexSegment:
    surgery_id: str
    level: str           # phase | task | action
    label: int           # ordinal within the level
    start_s: float
    end_s: float
    source: str          # annotation | prediction

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def overlaps(self, start_s: float, end_s: float) -> bool:
        return self.start_s < end_s and start_s < self.end_s


@dataclass(frozen=True)
class TimelineIndex:
    segments: tuple[IndexSegment, ...]
    durations: dict[str, float]  # labelled extent end per surgery

    def surgery_ids(self) -> list[str]:
        return sorted(self.durations)

    def for_surgery(self, surgery_id: str, level: str | None = None) -> list[IndexSegment]:
        return [s for s in self.segments
                if s.surgery_id == surgery_id and (level is None or s.level == level)]


@dataclass(frozen=True)
class SearchQuery:
    phase: str | None = None
    task: str | None = None
    action: str | None = None
    surgery: str | None = None
    from_s: float | None = None
    to_s: float | None = None
    min_duration_s: float = 0.0

    def __post_init__(self):
        if not any((self.phase, self.task, self.action, self.surgery,
                    self.from_s is not None, self.to_s is not None,
                    self.min_duration_s > 0)):
            raise ValueError("search query needs at least one criterion")


def build_index(samples: Iterable[tuple[str, float, Triplet]],
                source: str = "annotation",
                default_interval_s: float = DEFAULT_SAMPLE_INTERVAL_S) -> TimelineIndex:
    """Run-length encode an ordered (surgery, timestamp, Triplet) stream.

    Timestamps must be strictly increasing within each surgery.
    """
    if source not in SOURCES:
        raise ValueError(f"source must be one of {SOURCES}")
    by_surgery: dict[str, list[tuple[float, Triplet]]] = {}
    for surgery_id, ts, triplet in samples:
        rows = by_surgery.setdefault(surgery_id, [])
        if rows and ts <= rows[-1][0]:
            raise UnorderedInputError(
                f"{surgery_id}: timestamp {ts} not after {rows[-1][0]}"
            )
        rows.append((ts, triplet))

    segments: list[IndexSegment] = []
    durations: dict[str, float] = {}
    for surgery_id in sorted(by_surgery):
        rows = by_surgery[surgery_id]
        times = [t for t, _ in rows]
        if len(times) > 1:
            half = median(b - a for a, b in zip(times, times[1:])) / 2.0
        else:
            half = default_interval_s / 2.0
        bounds = [max(0.0, times[0] - half)]
        bounds += [(a + b) / 2.0 for a, b in zip(times, times[1:])]
        bounds.append(times[-1] + half)
        durations[surgery_id] = bounds[-1]

        ordinals = {
            "phase": [t.phase.ordinal for _, t in rows],
            "task": [t.task.ordinal for _, t in rows],
            "action": [t.action.ordinal for _, t in rows],
        }
        for level in LEVELS:
            values = ordinals[level]
            run_start = 0
            for i in range(1, len(values) + 1):
                if i == len(values) or values[i] != values[run_start]:
                    segments.append(IndexSegment(
                        surgery_id=surgery_id,
                        level=level,
                        label=values[run_start],
                        start_s=bounds[run_start],
                        end_s=bounds[i],
                        source=source,
                    ))
                    run_start = i

    segments.sort(key=_segment_order)
    return TimelineIndex(segments=tuple(segments), durations=durations)


def _segment_order(s: IndexSegment):
    return (s.surgery_id, s.start_s, LEVELS.index(s.level), s.label)


def search(index: TimelineIndex, query: SearchQuery,
           registry: TaxonomyRegistry | None = None) -> list[IndexSegment]:
    """Deterministic filter over the index per the module's search semantics."""
    registry = registry or default_registry()
    wanted: dict[str, int] = {}
    for level, name in (("phase", query.phase), ("task", query.task),
                        ("action", query.action)):
        if name is not None:
            try:
                wanted[level] = registry.resolve(level, name).ordinal
            except Exception as e:
                raise UnknownLabelNameError(str(e)) from e

    def window_ok(seg: IndexSegment) -> bool:
        lo = query.from_s if query.from_s is not None else float("-inf")
        hi = query.to_s if query.to_s is not None else float("inf")
        return seg.overlaps(lo, hi)

    def base_ok(seg: IndexSegment) -> bool:
        if query.surgery is not None and seg.surgery_id != query.surgery:
            return False
        if seg.duration_s < query.min_duration_s:
            return False
        return window_ok(seg)

    candidate_levels = set(wanted) or set(LEVELS)
    matching_by_level = {
        level: [s for s in index.segments if s.level == level and s.label == ordinal]
        for level, ordinal in wanted.items()
    }

    results = []
    for seg in index.segments:
        if seg.level not in candidate_levels or not base_ok(seg):
            continue
        if seg.level in wanted and seg.label != wanted[seg.level]:
            continue
        other_ok = all(
            any(o.surgery_id == seg.surgery_id and seg.overlaps(o.start_s, o.end_s)
                for o in matching_by_level[level])
            for level in wanted if level != seg.level
        )
        if other_ok:
            results.append(seg)
    results.sort(key=_segment_order)
    return results


# -- persistence ---------------------------------------------------------------


def persist_index(index: TimelineIndex, path: str | Path) -> None:
    """Versioned structured-text document; written atomically via a temp file."""
    doc = {
        "schema": SCHEMA,
        "durations": index.durations,
        "segments": [
            [s.surgery_id, s.level, s.label, s.start_s, s.end_s, s.source]
            for s in index.segments
        ],
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
                   encoding="utf-8")
    tmp.replace(path)


def load_index(path: str | Path) -> TimelineIndex:
    """Load a persisted index; a corrupt or foreign file never yields a partial index."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise VersionMismatchError(f"{path} is not a timeline-index document: {e}") from e
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise VersionMismatchError(
            f"{path}: expected schema {SCHEMA!r}, got {doc.get('schema') if isinstance(doc, dict) else type(doc)!r}"
        )
    try:
        segments = tuple(
            IndexSegment(surgery_id=str(s[0]), level=str(s[1]), label=int(s[2]),
                         start_s=float(s[3]), end_s=float(s[4]), source=str(s[5]))
            for s in doc["segments"]
        )
        durations = {str(k): float(v) for k, v in doc["durations"].items()}
    except (KeyError, IndexError, TypeError, ValueError) as e:
        raise VersionMismatchError(f"{path}: malformed index document: {e}") from e
    return TimelineIndex(segments=segments, durations=durations)
