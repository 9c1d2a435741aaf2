/** Pure presentation mapping: service payloads to renderable lane bars.
 * Lanes carry exactly the served segments, in served order; geometry and
 * colors are derived per bar without filtering or merging. */

import { LEVELS, Level, Segment, TimelinePayload } from "./api.js";
import { SelectedSegment } from "./urlState.js";

/** Fixed palette keyed by class ordinal so colors are stable across sessions. */
export const PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
  "#fabfd2", "#b6992d", "#499894", "#d4a6c8", "#a0cbe8", "#f1ce63",
  "#8cd17d", "#ffbe7d", "#79706e",
] as const;

export function colorFor(ordinal: number): string {
  return PALETTE[ordinal % PALETTE.length];
}

export interface SegmentBar {
  segment: Segment;
  leftPct: number;
  widthPct: number;
  color: string;
  selected: boolean;
}

export interface TimelineViewModel {
  surgeryId: string;
  durationS: number;
  lanes: Record<Level, SegmentBar[]>;
  selected: Segment | null;
}

export function isSelected(segment: Segment, selected: SelectedSegment | null): boolean {
  return selected !== null
    && segment.level === selected.level
    && segment.start_s === selected.start_s;
}

export function buildTimelineViewModel(
  payload: TimelinePayload,
  selected: SelectedSegment | null = null,
): TimelineViewModel {
  const duration = payload.duration_s > 0 ? payload.duration_s : 1;
  const lanes = {} as Record<Level, SegmentBar[]>;
  let selectedSegment: Segment | null = null;
  for (const level of LEVELS) {
    lanes[level] = (payload.levels[level] ?? []).map((segment) => {
      const chosen = isSelected(segment, selected);
      if (chosen) selectedSegment = segment;
      return {
        segment,
        leftPct: (segment.start_s / duration) * 100,
        widthPct: ((segment.end_s - segment.start_s) / duration) * 100,
        color: colorFor(segment.label_ordinal),
        selected: chosen,
      };
    });
  }
  return {
    surgeryId: payload.surgery_id,
    durationS: payload.duration_s,
    lanes,
    selected: selectedSegment,
  };
}

export function laneSegments(model: TimelineViewModel, level: Level): Segment[] {
  return model.lanes[level].map((bar) => bar.segment);
}

export function formatSeconds(t: number): string {
  const minutes = Math.floor(t / 60);
  const seconds = t - minutes * 60;
  return `${minutes}:${seconds.toFixed(1).padStart(4, "0")}`;
}

export function describeSegment(segment: Segment): string {
  return `${segment.label} (${segment.level}) ${formatSeconds(segment.start_s)}`
    + `–${formatSeconds(segment.end_s)} in ${segment.surgery_id}`;
}
