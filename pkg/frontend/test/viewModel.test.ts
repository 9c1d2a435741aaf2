import { describe, expect, it } from "vitest";

import { LEVELS, TimelinePayload } from "../src/api.js";
import {
  PALETTE,
  buildTimelineViewModel,
  colorFor,
  formatSeconds,
  laneSegments,
} from "../src/viewModel.js";
import { loadFixture } from "./helpers.js";

const payload = loadFixture<TimelinePayload>("timeline_fix-001.json");

describe("timeline view model", () => {
  it("lanes carry exactly the served segments, in served order", () => {
    const model = buildTimelineViewModel(payload);
    for (const level of LEVELS) {
      expect(laneSegments(model, level)).toEqual(payload.levels[level]);
    }
  });

  it("bar geometry stays inside the track", () => {
    const model = buildTimelineViewModel(payload);
    for (const level of LEVELS) {
      for (const bar of model.lanes[level]) {
        expect(bar.leftPct).toBeGreaterThanOrEqual(0);
        expect(bar.widthPct).toBeGreaterThan(0);
        expect(bar.leftPct + bar.widthPct).toBeLessThanOrEqual(100 + 1e-9);
      }
    }
  });

  it("colors are keyed by class ordinal, stable across calls", () => {
    const model = buildTimelineViewModel(payload);
    for (const level of LEVELS) {
      for (const bar of model.lanes[level]) {
        expect(bar.color).toBe(PALETTE[bar.segment.label_ordinal % PALETTE.length]);
      }
    }
    expect(colorFor(3)).toBe(colorFor(3));
    expect(colorFor(0)).not.toBe(colorFor(1));
  });

  it("marks the selected segment and exposes it", () => {
    const first = payload.levels.phase[0];
    const model = buildTimelineViewModel(payload,
      { level: "phase", start_s: first.start_s });
    expect(model.selected).toEqual(first);
    expect(model.lanes.phase[0].selected).toBe(true);
    expect(model.lanes.phase.slice(1).every((bar) => !bar.selected)).toBe(true);
  });

  it("handles an empty timeline", () => {
    const empty: TimelinePayload = {
      surgery_id: "fix-empty",
      duration_s: 0,
      levels: { phase: [], task: [], action: [] },
    };
    const model = buildTimelineViewModel(empty);
    expect(LEVELS.every((level) => model.lanes[level].length === 0)).toBe(true);
  });

  it("formats seconds as m:ss.s", () => {
    expect(formatSeconds(0)).toBe("0:00.0");
    expect(formatSeconds(95.25)).toBe("1:35.3");
  });
});
