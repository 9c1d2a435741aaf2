import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, Segment, TimelinePayload } from "../src/api.js";
import { App } from "../src/app.js";
import {
  barsInLane,
  flush,
  jsonResponse,
  loadFixture,
  mountDom,
  renderedResults,
  setUrl,
  stubFetch,
} from "./helpers.js";

const surgeries = loadFixture<Record<string, unknown>>("surgeries.json");
const timeline1 = loadFixture<TimelinePayload>("timeline_fix-001.json");
const timeline2 = loadFixture<TimelinePayload>("timeline_fix-002.json");
const bleeding = loadFixture<{ results: Segment[] }>("search_bleeding.json");

const ROUTES = {
  "/surgeries": surgeries,
  "/surgeries/fix-001/timeline": timeline1,
  "/surgeries/fix-002/timeline": timeline2,
  "/search?action=Bleeding": bleeding,
  "/search?action=Bleeding&surgery=fix-001":
    loadFixture<unknown>("search_bleeding_windowed.json"),
};

function newApp(): App {
  return new App(document, new ApiClient(""));
}

beforeEach(() => {
  mountDom();
  setUrl("");
});

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("timeline browsing", () => {
  it("renders the phase lane exactly as served (snapshot equality)", async () => {
    stubFetch(ROUTES);
    setUrl("?surgery_view=fix-001");
    await newApp().init();
    expect(barsInLane("phase")).toEqual(timeline1.levels.phase);
    expect(barsInLane("task")).toEqual(timeline1.levels.task);
    expect(barsInLane("action")).toEqual(timeline1.levels.action);
  });

  it("never shows a segment absent from the service response", async () => {
    stubFetch(ROUTES);
    setUrl("?surgery_view=fix-001");
    await newApp().init();
    const served = Object.values(timeline1.levels).flat();
    for (const level of ["phase", "task", "action"]) {
      for (const bar of barsInLane(level)) {
        expect(served).toContainEqual(bar);
      }
    }
  });

  it("shows a not-found banner for an unknown surgery", async () => {
    stubFetch({
      "/surgeries": surgeries,
      "/surgeries/ghost/timeline": jsonResponse({ error: "unknown surgery: ghost" }, 404),
    });
    setUrl("?surgery_view=ghost");
    await newApp().init();
    const banner = document.getElementById("banner")!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("not found");
    expect(document.querySelectorAll(".bar")).toHaveLength(0);
  });

  it("shows empty lanes with a message for an empty timeline", async () => {
    stubFetch({
      "/surgeries": surgeries,
      "/surgeries/fix-001/timeline": {
        surgery_id: "fix-001", duration_s: 0,
        levels: { phase: [], task: [], action: [] },
      },
    });
    setUrl("?surgery_view=fix-001");
    await newApp().init();
    expect(document.querySelectorAll(".bar")).toHaveLength(0);
    expect(document.getElementById("lanes-empty")!.textContent).toContain("no labelled");
  });

  it("surfaces network failure non-fatally and recovers", async () => {
    const routes: Record<string, unknown> = { "/surgeries": surgeries };
    stubFetch(routes);
    setUrl("?surgery_view=fix-001");
    const app = newApp();
    await app.init();  // timeline route missing -> 404 -> banner
    expect(document.getElementById("banner")!.hidden).toBe(false);
    routes["/surgeries/fix-001/timeline"] = timeline1;
    await app.showSurgery("fix-001");
    expect(document.getElementById("banner")!.hidden).toBe(true);
    expect(barsInLane("phase")).toEqual(timeline1.levels.phase);
  });
});

describe("search", () => {
  it("renders exactly the served segments, ordered as served", async () => {
    stubFetch(ROUTES);
    const app = newApp();
    await app.init();
    (document.getElementById("q-action") as HTMLInputElement).value = "Bleeding";
    document.getElementById("search-form")!.dispatchEvent(
      new Event("submit", { cancelable: true }));
    await flush();
    expect(renderedResults()).toEqual(bleeding.results);
    expect(document.getElementById("results-count")!.textContent).toBe("2 segments");
  });

  it("validates empty criteria without sending a request", async () => {
    const calls = stubFetch(ROUTES);
    const app = newApp();
    await app.init();
    const listed = calls.length;
    document.getElementById("search-form")!.dispatchEvent(
      new Event("submit", { cancelable: true }));
    await flush();
    expect(document.getElementById("validation")!.textContent)
      .toContain("at least one");
    expect(calls.length).toBe(listed);  // no /search call went out
  });

  it("keeps only the latest of two overlapping searches", async () => {
    let releaseSlow!: (value: unknown) => void;
    const slow = new Promise((resolve) => { releaseSlow = resolve; });
    const routes: Record<string, unknown | (() => Promise<unknown>)> = {
      ...ROUTES,
      "/search?phase=Setup": async () => {
        await slow;
        return { results: [timeline1.levels.phase[0]] };
      },
    };
    stubFetch(routes);
    const app = newApp();
    await app.init();

    const first = app.runSearch({ phase: "Setup" });   // stalls on `slow`
    const second = app.runSearch({ action: "Bleeding" });
    await second;
    releaseSlow(null);
    await first;
    await flush();
    expect(renderedResults()).toEqual(bleeding.results);  // stale response dropped
  });

  it("clicking a result jumps the timeline to that segment", async () => {
    stubFetch(ROUTES);
    setUrl("?surgery_view=fix-001");
    const app = newApp();
    await app.init();
    await app.runSearch({ action: "Bleeding" });
    const hit = document.querySelector<HTMLElement>(
      '#results .result[data-surgery="fix-002"]')!;
    hit.click();
    await flush();
    // switched surgery and selected the clicked segment
    expect(barsInLane("action")).toEqual(timeline2.levels.action);
    const selected = document.querySelector<HTMLElement>(".bar.selected")!;
    expect(selected.dataset.surgery).toBe("fix-002");
    expect(selected.dataset.label).toBe("Bleeding");
    expect(Number(selected.dataset.start)).toBe(bleeding.results[1].start_s);
  });
});

describe("url state round trip", () => {
  it("reloading the captured url reproduces the identical view", async () => {
    stubFetch(ROUTES);
    const app = newApp();
    await app.init();
    (document.getElementById("surgery-select") as HTMLSelectElement).value = "fix-001";
    await app.showSurgery("fix-001");
    (document.getElementById("q-action") as HTMLInputElement).value = "Bleeding";
    document.getElementById("search-form")!.dispatchEvent(
      new Event("submit", { cancelable: true }));
    await flush();
    const hit = document.querySelector<HTMLElement>(
      '#results .result[data-surgery="fix-001"]')!;
    hit.click();
    await flush();

    const url = window.location.search;
    expect(url).toContain("surgery_view=fix-001");
    expect(url).toContain("action=Bleeding");
    expect(url).toContain("sel=");
    const snapshot = {
      lanes: (["phase", "task", "action"] as const).map(barsInLane),
      results: renderedResults(),
      selected: document.querySelector<HTMLElement>(".bar.selected")!.dataset.start,
      form: (document.getElementById("q-action") as HTMLInputElement).value,
    };

    // fresh mount, same url: the view must be identical
    mountDom();
    setUrl(url);
    await newApp().init();
    await flush();
    expect({
      lanes: (["phase", "task", "action"] as const).map(barsInLane),
      results: renderedResults(),
      selected: document.querySelector<HTMLElement>(".bar.selected")!.dataset.start,
      form: (document.getElementById("q-action") as HTMLInputElement).value,
    }).toEqual(snapshot);
    expect(window.location.search).toBe(url);
  });
});
