/** DOM wiring. Single-threaded and event-driven; at most one search request
 * is live at a time (stale responses are dropped, latest wins). Lanes render
 * exactly what the service returned; clicking a search result jumps the
 * timeline to that segment. All view state round-trips through the URL. */

import {
  ApiClient,
  ApiError,
  LEVELS,
  Level,
  SEARCH_KEYS,
  SearchForm,
  Segment,
  hasCriterion,
} from "./api.js";
import { AppState, decodeState, encodeState } from "./urlState.js";
import {
  TimelineViewModel,
  buildTimelineViewModel,
  describeSegment,
  formatSeconds,
} from "./viewModel.js";

export class App {
  private state: AppState = { surgery: null, query: {}, selected: null };
  private searchSeq = 0;
  private timeline: TimelineViewModel | null = null;

  constructor(private doc: Document, private api: ApiClient) {}

  async init(): Promise<void> {
    this.state = decodeState(this.win()?.location.search ?? "");
    this.fillForm(this.state.query);
    this.doc.getElementById("search-form")!.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.runSearch(this.readForm());
    });
    const select = this.doc.getElementById("surgery-select") as HTMLSelectElement;
    select.addEventListener("change", () => {
      void this.showSurgery(select.value || null);
    });

    const option = (label: string, value: string) => {
      const el = this.doc.createElement("option");
      el.textContent = label;
      el.value = value;
      return el;
    };
    try {
      const surgeries = await this.api.surgeries();
      select.replaceChildren();
      select.append(option("select a surgery", ""));
      for (const s of surgeries) {
        select.append(option(`${s.surgery_id} (${formatSeconds(s.duration_s)})`,
                             s.surgery_id));
      }
    } catch (err) {
      this.banner(`could not list surgeries: ${(err as Error).message}`);
      return;
    }

    if (this.state.surgery) {
      select.value = this.state.surgery;
      await this.showSurgery(this.state.surgery, { keepSelection: true });
    }
    if (hasCriterion(this.state.query)) {
      await this.runSearch(this.state.query);
    }
  }

  /** Fetch and render one surgery's timeline; 404 shows a not-found banner. */
  async showSurgery(surgeryId: string | null,
                    opts: { keepSelection?: boolean } = {}): Promise<void> {
    this.state.surgery = surgeryId;
    if (!opts.keepSelection) this.state.selected = null;
    this.syncUrl();
    if (!surgeryId) {
      this.timeline = null;
      this.renderLanes();
      return;
    }
    try {
      const payload = await this.api.timeline(surgeryId);
      this.timeline = buildTimelineViewModel(payload, this.state.selected);
      this.banner(null);
    } catch (err) {
      this.timeline = null;
      const apiErr = err as ApiError;
      this.banner(apiErr.status === 404
        ? `surgery not found: ${surgeryId}`
        : `timeline unavailable: ${apiErr.message}`);
    }
    this.renderLanes();
  }

  /** Validate, query the service, and render results in served order. */
  async runSearch(form: SearchForm): Promise<void> {
    const validation = this.doc.getElementById("validation")!;
    if (!hasCriterion(form)) {
      validation.textContent = "set at least one search criterion";
      return;
    }
    validation.textContent = "";
    this.state.query = form;
    this.syncUrl();

    const seq = ++this.searchSeq;
    let results: Segment[];
    try {
      results = await this.api.search(form);
    } catch (err) {
      if (seq === this.searchSeq) this.banner(`search failed: ${(err as Error).message}`);
      return;
    }
    if (seq !== this.searchSeq) return; // a newer search is already in flight
    this.banner(null);
    this.renderResults(results);
  }

  /** Jump the timeline to a search hit: switch surgery if needed, select, scroll. */
  async focusSegment(segment: Segment): Promise<void> {
    this.state.selected = { level: segment.level, start_s: segment.start_s };
    if (this.state.surgery !== segment.surgery_id) {
      (this.doc.getElementById("surgery-select") as HTMLSelectElement).value =
        segment.surgery_id;
      await this.showSurgery(segment.surgery_id, { keepSelection: true });
    } else if (this.timeline) {
      this.timeline = buildTimelineViewModel(
        { surgery_id: this.timeline.surgeryId, duration_s: this.timeline.durationS,
          levels: Object.fromEntries(LEVELS.map((lvl) =>
            [lvl, this.timeline!.lanes[lvl].map((bar) => bar.segment)])) as
            Record<Level, Segment[]>,
        },
        this.state.selected);
      this.renderLanes();
    }
    this.syncUrl();
    const bar = this.doc.querySelector(".bar.selected");
    if (bar && typeof (bar as HTMLElement).scrollIntoView === "function") {
      (bar as HTMLElement).scrollIntoView({ block: "center", inline: "center" });
    }
  }

  // -- rendering ------------------------------------------------------------

  private renderLanes(): void {
    const host = this.doc.getElementById("lanes")!;
    host.replaceChildren();
    const title = this.doc.getElementById("timeline-title")!;
    if (!this.timeline) {
      title.textContent = "";
      return;
    }
    title.textContent =
      `${this.timeline.surgeryId} · ${formatSeconds(this.timeline.durationS)}`;
    let any = false;
    for (const level of LEVELS) {
      const lane = this.doc.createElement("div");
      lane.className = "lane";
      const label = this.doc.createElement("span");
      label.className = "lane-name";
      label.textContent = level;
      const track = this.doc.createElement("div");
      track.className = "track";
      track.dataset.level = level;
      for (const bar of this.timeline.lanes[level]) {
        any = true;
        const el = this.doc.createElement("button");
        el.type = "button";
        el.className = bar.selected ? "bar selected" : "bar";
        el.style.left = `${bar.leftPct}%`;
        el.style.width = `${bar.widthPct}%`;
        el.style.background = bar.color;
        el.title = describeSegment(bar.segment);
        el.dataset.surgery = bar.segment.surgery_id;
        el.dataset.level = bar.segment.level;
        el.dataset.label = bar.segment.label;
        el.dataset.ordinal = String(bar.segment.label_ordinal);
        el.dataset.start = String(bar.segment.start_s);
        el.dataset.end = String(bar.segment.end_s);
        el.dataset.source = bar.segment.source;
        el.addEventListener("click", () => void this.focusSegment(bar.segment));
        track.append(el);
      }
      lane.append(label, track);
      host.append(lane);
    }
    if (!any) {
      const empty = this.doc.createElement("p");
      empty.id = "lanes-empty";
      empty.textContent = "no labelled segments for this surgery";
      host.append(empty);
    }
  }

  private renderResults(results: Segment[]): void {
    const host = this.doc.getElementById("results")!;
    host.replaceChildren();
    const count = this.doc.getElementById("results-count")!;
    count.textContent = results.length === 0
      ? "no results"
      : `${results.length} segment${results.length === 1 ? "" : "s"}`;
    for (const segment of results) {
      const item = this.doc.createElement("li");
      const link = this.doc.createElement("button");
      link.type = "button";
      link.className = "result";
      link.textContent = describeSegment(segment);
      link.dataset.surgery = segment.surgery_id;
      link.dataset.level = segment.level;
      link.dataset.label = segment.label;
      link.dataset.ordinal = String(segment.label_ordinal);
      link.dataset.start = String(segment.start_s);
      link.dataset.end = String(segment.end_s);
      link.dataset.source = segment.source;
      link.addEventListener("click", () => void this.focusSegment(segment));
      item.append(link);
      host.append(item);
    }
  }

  private banner(message: string | null): void {
    const node = this.doc.getElementById("banner")!;
    node.textContent = message ?? "";
    node.hidden = message === null;
  }

  // -- state plumbing ---------------------------------------------------------

  private syncUrl(): void {
    const win = this.win();
    if (!win) return;
    const encoded = encodeState(this.state);
    win.history.replaceState(null, "", encoded ? `?${encoded}` : win.location.pathname);
  }

  private win(): (Window & typeof globalThis) | null {
    return this.doc.defaultView;
  }

  private readForm(): SearchForm {
    const form: SearchForm = {};
    for (const key of SEARCH_KEYS) {
      const input = this.doc.getElementById(`q-${key}`) as HTMLInputElement | null;
      if (input && input.value.trim() !== "") form[key] = input.value.trim();
    }
    return form;
  }

  private fillForm(query: SearchForm): void {
    for (const key of SEARCH_KEYS) {
      const input = this.doc.getElementById(`q-${key}`) as HTMLInputElement | null;
      if (input) input.value = query[key] ?? "";
    }
  }
}
