/** Typed client for the timeline-index HTTP API. The UI is a pure consumer:
 * every payload is rendered exactly as served, never re-derived locally. */

export type Level = "phase" | "task" | "action";

export const LEVELS: readonly Level[] = ["phase", "task", "action"];

export interface Segment {
  surgery_id: string;
  level: Level;
  label_ordinal: number;
  label: string;
  start_s: number;
  end_s: number;
  source: string;
}

export interface SurgeryInfo {
  surgery_id: string;
  duration_s: number;
}

export interface TimelinePayload {
  surgery_id: string;
  duration_s: number;
  levels: Record<Level, Segment[]>;
}

export interface SearchForm {
  phase?: string;
  task?: string;
  action?: string;
  surgery?: string;
  from?: string;
  to?: string;
  min_duration?: string;
}

export const SEARCH_KEYS: readonly (keyof SearchForm)[] = [
  "phase", "task", "action", "surgery", "from", "to", "min_duration",
];

export function hasCriterion(form: SearchForm): boolean {
  return SEARCH_KEYS.some((key) => (form[key] ?? "").trim() !== "");
}

export function searchParams(form: SearchForm): URLSearchParams {
  const params = new URLSearchParams();
  for (const key of SEARCH_KEYS) {
    const value = (form[key] ?? "").trim();
    if (value !== "") params.set(key, value);
  }
  return params;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url);
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${String(err)}`);
  }
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail = (body as { error?: string }).error ?? response.statusText;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  async surgeries(): Promise<SurgeryInfo[]> {
    const payload = await getJson<{ surgeries: SurgeryInfo[] }>(`${this.baseUrl}/surgeries`);
    return payload.surgeries;
  }

  timeline(surgeryId: string): Promise<TimelinePayload> {
    return getJson<TimelinePayload>(
      `${this.baseUrl}/surgeries/${encodeURIComponent(surgeryId)}/timeline`);
  }

  async search(form: SearchForm): Promise<Segment[]> {
    const payload = await getJson<{ results: Segment[] }>(
      `${this.baseUrl}/search?${searchParams(form).toString()}`);
    return payload.results;
  }
}
