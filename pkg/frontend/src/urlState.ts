/** The whole view state lives in the URL so a reload (or a shared link)
 * reproduces the view: selected surgery, search form, selected segment. */

import { SEARCH_KEYS, SearchForm } from "./api.js";

export interface SelectedSegment {
  level: string;
  start_s: number;
}

export interface AppState {
  surgery: string | null;
  query: SearchForm;
  selected: SelectedSegment | null;
}

export const EMPTY_STATE: AppState = { surgery: null, query: {}, selected: null };

export function encodeState(state: AppState): string {
  const params = new URLSearchParams();
  if (state.surgery) params.set("surgery_view", state.surgery);
  for (const key of SEARCH_KEYS) {
    const value = (state.query[key] ?? "").trim();
    if (value !== "") params.set(key, value);
  }
  if (state.selected) params.set("sel", `${state.selected.level}@${state.selected.start_s}`);
  return params.toString();
}

export function decodeState(search: string): AppState {
  const params = new URLSearchParams(search);
  const query: SearchForm = {};
  for (const key of SEARCH_KEYS) {
    const value = params.get(key);
    if (value !== null && value.trim() !== "") query[key] = value.trim();
  }
  let selected: SelectedSegment | null = null;
  const sel = params.get("sel");
  if (sel) {
    const at = sel.lastIndexOf("@");
    const start = Number(sel.slice(at + 1));
    if (at > 0 && Number.isFinite(start)) {
      selected = { level: sel.slice(0, at), start_s: start };
    }
  }
  return { surgery: params.get("surgery_view"), query, selected };
}

export function statesEqual(a: AppState, b: AppState): boolean {
  return encodeState(a) === encodeState(b);
}
